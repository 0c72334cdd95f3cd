"""Render experiment CSVs into figures.

Four figure kinds cover the experiment outputs:

    sweep    eigen-metric CSV -> median +- MAD curves (ratio, |cosine|,
             aligned L2) against the swept variable, one line per eigenpair
    heatmap  pointwise CSV -> one panel per (eigenpair, landmark count)
             showing a field (I2, Ia, or Im) over the (u, v) plane, masked
             entries in gray
    quiver   pointwise CSV -> candidate vs reference eigenvector fields on
             the parameter plane, downsampled to at most 40 x 40 arrows
    timing   timing CSV -> log-log stage times with fitted slopes

Rendering never recomputes metrics and carries no timestamps: byte-equal
CSVs give pixel-equal images.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

KINDS = ("sweep", "heatmap", "quiver", "timing")

REQUIRED_COLUMNS = {
    "sweep": ["exp", "trial", "l", "m", "beta", "alpha", "ratio", "cosine", "alignedL2"],
    "heatmap": ["l", "m", "u", "v", "I2", "Ia", "Im"],
    "quiver": ["l", "m", "u", "v", "w0", "w1", "v0", "v1"],
    "timing": ["exp", "stage", "n", "m", "seconds"],
}

_TEXT_COLUMNS = {"exp", "stage"}


class SchemaMismatch(Exception):
    """Input CSV lacks required columns."""

    def __init__(self, path, missing):
        self.missing = list(missing)
        super().__init__(f"{path}: missing columns {', '.join(self.missing)}")


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: figure kind, input CSVs, output path, styling knobs."""

    kind: str
    inputs: tuple
    output: str
    field_name: str = "I2"
    log_x: bool = True
    max_arrows: int = 40
    dpi: int = 120

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "inputs", tuple(str(p) for p in self.inputs))


def load_table(path, kind: str) -> dict:
    """Read one CSV into {column: array}, validating the kind's schema."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(path, REQUIRED_COLUMNS[kind]) from None
        rows = [row for row in reader if row]
    missing = [c for c in REQUIRED_COLUMNS[kind] if c not in header]
    if missing:
        raise SchemaMismatch(path, missing)
    cols = {}
    for j, name in enumerate(header):
        raw = [row[j] for row in rows]
        if name in _TEXT_COLUMNS:
            cols[name] = np.array(raw, dtype=object)
        else:
            cols[name] = np.array(
                [float(v) if v != "" else np.nan for v in raw], dtype=float
            )
    return cols


def _load_all(spec: FigureSpec) -> dict:
    tables = [load_table(p, spec.kind) for p in spec.inputs]
    merged = {}
    for name in tables[0]:
        if all(name in t for t in tables):
            merged[name] = np.concatenate([t[name] for t in tables])
    return merged


def _median_mad(values):
    values = values[~np.isnan(values)]
    med = np.median(values)
    return med, np.median(np.abs(values - med))


def _sweep_axis(data) -> str:
    for name in ("m", "beta", "alpha"):
        if len(np.unique(data[name])) > 1:
            return name
    return "m"


def render_sweep(spec: FigureSpec, data: dict, fig):
    xname = _sweep_axis(data)
    xs = np.unique(data[xname])
    ls = np.unique(data["l"]).astype(int)
    panels = [("ratio", "eigenvalue difference ratio", lambda v: v),
              ("cosine", "|cosine similarity|", np.abs),
              ("alignedL2", "aligned L2 difference", lambda v: v)]
    axes = fig.subplots(1, 3)
    for ax, (col, title, fn) in zip(axes, panels):
        for l in ls:
            med = []
            mad = []
            for x in xs:
                sel = (data["l"] == l) & (data[xname] == x)
                m, d = _median_mad(fn(data[col][sel]))
                med.append(m)
                mad.append(d)
            ax.errorbar(xs, med, yerr=mad, marker="o", capsize=2, label=f"l={l}")
        if spec.log_x and xname == "m":
            ax.set_xscale("log", base=2)
        ax.set_xlabel(xname)
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
    axes[0].legend(fontsize=8)


def render_heatmap(spec: FigureSpec, data: dict, fig):
    ls = np.unique(data["l"]).astype(int)
    ms = np.unique(data["m"]).astype(int)
    axes = fig.subplots(len(ls), len(ms), squeeze=False)
    vals = data[spec.field_name]
    finite = vals[~np.isnan(vals)]
    vmin, vmax = (np.min(finite), np.max(finite)) if finite.size else (0, 1)
    for i, l in enumerate(ls):
        for j, m in enumerate(ms):
            ax = axes[i][j]
            sel = (data["l"] == l) & (data["m"] == m)
            u, v, f = data["u"][sel], data["v"][sel], vals[sel]
            bad = np.isnan(f)
            ax.scatter(u[bad], v[bad], c="lightgray", s=5, marker="s")
            sc = ax.scatter(u[~bad], v[~bad], c=f[~bad], s=5, vmin=vmin, vmax=vmax,
                            cmap="viridis")
            ax.set_title(f"l={l}, m={m}", fontsize=8)
            ax.set_xlabel("u", fontsize=7)
            ax.set_ylabel("v", fontsize=7)
    fig.colorbar(sc, ax=[a for row in axes for a in row], label=spec.field_name)


def _thin_grid(u, v, limit):
    """Indices of at most limit x limit points, one per occupied cell."""
    if u.size == 0:
        return np.array([], dtype=int)
    gu = np.clip(((u - u.min()) / max(np.ptp(u), 1e-12) * limit).astype(int), 0, limit - 1)
    gv = np.clip(((v - v.min()) / max(np.ptp(v), 1e-12) * limit).astype(int), 0, limit - 1)
    _, first = np.unique(gu * limit + gv, return_index=True)
    return np.sort(first)


def render_quiver(spec: FigureSpec, data: dict, fig):
    ls = np.unique(data["l"]).astype(int)
    ms = np.unique(data["m"]).astype(int)
    axes = fig.subplots(len(ls), len(ms), squeeze=False)
    for i, l in enumerate(ls):
        for j, m in enumerate(ms):
            ax = axes[i][j]
            sel = (data["l"] == l) & (data["m"] == m)
            u, v = data["u"][sel], data["v"][sel]
            keep = _thin_grid(u, v, spec.max_arrows)
            ax.quiver(u[keep], v[keep], data["v0"][sel][keep], data["v1"][sel][keep],
                      color="steelblue", width=0.004, label="reference")
            ax.quiver(u[keep], v[keep], data["w0"][sel][keep], data["w1"][sel][keep],
                      color="firebrick", width=0.002, label="landmark")
            ax.set_title(f"l={l}, m={m}", fontsize=8)
    axes[0][0].legend(fontsize=7)


def render_timing(spec: FigureSpec, data: dict, fig):
    stages = [s for s in ("assembly", "degrees", "scale", "svd")
              if np.any(data["stage"] == s)]
    m_mask = np.zeros(len(data["m"]), dtype=bool)
    n_fixed = data["n"][np.argmax(data["stage"] == "svd")] if "svd" in data["stage"] else data["n"][0]
    axes = fig.subplots(1, 2)
    ax = axes[0]
    for stage in stages:
        sel = (data["stage"] == stage) & (data["n"] == n_fixed)
        ms, secs = data["m"][sel], data["seconds"][sel]
        if len(np.unique(ms)) < 2:
            continue
        order = np.argsort(ms)
        ms, secs = ms[order], secs[order]
        slope = np.polyfit(np.log(ms), np.log(np.maximum(secs, 1e-12)), 1)[0]
        ax.loglog(ms, secs, marker="o", label=f"{stage} (slope {slope:.2f})")
    ax.set_xlabel("landmark count m")
    ax.set_ylabel("seconds")
    ax.set_title("stage time vs m")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)

    ax = axes[1]
    sel = data["stage"] == "assembly"
    ns = data["n"][sel]
    if len(np.unique(ns)) > 1:
        m_common = data["m"][sel]
        m_mode = np.unique(m_common)[np.argmax(np.unique(m_common, return_counts=True)[1])]
        sub = sel & (data["m"] == m_mode)
        ns, secs = data["n"][sub], data["seconds"][sub]
        order = np.argsort(ns)
        ns, secs = ns[order], secs[order]
        slope = np.polyfit(np.log(ns), np.log(np.maximum(secs, 1e-12)), 1)[0]
        ax.loglog(ns, secs, marker="s", color="darkgreen",
                  label=f"assembly (slope {slope:.2f})")
        ax.legend(fontsize=8)
    ax.set_xlabel("point count n")
    ax.set_ylabel("seconds")
    ax.set_title("assembly time vs n")
    ax.grid(True, which="both", alpha=0.3)


_RENDERERS = {
    "sweep": (render_sweep, (12, 3.6)),
    "heatmap": (render_heatmap, (11, 7)),
    "quiver": (render_quiver, (11, 7)),
    "timing": (render_timing, (10, 4)),
}


def render(spec: FigureSpec) -> Path:
    """Draw the figure and write it to spec.output; returns the path."""
    data = _load_all(spec)
    renderer, figsize = _RENDERERS[spec.kind]
    with plt.rc_context({"figure.max_open_warning": 0}):
        fig = plt.figure(figsize=figsize, dpi=spec.dpi)
        try:
            renderer(spec, data, fig)
            if spec.kind != "heatmap":
                fig.tight_layout()
            # strip the writer tag so identical inputs give identical bytes
            fig.savefig(spec.output, metadata={"Software": None})
        finally:
            plt.close(fig)
    return Path(spec.output)
