"""Experiment configuration: TOML parsing, validation, defaults, presets.

Config files are flat TOML (key = value; strings, numbers, booleans,
inf/nan, and single-line arrays). The reader is a strict subset parser
that records the line number of every key so validation errors can point
at the offending line; nothing beyond the flat subset is accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .errors import ConfigError

EXPERIMENTS = (
    "landmark_sweep",
    "beta_sweep",
    "alpha_sweep",
    "eigen_recovery",
    "effective_transport",
    "timing_scaling",
    "double_transport_scaling",
)

CHARTS = ("klein", "dsphere", "sphere")


def _parse_scalar(text: str, line_no: int):
    text = text.strip()
    if not text:
        raise ConfigError([f"line {line_no}: empty value"])
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    low = text.lower()
    if low in ("inf", "+inf"):
        return math.inf
    if low == "-inf":
        return -math.inf
    if low == "nan":
        return math.nan
    try:
        if any(ch in text for ch in ".eE") and not text.lstrip("+-").isdigit():
            return float(text)
        return int(text)
    except ValueError as exc:
        raise ConfigError([f"line {line_no}: cannot parse value {text!r}"]) from exc


def parse_toml(text: str) -> tuple:
    """Parse flat TOML text; returns (values, key -> line number)."""
    values = {}
    lines = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            raise ConfigError(
                [f"line {line_no}: tables are not supported; use flat keys"]
            )
        if "=" not in line:
            raise ConfigError([f"line {line_no}: expected 'key = value'"])
        key, _, rhs = line.partition("=")
        key = key.strip()
        rhs = rhs.strip()
        # strip trailing comments outside of strings
        if "#" in rhs and not rhs.startswith('"'):
            rhs = rhs.split("#", 1)[0].strip()
        if key in values:
            raise ConfigError([f"line {line_no}: duplicate key {key!r}"])
        if rhs.startswith("["):
            if not rhs.endswith("]"):
                raise ConfigError([f"line {line_no}: arrays must be single-line"])
            inner = rhs[1:-1].strip()
            items = [s for s in (p.strip() for p in inner.split(",")) if s]
            values[key] = [_parse_scalar(item, line_no) for item in items]
        else:
            values[key] = _parse_scalar(rhs, line_no)
        lines[key] = line_no
    return values, lines


def _fmt_value(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, str):
        return f'"{val}"'
    if isinstance(val, float):
        if math.isinf(val):
            return "inf" if val > 0 else "-inf"
        if math.isnan(val):
            return "nan"
        return repr(val)
    if isinstance(val, (list, tuple)):
        return "[" + ", ".join(_fmt_value(v) for v in val) + "]"
    return repr(val)


def dump_toml(values: dict) -> str:
    """Serialize a flat mapping to TOML; inverse of parse_toml."""
    out = []
    for key, val in values.items():
        if val is None:
            continue
        out.append(f"{key} = {_fmt_value(val)}")
    return "\n".join(out) + "\n"


@dataclass
class ExperimentConfig:
    """Flat, fully-defaulted experiment description.

    Grids are lists; scalar beta/alpha apply where the experiment does not
    sweep them. vdm_alpha sets the vanilla-VDM baseline normalization.
    """

    experiment: str = ""
    chart: str = "klein"
    density: str = "area"
    sigma: list = field(default_factory=lambda: [1.0, 1.0, 0.8])
    n: int = 1000
    m: int = 100
    m_grid: list = field(default_factory=list)
    n_grid: list = field(default_factory=list)
    beta: float = 0.5
    alpha: float = 0.0
    beta_grid: list = field(default_factory=list)
    alpha_grid: list = field(default_factory=list)
    vdm_alpha: float = 0.0
    epsilon: float = 0.2
    eps_grid: list = field(default_factory=list)
    t: float = 1.0
    r: int = 6
    trials: int = 10
    seed: int = 0
    frames_mode: str = "truth"
    pca_radius: float = 0.0
    pca_neighbors: int = 10
    trunc: float = math.inf
    landmark_mode: str = "subset"
    landmark_path: str = ""
    neighborhood_radius: float = 0.0
    neighborhood_mode: str = "union"
    pair_separation: str = "epsilon"
    ode_steps: int = 2000
    svd_method: str = "auto"
    save_pointwise: bool = False
    output_dir: str = "runs"

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_DESK_PRESETS = {
    "landmark_sweep": dict(
        chart="klein", density="area", n=1000, m_grid=[64, 128, 256, 512],
        epsilon=0.2, beta=0.5, alpha=0.0, vdm_alpha=0.0, r=6, trials=10,
        seed=4,
    ),
    "beta_sweep": dict(
        chart="dsphere", density="acg", sigma=[1.0, 1.0, 0.8], n=1200, m=800,
        beta_grid=[0.0, 0.25, 0.5, 0.75, 1.0], alpha=0.0, vdm_alpha=0.0,
        epsilon=0.17, r=6, trials=10,
    ),
    "alpha_sweep": dict(
        chart="dsphere", density="acg", sigma=[1.0, 1.0, 0.8], n=1200, m=800,
        beta=0.5, alpha_grid=[0.0, 0.25, 0.5, 0.75, 1.0], vdm_alpha=1.0,
        epsilon=0.17, r=6, trials=10,
    ),
    "eigen_recovery": dict(
        chart="dsphere", density="area", n=1500, m=270, beta=0.5, alpha=0.0,
        vdm_alpha=0.0, epsilon=0.17, r=20, trials=5,
    ),
    "effective_transport": dict(
        chart="dsphere", m_grid=[20, 40, 60], epsilon=0.3, beta=0.0,
        trials=30, pca_neighbors=10, neighborhood_mode="union", seed=2,
    ),
    "timing_scaling": dict(
        chart="klein", n=20000, m=100, m_grid=[100, 200, 400, 800],
        n_grid=[5000, 10000, 20000], epsilon=0.5, beta=0.5,
        alpha=0.0, r=6, trials=1, svd_method="dense",
    ),
    "double_transport_scaling": dict(
        chart="sphere", eps_grid=[0.2, 0.1, 0.05, 0.025], trials=200,
        pair_separation="epsilon", ode_steps=2000,
    ),
}

_PAPER_PRESETS = {
    "landmark_sweep": dict(
        chart="klein", density="area", n=3500,
        m_grid=[45, 64, 90, 128, 181, 256, 362, 512, 724, 1024],
        epsilon=0.2, beta=0.5, alpha=0.0, vdm_alpha=0.0, r=6, trials=30,
    ),
    "beta_sweep": dict(
        chart="dsphere", density="acg", sigma=[1.0, 1.0, 0.8], n=3500, m=2200,
        beta_grid=[0.0, 0.25, 0.5, 0.75, 1.0], alpha=0.0, vdm_alpha=0.0,
        epsilon=0.17, r=6, trials=30,
    ),
    "alpha_sweep": dict(
        chart="dsphere", density="acg", sigma=[1.0, 1.0, 0.8], n=3500, m=2500,
        beta=0.5, alpha_grid=[0.0, 0.25, 0.5, 0.75, 1.0], vdm_alpha=1.0,
        epsilon=0.17, r=6, trials=30,
    ),
    "eigen_recovery": dict(
        chart="dsphere", density="area", n=5000, m=500, beta=0.5, alpha=0.0,
        vdm_alpha=0.0, epsilon=0.17, r=20, trials=30,
    ),
    "effective_transport": dict(
        chart="dsphere", m_grid=[20, 40, 60, 80], epsilon=0.3, beta=0.0,
        trials=30, pca_neighbors=10, neighborhood_mode="union",
    ),
    "timing_scaling": dict(
        chart="klein", n=20000, m=100, m_grid=[100, 200, 400, 800],
        n_grid=[5000, 10000, 20000], epsilon=0.5, beta=0.5,
        alpha=0.0, r=6, trials=1, svd_method="dense",
    ),
    "double_transport_scaling": dict(
        chart="sphere", eps_grid=[0.2, 0.1, 0.05, 0.025], trials=200,
        pair_separation="epsilon", ode_steps=2000,
    ),
}

PRESETS = {"desk": _DESK_PRESETS, "paper": _PAPER_PRESETS}

_GRID_EXPERIMENTS = {
    "landmark_sweep": "m_grid",
    "beta_sweep": "beta_grid",
    "alpha_sweep": "alpha_grid",
    "effective_transport": "m_grid",
    "timing_scaling": "m_grid",
    "double_transport_scaling": "eps_grid",
}


def _check_range(errors, lines, key, value, lo, hi):
    if not (lo <= value <= hi):
        where = f"line {lines[key]}: " if key in lines else ""
        errors.append(f"{where}{key} = {value} is outside [{lo}, {hi}]")


def build_config(values: dict, lines: dict | None = None, preset: str = "desk") -> ExperimentConfig:
    """Validate a raw mapping into an ExperimentConfig with defaults filled.

    Unknown keys are errors. Defaults come from the named preset for the
    requested experiment, then from the dataclass.
    """
    lines = lines or {}
    errors = []
    known = {f.name for f in fields(ExperimentConfig)}
    for key in values:
        if key not in known:
            where = f"line {lines[key]}: " if key in lines else ""
            errors.append(f"{where}unknown key {key!r}")
    exp = values.get("experiment")
    if exp is None:
        errors.append("missing required key 'experiment'")
    elif exp not in EXPERIMENTS:
        where = f"line {lines['experiment']}: " if "experiment" in lines else ""
        errors.append(f"{where}experiment must be one of {EXPERIMENTS}, got {exp!r}")
    if errors:
        raise ConfigError(errors)

    if preset not in PRESETS:
        raise ConfigError([f"unknown preset {preset!r}; choose from {tuple(PRESETS)}"])
    merged = dict(PRESETS[preset].get(exp, {}))
    merged.update({k: v for k, v in values.items() if v is not None})
    cfg = ExperimentConfig(**{k: v for k, v in merged.items() if k in known})

    for key in ("beta", "alpha", "vdm_alpha"):
        _check_range(errors, lines, key, getattr(cfg, key), 0.0, 1.0)
    for key in ("beta_grid", "alpha_grid"):
        for val in getattr(cfg, key):
            _check_range(errors, lines, key, val, 0.0, 1.0)
    if cfg.epsilon <= 0:
        errors.append(f"epsilon must be positive, got {cfg.epsilon}")
    if cfg.t <= 0:
        errors.append(f"t must be positive, got {cfg.t}")
    if cfg.trials < 1:
        errors.append(f"trials must be >= 1, got {cfg.trials}")
    if cfg.n < 1:
        errors.append(f"n must be >= 1, got {cfg.n}")
    if cfg.r < 1:
        errors.append(f"r must be >= 1, got {cfg.r}")
    if cfg.chart not in CHARTS:
        errors.append(f"chart must be one of {CHARTS}, got {cfg.chart!r}")
    if cfg.density not in ("area", "param", "acg"):
        errors.append(f"density must be area|param|acg, got {cfg.density!r}")
    if cfg.frames_mode not in ("truth", "pca"):
        errors.append(f"frames_mode must be truth|pca, got {cfg.frames_mode!r}")
    if cfg.svd_method not in ("auto", "dense", "iterative"):
        errors.append(f"svd_method must be auto|dense|iterative, got {cfg.svd_method!r}")
    if cfg.neighborhood_mode not in ("union", "split"):
        errors.append(f"neighborhood_mode must be union|split, got {cfg.neighborhood_mode!r}")
    if cfg.pair_separation not in ("epsilon", "sqrt-epsilon"):
        errors.append(
            f"pair_separation must be epsilon|sqrt-epsilon, got {cfg.pair_separation!r}"
        )
    grid_key = _GRID_EXPERIMENTS.get(cfg.experiment)
    if grid_key and not getattr(cfg, grid_key):
        errors.append(f"experiment {cfg.experiment!r} needs a non-empty {grid_key}")
    if errors:
        raise ConfigError(errors)
    return cfg


def validate_config(path, preset: str = "desk") -> ExperimentConfig:
    """Load, default, and range-check a TOML config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    values, lines = parse_toml(text)
    return build_config(values, lines, preset=preset)
