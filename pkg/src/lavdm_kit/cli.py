"""Command-line interface: gen, vdm, lavdm, run.

gen samples a surface to a cloud CSV; vdm and lavdm embed a cloud and
write the spectral container plus a JSON sidecar; run executes a TOML
experiment config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .config import PRESETS, validate_config
from .connections import frame_field
from .containers import write_container
from .errors import ConfigError, LavdmError
from .experiments import _connection_callable, run_experiment
from .kernels import alpha_normalize, gaussian_affinity, row_degrees
from .lavdm import landmark_state, landmark_svd, lavdm_embed
from .manifolds import (
    distorted_sphere,
    klein_bottle,
    read_cloud_csv,
    sample_surface,
    sphere,
    write_cloud_csv,
)
from .vdm import assemble_vdm, vdm_embed, vdm_spectrum

_CHARTS = {"klein": klein_bottle, "dsphere": distorted_sphere, "sphere": sphere}


def _add_common_embed_args(p):
    p.add_argument("--input", required=True, help="cloud CSV from `gen`")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--r", type=int, default=6)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--trunc", type=float, default=np.inf,
                   help="truncation radius as a multiple of epsilon on squared distance")
    p.add_argument("--frames", choices=("pca", "truth"), default="truth")
    p.add_argument("--chart", choices=tuple(_CHARTS), default=None,
                   help="chart for ground-truth frames (CSV params must match)")
    p.add_argument("--pca-radius", type=float, default=0.0)
    p.add_argument("--out", required=True)


def _load_framed_cloud(args):
    chart = _CHARTS[args.chart]() if args.chart else None
    cloud = read_cloud_csv(args.input, chart)
    if args.frames == "truth":
        if cloud.chart is None:
            raise LavdmError("--frames truth needs --chart and a CSV with u,v columns")
        frames = frame_field(cloud, "truth")
    else:
        radius = args.pca_radius if args.pca_radius > 0 else 1.5 * np.sqrt(args.epsilon)
        frames = frame_field(cloud, "pca", d=2, pca_radius=radius)
    return cloud, frames


def _cmd_gen(args):
    chart = _CHARTS[args.chart]()
    sigma = None
    if args.density == "acg":
        sigma = np.diag([float(x) for x in args.sigma.split(",")])
    cloud = sample_surface(chart, args.n, args.density, seed=args.seed, sigma=sigma)
    write_cloud_csv(args.out, cloud)
    print(f"wrote {cloud.n} points ({args.chart}, {args.density}) to {args.out}")
    return 0


def _cmd_vdm(args):
    cloud, frames = _load_framed_cloud(args)
    W = gaussian_affinity(cloud, cloud, args.epsilon, args.trunc)
    deg = row_degrees(W)
    W_a = alpha_normalize(W, deg, args.alpha)
    S, d_alpha = assemble_vdm(W_a, _connection_callable(frames))
    spec = vdm_spectrum(S, d_alpha, args.r)
    emb = vdm_embed(spec, args.t)
    write_container(args.out, [
        ("VAL", spec.values),
        ("SPC", spec.vectors),
        ("EMB", emb.matrices),
    ])
    sidecar = {
        "eigenvalues": list(spec.values),
        "n": cloud.n,
        "q": spec.q,
        "r": spec.r,
        "alpha": args.alpha,
        "epsilon": args.epsilon,
    }
    with open(args.out + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
    print(f"wrote spectral container to {args.out} (+.json sidecar)")
    return 0


def _cmd_lavdm(args):
    cloud, frames = _load_framed_cloud(args)
    if args.landmarks.startswith("subset:"):
        m = int(args.landmarks.split(":", 1)[1])
        rng = np.random.default_rng(args.seed)
        idx = np.sort(rng.choice(cloud.n, size=m, replace=False))
        Z, fz = cloud.subset(idx), frames.subset(idx)
        mode = "subset"
    else:
        Z = read_cloud_csv(args.landmarks, cloud.chart)
        if args.frames == "truth":
            fz = frame_field(Z, "truth")
        else:
            radius = args.pca_radius if args.pca_radius > 0 else 1.5 * np.sqrt(args.epsilon)
            fz = frame_field(Z, "pca", d=2, pca_radius=radius)
        mode = "designed"
    state = landmark_state(
        cloud, Z, args.epsilon, args.beta, args.alpha, args.trunc, frames, fz
    )
    spec = landmark_svd(state, args.r)
    emb = lavdm_embed(spec, args.t)
    write_container(args.out, [
        ("VAL", spec.markov_eigenvalues),
        ("SPC", spec.vectors),
        ("EMB", emb.matrices),
    ])
    sidecar = {
        "eigenvalues": list(spec.markov_eigenvalues),
        "n": cloud.n,
        "q": spec.q,
        "r": spec.r,
        "alpha": args.alpha,
        "epsilon": args.epsilon,
        "beta": args.beta,
        "m": state.m,
        "landmark_mode": mode,
    }
    with open(args.out + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
    print(f"wrote landmark spectral container to {args.out} (+.json sidecar)")
    return 0


def _cmd_run(args):
    cfg = validate_config(args.config, preset=args.preset)
    print("resolved config:")
    for key, val in cfg.as_dict().items():
        print(f"  {key} = {val}")
    result = run_experiment(cfg, jobs=args.jobs)
    print(f"results: {result.csv_path}")
    print(f"manifest: {result.manifest_path}")
    for key, val in result.manifest["summary"].items():
        print(f"  {key} = {val}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lavdm-kit",
        description="landmark-accelerated vector diffusion maps toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a synthetic surface to CSV")
    p.add_argument("--chart", choices=tuple(_CHARTS), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--density", choices=("area", "param", "acg"), default="area")
    p.add_argument("--sigma", default="1,1,0.8",
                   help="comma-separated ACG covariance diagonal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("vdm", help="vanilla vector diffusion map")
    _add_common_embed_args(p)
    p.set_defaults(func=_cmd_vdm)

    p = sub.add_parser("lavdm", help="landmark-accelerated vector diffusion map")
    _add_common_embed_args(p)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--landmarks", required=True,
                   help='landmark CSV path or "subset:<m>"')
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_lavdm)

    p = sub.add_parser("run", help="run a TOML experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--preset", choices=tuple(PRESETS), default="desk")
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for msg in exc.messages:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    except (LavdmError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
