"""Command-line interface.

Three subcommands:

    separate  run the solver on a PNG (or a directory of PNGs with --jobs)
    synth     render a synthetic ground-truth pair and its mixture
    eval      compare estimate PNGs against references and report metrics

Exit codes: 0 on success, 2 for unreadable inputs, bad arguments, or shape
mismatches, 3 when the solver diverges (the failing stage is printed).

Option precedence for `separate`: built-in defaults, then a JSON --config
file, then explicit command-line flags. Unknown keys in the config file are
rejected.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .errors import DimensionError, DivergenceError
from .metrics import (
    MetricsReport,
    exclusion_multiscale,
    exclusion_transform,
    psnr,
    ssim,
)
from .pngio import load_png, save_png
from .report import render_trace_figure
from .solver import SolverConfig, solve
from .synth import KINDS, MixtureSpec, procedural_pair, synthesize_mixture
from .wavelet import haar_bank

_SOLVER_KEYS = {f.name for f in dataclasses.fields(SolverConfig)}
_RUN_KEYS = _SOLVER_KEYS | {
    "input", "out_dir", "trace", "plot", "jobs", "steps",
    "truth_t", "truth_r", "kind", "size", "sigma", "gain", "clip", "report",
}


def _load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValueError(f"cannot read config file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ValueError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(data) - _RUN_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return data


def _build_solver_config(args) -> SolverConfig:
    values = {f.name: f.default for f in dataclasses.fields(SolverConfig)}
    file_cfg = _load_config_file(args.config) if args.config else {}
    steps_override = file_cfg.pop("steps", None)
    for key, val in file_cfg.items():
        if key in _SOLVER_KEYS:
            values[key] = val
    for key in _SOLVER_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if getattr(args, "steps", None) is not None:
        steps_override = args.steps
    if steps_override is not None:
        s = float(steps_override)
        values.update(eta1=s, eta2=s, eta3=s, eta4=s, auto_step=False)
    return SolverConfig(**values)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with run options")
    p.add_argument("--scales", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--atoms", type=int)
    p.add_argument("--kernel", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--tau-growth", dest="tau_growth", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--lambda-t", dest="lambda_t", type=float)
    p.add_argument("--lambda-r", dest="lambda_r", type=float)
    p.add_argument("--eta1", type=float)
    p.add_argument("--eta2", type=float)
    p.add_argument("--eta3", type=float)
    p.add_argument("--eta4", type=float)
    p.add_argument("--steps", type=float,
                   help="set all four step sizes at once and disable auto-step")
    p.add_argument("--auto-step", dest="auto_step",
                   action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--dict", dest="dict_kind", choices=["dct", "random"])
    p.add_argument("--r-init", dest="r_init", choices=["zero", "half"])
    p.add_argument("--coupled-r-grad", dest="coupled_r_grad",
                   action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--seed", type=int)


def _separate_one(src: Path, out_dir: Path, cfg: SolverConfig,
                  trace_to, plot_to, truth_paths) -> str:
    image = load_png(src)
    truth = None
    if truth_paths[0] is not None:
        t_ref = load_png(truth_paths[0])
        r_ref = (load_png(truth_paths[1]) if truth_paths[1] is not None
                 else np.zeros_like(t_ref))
        if t_ref.shape != image.shape or r_ref.shape != image.shape:
            raise DimensionError("ground-truth shape does not match the input")
        truth = (t_ref, r_ref)
    t_hat, r_hat, trace = solve(image, cfg, ground_truth=truth)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_png(out_dir / f"{src.stem}_T.png", t_hat)
    save_png(out_dir / f"{src.stem}_R.png", r_hat)
    if trace_to is not None:
        trace.save_csv(trace_to)
    if plot_to is not None:
        render_trace_figure(trace, plot_to, title=src.name)
    for w in trace.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return src.stem


def _batch_worker(job):
    src, out_dir, cfg_values, trace_flag, plot_flag = job
    cfg = SolverConfig(**cfg_values)
    out = Path(out_dir)
    stem = Path(src).stem
    trace_to = out / f"{stem}_trace.csv" if trace_flag else None
    plot_to = out / f"{stem}_trace.png" if plot_flag else None
    return _separate_one(Path(src), out, cfg, trace_to, plot_to, (None, None))


def cmd_separate(args) -> int:
    cfg = _build_solver_config(args)
    src = Path(args.input)
    if not src.exists():
        print(f"error: input {src} does not exist", file=sys.stderr)
        return 2
    if src.is_dir():
        files = sorted(p for p in src.iterdir() if p.suffix.lower() == ".png")
        if not files:
            print(f"error: no PNG files in {src}", file=sys.stderr)
            return 2
        out_dir = Path(args.out_dir) if args.out_dir else src
        cfg_values = dataclasses.asdict(cfg)
        jobs = [(str(p), str(out_dir), cfg_values,
                 args.trace is not None, args.plot is not None) for p in files]
        if args.jobs <= 1:
            for job in jobs:
                _batch_worker(job)
        else:
            with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as ex:
                list(ex.map(_batch_worker, jobs))
        return 0
    out_dir = Path(args.out_dir) if args.out_dir else src.parent
    trace_to = Path(args.trace) if args.trace else None
    plot_to = Path(args.plot) if args.plot else None
    _separate_one(src, out_dir, cfg, trace_to, plot_to,
                  (args.truth_t, args.truth_r))
    return 0


def cmd_synth(args) -> int:
    spec = MixtureSpec(blur_sigma=args.sigma, gain=args.gain, clip=not args.no_clip)
    t, r = procedural_pair(args.kind, args.size, seed=args.seed)
    mix = synthesize_mixture(t, r, spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{args.kind}_s{args.seed}"
    save_png(out_dir / f"mix_{stem}.png", mix)
    save_png(out_dir / f"gt_t_{stem}.png", t)
    save_png(out_dir / f"gt_r_{stem}.png", r)
    print(out_dir / f"mix_{stem}.png")
    return 0


def cmd_eval(args) -> int:
    est_t = load_png(args.estimate_t)
    ref_t = load_png(args.reference_t)
    if est_t.shape != ref_t.shape:
        raise DimensionError(
            f"estimate {est_t.shape} and reference {ref_t.shape} differ in shape"
        )
    est_r = load_png(args.est_r) if args.est_r else None
    ref_r = load_png(args.ref_r) if args.ref_r else None
    recon = float(np.sum((ref_t - est_t) ** 2))
    psnr_r = ssim_r = excl_ms = excl_tr = None
    if est_r is not None:
        if est_r.shape != est_t.shape:
            raise DimensionError("reflection estimate shape differs from transmission")
        excl_ms = exclusion_multiscale(est_t, est_r)
        excl_tr = exclusion_transform(est_t, est_r, haar_bank())
    if est_r is not None and ref_r is not None:
        if ref_r.shape != est_r.shape:
            raise DimensionError("reflection reference shape differs from estimate")
        psnr_r = psnr(est_r, ref_r)
        ssim_r = ssim(est_r, ref_r)
        recon += float(np.sum((ref_r - est_r) ** 2))
    report = MetricsReport(
        psnr_t=psnr(est_t, ref_t),
        psnr_r=psnr_r,
        ssim_t=ssim(est_t, ref_t),
        ssim_r=ssim_r,
        excl_multiscale=excl_ms,
        excl_transform=excl_tr,
        recon=recon,
    )
    text = report.to_json()
    print(text)
    if args.report:
        Path(args.report).write_text(text + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reflectsep",
        description="Single-image reflection separation via convolutional sparse coding.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sep = sub.add_parser("separate", help="separate a PNG into layer estimates")
    p_sep.add_argument("input", help="input PNG, or a directory of PNGs")
    p_sep.add_argument("-o", "--out-dir", help="output directory (default: input's)")
    p_sep.add_argument("--trace", help="write the iteration trace CSV here")
    p_sep.add_argument("--plot", help="render trace figures to this image file")
    p_sep.add_argument("--jobs", type=int, default=1,
                       help="concurrent solves in directory mode")
    p_sep.add_argument("--truth-t", help="ground-truth transmission PNG for trace PSNR")
    p_sep.add_argument("--truth-r", help="ground-truth reflection PNG for trace PSNR")
    _add_solver_flags(p_sep)
    p_sep.set_defaults(func=cmd_separate)

    p_syn = sub.add_parser("synth", help="render a synthetic pair and mixture")
    p_syn.add_argument("--kind", choices=list(KINDS), required=True)
    p_syn.add_argument("--size", type=int, default=64)
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.add_argument("--sigma", type=float, default=2.0, help="reflection blur sigma")
    p_syn.add_argument("--gain", type=float, default=0.6)
    p_syn.add_argument("--no-clip", action="store_true")
    p_syn.add_argument("-o", "--out-dir", required=True)
    p_syn.set_defaults(func=cmd_synth)

    p_ev = sub.add_parser("eval", help="compare estimates against references")
    p_ev.add_argument("estimate_t", help="estimated transmission PNG")
    p_ev.add_argument("reference_t", help="reference transmission PNG")
    p_ev.add_argument("--est-r", help="estimated reflection PNG")
    p_ev.add_argument("--ref-r", help="reference reflection PNG")
    p_ev.add_argument("--report", help="also write the JSON report here")
    p_ev.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: solver diverged: {exc}", file=sys.stderr)
        return 3
    except (ValueError, DimensionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
