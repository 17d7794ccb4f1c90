"""Command-line entry point: ``iac <command> ...`` (or ``python -m iac``)."""
from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

from . import baselines, metrics
from .core import IacParams, apply_iac
from .errors import IacError
from .experiment import run_experiment
from .fit import FitConfig, LossKind, fit_iac, gradient_check
from .io import load_image, params_load, params_save, save_image
from .synth import make_kind, synth_target

OCCUPANCY_REFERENCE = 0.0553  # reported figure for a 33-point image-adaptive LUT


def cmd_fit(args):
    x = load_image(args.input)
    y = load_image(args.target)
    cfg = FitConfig(
        iterations=args.iters,
        learning_rate_basis=args.lr_basis,
        learning_rate_curves=args.lr_curves,
        loss=LossKind(args.loss, args.beta),
        curve_dims=args.curve_dims,
        rgb_only=args.rgb_only,
        seed=args.seed,
        downsample_to=args.downsample_to,
    )
    params, rep = fit_iac(x, y, cfg)
    meta = {
        "loss": args.loss,
        "beta": args.beta,
        "iterations": args.iters,
        "seed": args.seed,
        "rgb_only": args.rgb_only,
    }
    params_save(params, args.out, meta)
    print(f"iterations   {rep.iterations_run}")
    print(f"loss         {rep.loss_history[0]:.6e} -> {rep.final_loss:.6e}")
    print(f"psnr         {rep.final_psnr:.4f} dB")
    print(f"ssim         {rep.final_ssim:.6f}")
    print(f"basis cond   {rep.condition_number:.4g}")
    print(f"rank repairs {rep.repaired_rank_count}")
    print(f"wall time    {rep.wall_time:.2f} s")
    return 0


def cmd_apply(args):
    x = load_image(args.input)
    params = params_load(args.params)
    save_image(apply_iac(x, params), args.out)
    return 0


def cmd_metrics(args):
    a = load_image(args.a)
    b = load_image(args.b)
    chosen = [k for k in ("psnr", "ssim", "mse", "mae", "deltae") if getattr(args, k)]
    chosen = chosen or ["psnr", "ssim", "mse", "mae", "deltae"]
    if "psnr" in chosen:
        print(f"psnr    {metrics.psnr(a, b):.4f} dB")
    if "ssim" in chosen:
        print(f"ssim    {metrics.ssim(a, b):.6f}  (Rec.709 luma, 11x11 Gaussian sigma=1.5)")
    if "mse" in chosen or "mae" in chosen:
        mse, mae = metrics.error_stats(a, b)
        if "mse" in chosen:
            print(f"mse     {mse:.4f}  (0-255 scale)")
        if "mae" in chosen:
            print(f"mae     {mae:.4f}  (0-255 scale)")
    if "deltae" in chosen:
        s = metrics.delta_e2000(a, b)
        print(f"deltaE  mean {s.mean:.4f}  q1 {s.q1:.4f}  q2 {s.q2:.4f}  q3 {s.q3:.4f}  (sRGB, D65)")
    return 0


def cmd_occupancy(args):
    x = load_image(args.input)
    frac = baselines.lut_occupancy(x, args.size)
    print(f"occupancy {100 * frac:.3f}% of {args.size}^3 lattice vertices")
    print("counting rule: a vertex is used if it is a corner of some pixel's enclosing cell")
    print(f"reference: {100 * OCCUPANCY_REFERENCE:.2f}% for a 33-point image-adaptive LUT")
    return 0


def cmd_synth(args):
    x = load_image(args.input)
    kw = {}
    if args.kind == "hue_rotate":
        kw["angle"] = args.angle
    elif args.kind == "gamma":
        if args.gamma is None:
            raise IacError("--gamma is required for kind gamma")
        kw["gamma"] = tuple(args.gamma) if len(args.gamma) == 3 else args.gamma[0]
    elif args.kind == "exposure":
        kw["ev"] = args.ev
    elif args.kind == "channel_mix":
        if args.mix is None:
            raise IacError("--mix needs 9 values")
        kw["matrix"] = tuple(args.mix)
    elif args.kind == "permute":
        kw["perm"] = args.perm
    save_image(synth_target(x, make_kind(args.kind, **kw), seed=args.seed), args.out)
    return 0


def cmd_gradcheck(args):
    results = gradient_check(trials=args.trials, seed=args.seed)
    failed = 0
    for i, r in enumerate(results):
        mark = "ok  " if r.passed else "FAIL"
        print(
            f"{mark} trial {i:3d}  K={r.curve_dims:3d}  {r.loss:8s}  "
            f"max rel err {r.max_rel_error:.2e}  max abs err (small) {r.max_abs_error_small:.2e}"
        )
        failed += not r.passed
    print(f"{len(results) - failed}/{len(results)} trials within tolerance")
    return 1 if failed else 0


def cmd_bench(args):
    x = load_image(args.input)
    if args.params:
        params = params_load(args.params)
    else:
        rng = np.random.default_rng(0)
        basis = np.eye(3) + 0.3 * rng.uniform(-1, 1, (3, 3))
        params = IacParams(basis, np.sort(rng.uniform(0, 1, (3, 200)), axis=1))
    apply_iac(x, params)  # compile / warm caches
    times = []
    for _ in range(args.repeat):
        t = time.perf_counter()
        apply_iac(x, params)
        times.append(time.perf_counter() - t)
    mp = x.shape[0] * x.shape[1] / 1e6
    best, med = min(times), float(np.median(times))
    print(f"image        {x.shape[1]}x{x.shape[0]} ({mp:.3f} MP)")
    print(f"apply_iac    best {1e3 * best:.2f} ms  median {1e3 * med:.2f} ms over {args.repeat} runs")
    print(f"per MP       {1e3 * med / mp:.2f} ms/MP  ({mp / med:.1f} MP/s)")
    return 0


def cmd_lut(args):
    params = params_load(args.params)
    lut = baselines.Lut3d.from_function(lambda im: apply_iac(im, params), args.size)
    baselines.write_cube(lut, args.out, title="iac transform")
    return 0


def cmd_experiment(args):
    rows = run_experiment(args.manifest, args.out_dir, jobs=args.jobs)
    bad = sum(r.status != "ok" for r in rows)
    print(f"{len(rows)} rows written to {args.out_dir}/report.csv ({bad} failed)")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="iac", description="Image-adaptive coordinate color transforms.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    d = FitConfig()
    s = sub.add_parser("fit", help="fit transform parameters mapping input to target")
    s.add_argument("--input", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--rgb-only", action="store_true", help="freeze the basis at identity")
    s.add_argument("--curve-dims", type=int, default=d.curve_dims)
    s.add_argument("--iters", type=int, default=d.iterations)
    s.add_argument("--lr-basis", type=float, default=d.learning_rate_basis)
    s.add_argument("--lr-curves", type=float, default=d.learning_rate_curves)
    s.add_argument("--loss", choices=["smoothl1", "l1", "mse"], default="smoothl1")
    s.add_argument("--beta", type=float, default=0.1, help="smooth-L1 threshold")
    s.add_argument("--downsample-to", type=int, default=d.downsample_to)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("apply", help="apply a parameter file to an image")
    s.add_argument("--input", required=True)
    s.add_argument("--params", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_apply)

    s = sub.add_parser("metrics", help="compare two images")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    for name in ("psnr", "ssim", "mse", "mae", "deltae"):
        s.add_argument(f"--{name}", action="store_true")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("occupancy", help="3D LUT lattice occupancy of an image")
    s.add_argument("--input", required=True)
    s.add_argument("--size", type=int, default=33)
    s.set_defaults(func=cmd_occupancy)

    s = sub.add_parser("synth", help="generate a synthetic target")
    s.add_argument("--input", required=True)
    s.add_argument("--kind", required=True, choices=["hue_rotate", "gamma", "channel_mix", "exposure", "permute"])
    s.add_argument("--angle", type=float, default=30.0)
    s.add_argument("--gamma", type=float, nargs="+")
    s.add_argument("--ev", type=float, default=1.0)
    s.add_argument("--mix", type=float, nargs=9)
    s.add_argument("--perm", default="GBR")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("gradcheck", help="check analytic gradients against finite differences")
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("bench", help="time apply_iac")
    s.add_argument("--input", required=True)
    s.add_argument("--params")
    s.add_argument("--repeat", type=int, default=10)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("lut", help="bake a parameter file into a .cube 3D LUT")
    s.add_argument("--params", required=True)
    s.add_argument("--size", type=int, default=33)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_lut)

    s = sub.add_parser("experiment", help="run a manifest of fits and write a CSV report")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (IacError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
