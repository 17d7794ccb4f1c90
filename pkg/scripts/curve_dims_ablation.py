"""Fitting PSNR as a function of the number of curve control points K.

Targets apply finely rippled tone curves (identity basis), so the score is
limited by how well K knots can follow the ripple.

    python scripts/curve_dims_ablation.py --dims 25 50 100 150 200 400
"""
import argparse

import numpy as np

from _photos import load_photos
from iac.core import IacParams, apply_iac
from iac.fit import FitConfig, fit_iac

RIPPLES = [(0.9, 20), (1.1, 25), (1.0, 30)]


def ripple_curves(n=4001, amplitude=0.02):
    t = np.linspace(0.0, 1.0, n)
    return np.stack([np.clip(t**g + amplitude * np.sin(2 * np.pi * c * t), 0, 1) for g, c in RIPPLES])


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--images", nargs="*")
    p.add_argument("--dims", type=int, nargs="+", default=[50, 100, 150, 200])
    p.add_argument("--amplitude", type=float, default=0.02)
    p.add_argument("--iters", type=int, default=1000)
    args = p.parse_args()

    gen = IacParams(np.eye(3), ripple_curves(amplitude=args.amplitude))
    print("image".ljust(24) + "".join(f"K={k:<7d}" for k in args.dims))
    for name, x in load_photos(args.images):
        y = apply_iac(x, gen)
        scores = [fit_iac(x, y, FitConfig(curve_dims=k, iterations=args.iters))[1].final_psnr for k in args.dims]
        print(name.ljust(24) + "".join(f"{s:<9.2f}" for s in scores))


if __name__ == "__main__":
    main()
