"""Recover randomly drawn IAC transforms from (input, transformed input) pairs.

    python scripts/self_consistency.py --seeds 0 1 --iters 1000
"""
import argparse

import numpy as np

from _photos import load_photos
from iac.core import IacParams, apply_iac
from iac.fit import FitConfig, fit_iac
from iac.io import to_bytes


def random_transform(rng, k=200, spread=0.3, max_cond=20.0):
    while True:
        m = np.eye(3) + spread * rng.uniform(-1, 1, (3, 3))
        if np.linalg.cond(m) < max_cond:
            break
    gammas = rng.uniform(0.6, 1.6, 3)
    return IacParams(m, np.linspace(0, 1, k)[None, :] ** gammas[:, None])


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--images", nargs="*")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1])
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--max-edge", type=int, default=256)
    args = p.parse_args()

    psnrs = []
    for name, x in load_photos(args.images, args.max_edge):
        for seed in args.seeds:
            gen = random_transform(np.random.default_rng(100 + seed))
            y = to_bytes(apply_iac(x, gen)) / 255.0
            params, rep = fit_iac(x, y, FitConfig(iterations=args.iters, seed=seed))
            err = np.abs(params.basis - gen.basis).max()
            psnrs.append(rep.final_psnr)
            print(f"{name:24s} seed {seed}  psnr {rep.final_psnr:6.2f} dB  ssim {rep.final_ssim:.4f}  "
                  f"max|basis err| {err:.3f}  {rep.wall_time:.1f} s")
    psnrs = np.array(psnrs)
    print(f"{(psnrs >= 40).sum()}/{psnrs.size} pairs at >= 40 dB, median {np.median(psnrs):.2f} dB")


if __name__ == "__main__":
    main()
