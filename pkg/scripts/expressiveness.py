"""IAC vs per-channel RGB curves on edits that do and do not mix channels.

    python scripts/expressiveness.py --angles 15 30 60
"""
import argparse

from _photos import load_photos
from iac.fit import FitConfig, fit_iac, fit_rgb_only
from iac.io import to_bytes
from iac.synth import Gamma, HueRotate, Permute


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--images", nargs="*")
    p.add_argument("--angles", type=float, nargs="+", default=[30.0])
    p.add_argument("--gamma", type=float, nargs=3, default=[0.8, 1.0, 1.25])
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--lr-basis", type=float, default=FitConfig().learning_rate_basis)
    args = p.parse_args()

    edits = [(f"hue{a:g}", HueRotate(a)) for a in args.angles]
    edits += [("gamma", Gamma(tuple(args.gamma))), ("swap-RB", Permute("BGR"))]
    cfg = FitConfig(iterations=args.iters, learning_rate_basis=args.lr_basis)
    print(f"{'image':24s} {'edit':10s} {'iac dB':>8s} {'rgb dB':>8s} {'gap':>7s}")
    for name, x in load_photos(args.images):
        for label, edit in edits:
            y = to_bytes(edit.apply(x)) / 255.0
            _, a = fit_iac(x, y, cfg)
            _, b = fit_rgb_only(x, y, cfg)
            print(f"{name:24s} {label:10s} {a.final_psnr:8.2f} {b.final_psnr:8.2f} {a.final_psnr - b.final_psnr:+7.2f}")


if __name__ == "__main__":
    main()
