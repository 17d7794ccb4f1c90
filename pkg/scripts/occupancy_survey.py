"""Fraction of a 3D LUT lattice touched by natural photographs.

    python scripts/occupancy_survey.py [--images a.png b.png] [--sizes 17 33 65]
"""
import argparse

from _photos import load_photos
from iac.baselines import lut3d_identity, lut_occupancy


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--images", nargs="*")
    p.add_argument("--sizes", type=int, nargs="+", default=[17, 33, 65])
    args = p.parse_args()

    photos = load_photos(args.images, max_edge=None)
    print("image".ljust(24) + "".join(f"n={n:<8d}" for n in args.sizes))
    for name, img in photos:
        print(name.ljust(24) + "".join(f"{100 * lut_occupancy(img, n):<10.2f}" for n in args.sizes))
    # sanity row: an image holding every lattice color uses the whole table
    row = []
    for n in args.sizes:
        lattice = lut3d_identity(n).grid.reshape(n * n, n, 3)
        row.append(100 * lut_occupancy(lattice, n))
    print("all-lattice".ljust(24) + "".join(f"{v:<10.2f}" for v in row))
    print("(percent of n^3 vertices that are a corner of some pixel's cell)")


if __name__ == "__main__":
    main()
