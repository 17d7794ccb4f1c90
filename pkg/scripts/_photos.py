"""Shared image loading for the experiment scripts."""
from pathlib import Path

from iac.fit import downsample
from iac.io import load_image, to_bytes

BUNDLED = ("astronaut", "coffee", "chelsea", "rocket", "immunohistochemistry")


def load_photos(paths=None, max_edge=256):
    """(name, image) pairs from files, or from scikit-image's bundled photos."""
    if paths:
        items = [(Path(p).stem, load_image(p)) for p in paths]
    else:
        from skimage import data

        items = [(n, getattr(data, n)() / 255.0) for n in BUNDLED]
    if max_edge:
        items = [(n, to_bytes(downsample(img, max_edge)) / 255.0) for n, img in items]
    return items
