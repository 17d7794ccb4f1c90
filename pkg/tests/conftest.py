import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

PHOTOS = ("astronaut", "coffee", "chelsea", "rocket", "immunohistochemistry")


def random_basis(rng, spread=0.4, max_cond=20.0):
    while True:
        m = np.eye(3) + spread * rng.uniform(-1, 1, (3, 3))
        if np.linalg.cond(m) < max_cond:
            return m


def photo(name, max_edge=256):
    """A bundled scikit-image photograph, box-downsampled and quantized to 8 bits."""
    from skimage import data

    from iac.fit import downsample
    from iac.io import to_bytes

    img = getattr(data, name)() / 255.0
    return to_bytes(downsample(img, max_edge)) / 255.0


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
