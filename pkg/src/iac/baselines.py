"""Comparison transforms: per-channel RGB curves and 3D LUTs."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import _curve_lookup, as_curves, as_image
from .errors import DecodeError, InvalidInputError


def apply_rgb_curves(image, curves):
    """Map R, G and B independently through ``curves[0..2]``."""
    img = as_image(image)
    c = as_curves(curves)
    out = np.empty_like(img)
    for i in range(3):
        out[..., i] = _curve_lookup(c[i], img[..., i])
    return out


@dataclass
class Lut3d:
    """Lattice of output colors; ``grid[i, j, k]`` is the output at (R, G, B) = (i, j, k) / (n - 1)."""

    grid: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        if g.ndim != 4 or g.shape[3] != 3 or not (g.shape[0] == g.shape[1] == g.shape[2]):
            raise InvalidInputError(f"LUT grid must have shape (n, n, n, 3), got {g.shape}")
        if g.shape[0] < 2:
            raise InvalidInputError("LUT needs at least 2 points per axis")
        if not np.all(np.isfinite(g)):
            raise InvalidInputError("LUT contains non-finite entries")
        self.grid = np.ascontiguousarray(g)

    @property
    def n(self):
        return self.grid.shape[0]

    @classmethod
    def from_function(cls, fn, n=33):
        """Sample ``fn`` (an H x W x 3 -> H x W x 3 map) on the lattice."""
        lattice = lut3d_identity(n).grid
        return cls(fn(lattice.reshape(n * n, n, 3)).reshape(n, n, n, 3))


def lut3d_identity(n):
    if n < 2:
        raise InvalidInputError(f"LUT size must be >= 2, got {n}")
    axis = np.arange(n) / (n - 1)
    r, g, b = np.meshgrid(axis, axis, axis, indexing="ij")
    return Lut3d(np.stack([r, g, b], axis=-1))


def _cell_coords(pixels, n):
    # pixels at exactly 1.0 fall into the last cell
    x = np.clip(pixels, 0.0, 1.0) * (n - 1)
    i0 = np.minimum(x.astype(np.intp), n - 2)
    return i0, x - i0


def lut3d_trilinear(image, lut):
    img = as_image(image)
    n = lut.n
    px = img.reshape(-1, 3)
    i0, f = _cell_coords(px, n)
    flat = lut.grid.reshape(-1, 3)
    base = (i0[:, 0] * n + i0[:, 1]) * n + i0[:, 2]
    fr, fg, fb = f[:, 0:1], f[:, 1:2], f[:, 2:3]
    out = np.zeros_like(px)
    for dr, wr in ((0, 1.0 - fr), (1, fr)):
        for dg, wg in ((0, 1.0 - fg), (1, fg)):
            for db, wb in ((0, 1.0 - fb), (1, fb)):
                out += (wr * wg * wb) * flat[base + (dr * n + dg) * n + db]
    return out.reshape(img.shape)


def lut_occupancy(image, n=33):
    """Fraction of lattice vertices read by trilinear lookups of ``image``.

    A vertex counts once it is a corner of at least one pixel's enclosing
    cell, i.e. it contributes to some interpolated output.
    """
    if n < 2:
        raise InvalidInputError(f"LUT size must be >= 2, got {n}")
    img = as_image(image)
    i0, _ = _cell_coords(img.reshape(-1, 3), n)
    cells = np.unique((i0[:, 0] * n + i0[:, 1]) * n + i0[:, 2])
    corners = [cells + (dr * n + dg) * n + db for dr in (0, 1) for dg in (0, 1) for db in (0, 1)]
    used = np.unique(np.concatenate(corners))
    return used.size / n**3


def write_cube(lut, path, title=None):
    """Write ``lut`` as a .cube table (red index varies fastest)."""
    lines = []
    if title:
        lines.append(f'TITLE "{title}"')
    lines.append(f"LUT_3D_SIZE {lut.n}")
    lines.append("DOMAIN_MIN 0.0 0.0 0.0")
    lines.append("DOMAIN_MAX 1.0 1.0 1.0")
    rows = lut.grid.transpose(2, 1, 0, 3).reshape(-1, 3)
    lines.extend(f"{r:.9g} {g:.9g} {b:.9g}" for r, g, b in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def read_cube(path):
    size = None
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key = line.split()[0]
        if key == "TITLE":
            continue
        if key == "LUT_3D_SIZE":
            size = int(line.split()[1])
            continue
        if key == "LUT_1D_SIZE":
            raise DecodeError(f"{path}: 1D cube tables are not supported")
        if key in ("DOMAIN_MIN", "DOMAIN_MAX"):
            vals = [float(v) for v in line.split()[1:]]
            want = [0.0] * 3 if key == "DOMAIN_MIN" else [1.0] * 3
            if vals != want:
                raise DecodeError(f"{path}:{lineno}: only the unit domain is supported")
            continue
        try:
            rows.append([float(v) for v in line.split()])
        except ValueError as exc:
            raise DecodeError(f"{path}:{lineno}: cannot parse {raw!r}") from exc
    if size is None:
        raise DecodeError(f"{path}: missing LUT_3D_SIZE")
    data = np.asarray(rows, dtype=np.float64)
    if data.shape != (size**3, 3):
        raise DecodeError(f"{path}: expected {size**3} rows of 3 values, got {data.shape}")
    return Lut3d(data.reshape(size, size, size, 3).transpose(2, 1, 0, 3))
