"""Forward image-adaptive coordinate transform.

Pixels are row vectors ``x = (r, g, b)`` multiplied on the right by a 3x3
basis whose columns are the projection vectors ``n1, n2, n3``::

    t = x @ basis                       # projection
    t_hat = (t - lo) / (hi - lo)        # normalize into [0, 1]
    t_adj = curve_i(t_hat_i)            # per-channel 1D curves
    y = (t_adj * (hi - lo) + lo) @ inv(basis)

``lo``/``hi`` are the exact extrema of each projected channel over the unit
RGB cube, so they depend on the basis only and never on image content.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from .errors import (
    InvalidCurveError,
    InvalidInputError,
    RepairFailedError,
    SingularBasisError,
)

# the bundled TBB is often too old; prefer layers that load cleanly
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

DET_MIN = 1e-6
REPAIR_SIGMA = 1e-3
REPAIR_ATTEMPTS = 10
RANGE_MIN = 1e-4
DEFAULT_CURVE_DIMS = 200


def as_image(image, name="image"):
    """Validate an H x W x 3 raster and return it as contiguous float64."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def as_basis(basis):
    m = np.asarray(basis, dtype=np.float64)
    if m.shape != (3, 3):
        raise InvalidInputError(f"basis must be 3x3, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("basis contains non-finite values")
    return m


def as_curve(curve):
    c = np.asarray(curve, dtype=np.float64)
    if c.ndim != 1 or c.shape[0] < 2:
        raise InvalidCurveError(f"curve needs at least 2 control values, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InvalidCurveError("curve contains non-finite values")
    return c


def as_curves(curves):
    c = np.asarray(curves, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != 3 or c.shape[1] < 2:
        raise InvalidCurveError(f"curves must have shape (3, K) with K >= 2, got {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InvalidCurveError("curves contain non-finite values")
    return np.ascontiguousarray(c)


def identity_curve(k=DEFAULT_CURVE_DIMS):
    if k < 2:
        raise InvalidCurveError(f"curve needs at least 2 control values, got {k}")
    return np.linspace(0.0, 1.0, k)


def identity_curves(k=DEFAULT_CURVE_DIMS):
    return np.tile(identity_curve(k), (3, 1))


@dataclass(frozen=True)
class ChannelBounds:
    lo: np.ndarray
    hi: np.ndarray

    @property
    def span(self):
        return self.hi - self.lo

    def check(self):
        if self.lo.shape != (3,) or self.hi.shape != (3,):
            raise InvalidInputError("bounds must hold 3 values per side")
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
            raise InvalidInputError("bounds contain non-finite values")
        # tolerate the last-ulp loss from symmetric widening
        if np.any(self.span < RANGE_MIN * (1.0 - 1e-9)):
            raise InvalidInputError(f"bounds span below {RANGE_MIN}: {self.span}")
        return self


@dataclass(frozen=True)
class Projected:
    """Projected pixels; ``normalized`` tells whether values are t or t_hat."""

    data: np.ndarray
    normalized: bool


def compute_bounds(basis):
    """Per-channel extrema of ``t_i = x . n_i`` over the unit RGB cube.

    The minimum of a linear form over [0, 1]^3 picks x = 0 where the
    coefficient is positive and x = 1 where it is negative, hence the sign
    split. Spans narrower than ``RANGE_MIN`` are widened about their center.
    """
    m = as_basis(basis)
    lo = np.minimum(m, 0.0).sum(axis=0)
    hi = np.maximum(m, 0.0).sum(axis=0)
    narrow = (hi - lo) < RANGE_MIN
    if np.any(narrow):
        center = 0.5 * (lo + hi)
        lo = np.where(narrow, center - 0.5 * RANGE_MIN, lo)
        hi = np.where(narrow, center + 0.5 * RANGE_MIN, hi)
    return ChannelBounds(lo, hi)


def check_invertible(basis):
    m = as_basis(basis)
    det = np.linalg.det(m)
    if not abs(det) >= DET_MIN:
        raise SingularBasisError(f"|det(basis)| = {abs(det):.3e} is below {DET_MIN}")
    return m


@dataclass
class IacParams:
    """Basis, three curves and the bounds derived from the basis."""

    basis: np.ndarray
    curves: np.ndarray
    bounds: ChannelBounds = field(init=False, repr=False)

    def __post_init__(self):
        self.basis = check_invertible(self.basis)
        self.curves = as_curves(self.curves)
        if np.any(self.curves < 0.0) or np.any(self.curves > 1.0):
            raise InvalidCurveError("curve control values must lie in [0, 1]")
        self.bounds = compute_bounds(self.basis)

    @classmethod
    def identity(cls, curve_dims=DEFAULT_CURVE_DIMS):
        return cls(np.eye(3), identity_curves(curve_dims))

    @property
    def curve_dims(self):
        return self.curves.shape[1]

    def copy(self):
        return IacParams(self.basis.copy(), self.curves.copy())


def project(image, basis):
    img = as_image(image)
    m = as_basis(basis)
    return Projected(img @ m, normalized=False)


def normalize(proj, bounds):
    if proj.normalized:
        raise InvalidInputError("projection is already normalized")
    bounds.check()
    t_hat = (proj.data - bounds.lo) / bounds.span
    return Projected(np.clip(t_hat, 0.0, 1.0), normalized=True)


def denormalize(proj, bounds):
    if not proj.normalized:
        raise InvalidInputError("projection is not normalized")
    bounds.check()
    return Projected(proj.data * bounds.span + bounds.lo, normalized=False)


def _curve_lookup(values, t):
    k = values.shape[0]
    u = np.clip(t, 0.0, 1.0) * (k - 1)
    j = np.minimum(u.astype(np.intp), k - 2)
    f = u - j
    return (1.0 - f) * values[j] + f * values[j + 1]


def curve_eval(curve, t):
    """Piecewise-linear lookup of ``t`` (scalar or array) in ``curve``.

    Inputs outside [0, 1] are clamped first. At an interior knot the
    right-hand segment is used; ``t = 1`` lands on the last control value.
    """
    values = as_curve(curve)
    scalar = np.ndim(t) == 0
    out = _curve_lookup(values, np.asarray(t, dtype=np.float64))
    return float(out) if scalar else out


def apply_curves(proj, curves):
    if not proj.normalized:
        raise InvalidInputError("curves expect a normalized projection")
    c = as_curves(curves)
    out = np.empty_like(proj.data)
    for i in range(3):
        out[..., i] = _curve_lookup(c[i], proj.data[..., i])
    return Projected(out, normalized=True)


def invert_basis(basis):
    m = check_invertible(basis)
    return np.linalg.inv(m)


def inverse_project(proj, basis, clamp=False):
    if proj.normalized:
        raise InvalidInputError("inverse projection expects denormalized values")
    out = proj.data @ invert_basis(basis)
    return np.clip(out, 0.0, 1.0) if clamp else out


def apply_iac_staged(image, params, clamp=True):
    """apply_iac written as the explicit chain of stage functions."""
    b = params.bounds
    p = normalize(project(image, params.basis), b)
    p = denormalize(apply_curves(p, params.curves), b)
    return inverse_project(p, params.basis, clamp=clamp)


@njit(cache=True, inline="always")
def _lookup(curves, c, u, scale, last):
    if u < 0.0:
        u = 0.0
    elif u > 1.0:
        u = 1.0
    x = u * scale
    j = int(x)
    if j > last:
        j = last
    f = x - j
    return (1.0 - f) * curves[c, j] + f * curves[c, j + 1]


@njit(cache=True, parallel=True)
def _iac_kernel(pixels, m, minv, lo, span, curves, clamp, out):
    n = pixels.shape[0]
    scale = curves.shape[1] - 1
    last = curves.shape[1] - 2
    inv0 = 1.0 / span[0]
    inv1 = 1.0 / span[1]
    inv2 = 1.0 / span[2]
    for p in prange(n):
        r = pixels[p, 0]
        g = pixels[p, 1]
        b = pixels[p, 2]
        t0 = (r * m[0, 0] + g * m[1, 0] + b * m[2, 0] - lo[0]) * inv0
        t1 = (r * m[0, 1] + g * m[1, 1] + b * m[2, 1] - lo[1]) * inv1
        t2 = (r * m[0, 2] + g * m[1, 2] + b * m[2, 2] - lo[2]) * inv2
        w0 = _lookup(curves, 0, t0, scale, last) * span[0] + lo[0]
        w1 = _lookup(curves, 1, t1, scale, last) * span[1] + lo[1]
        w2 = _lookup(curves, 2, t2, scale, last) * span[2] + lo[2]
        for c in range(3):
            y = w0 * minv[0, c] + w1 * minv[1, c] + w2 * minv[2, c]
            if clamp:
                y = min(max(y, 0.0), 1.0)
            out[p, c] = y


def apply_iac(image, params, clamp=True):
    """Apply the full transform to an image.

    ``clamp=True`` clips the RGB result to [0, 1]; fitting calls it with
    ``clamp=False`` so losses see the raw output.
    """
    img = as_image(image)
    h, w, _ = img.shape
    minv = invert_basis(params.basis)
    b = params.bounds
    out = np.empty((h * w, 3))
    _iac_kernel(
        img.reshape(-1, 3),
        np.ascontiguousarray(params.basis),
        np.ascontiguousarray(minv),
        np.ascontiguousarray(b.lo),
        np.ascontiguousarray(b.span),
        params.curves,
        clamp,
        out,
    )
    return out.reshape(h, w, 3)


def repair_rank(basis, seed):
    """Jitter a near-singular basis until ``|det| >= DET_MIN``.

    Invertible input is returned unchanged. Otherwise uniform noise in
    ``[-REPAIR_SIGMA, REPAIR_SIGMA]`` is added to every entry, cumulatively,
    for up to ``REPAIR_ATTEMPTS`` tries.
    """
    m = as_basis(basis)
    if abs(np.linalg.det(m)) >= DET_MIN:
        return m
    rng = np.random.default_rng(seed)
    m = m.copy()
    for _ in range(REPAIR_ATTEMPTS):
        m = m + rng.uniform(-REPAIR_SIGMA, REPAIR_SIGMA, size=(3, 3))
        if abs(np.linalg.det(m)) >= DET_MIN:
            return m
    raise RepairFailedError(
        f"basis still singular after {REPAIR_ATTEMPTS} repair attempts "
        f"(|det| = {abs(np.linalg.det(m)):.3e})"
    )
