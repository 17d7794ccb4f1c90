"""Per-image fitting of IacParams against a target image.

Gradients are derived by hand through projection, normalization, curve
lookup, denormalization and inverse projection; ``grad_fd`` is the
finite-difference oracle used to check them.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .core import (
    DET_MIN,
    RANGE_MIN,
    IacParams,
    apply_iac,
    as_image,
    check_invertible,
    compute_bounds,
    identity_curves,
    repair_rank,
)
from .errors import DivergedError, InvalidInputError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class LossKind:
    name: str = "smoothl1"
    beta: float = 0.1

    def __post_init__(self):
        if self.name not in ("smoothl1", "l1", "mse"):
            raise InvalidInputError(f"unknown loss {self.name!r}")
        if not self.beta > 0:
            raise InvalidInputError("smooth-L1 beta must be positive")


@dataclass
class FitConfig:
    iterations: int = 1000
    learning_rate_basis: float = 1e-3
    learning_rate_curves: float = 5e-3
    loss: LossKind = field(default_factory=LossKind)
    curve_dims: int = 200
    rgb_only: bool = False
    seed: int = 0
    downsample_to: int = 256

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidInputError("iterations must be >= 1")
        if not (self.learning_rate_basis > 0 and self.learning_rate_curves > 0):
            raise InvalidInputError("learning rates must be positive")
        if self.curve_dims < 2:
            raise InvalidInputError("curve_dims must be >= 2")
        if self.downsample_to < 1:
            raise InvalidInputError("downsample_to must be >= 1")


@dataclass
class Gradients:
    d_basis: np.ndarray
    d_curves: np.ndarray


@dataclass
class AdamState:
    m_basis: np.ndarray
    v_basis: np.ndarray
    m_curves: np.ndarray
    v_curves: np.ndarray
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    seed: int = 0
    repairs: int = 0

    @classmethod
    def zeros(cls, params, seed=0):
        return cls(
            np.zeros((3, 3)),
            np.zeros((3, 3)),
            np.zeros_like(params.curves),
            np.zeros_like(params.curves),
            seed=seed,
        )


@dataclass
class FitReport:
    loss_history: list
    final_loss: float
    final_psnr: float
    final_ssim: float
    iterations_run: int
    wall_time: float
    repaired_rank_count: int
    condition_number: float


def _check_pair(pred, target):
    if pred.shape != target.shape:
        raise InvalidInputError(f"shape mismatch: {pred.shape} vs {target.shape}")


def _loss_and_grad(d, kind):
    """Mean loss over all residuals ``d`` and its derivative per residual."""
    n = d.size
    if kind.name == "mse":
        return float(np.mean(d * d)), 2.0 * d / n
    a = np.abs(d)
    if kind.name == "l1":
        return float(np.mean(a)), np.sign(d) / n
    small = a < kind.beta
    val = np.where(small, 0.5 * d * d / kind.beta, a - 0.5 * kind.beta)
    grad = np.where(small, d / kind.beta, np.sign(d))
    return float(np.mean(val)), grad / n


def loss_eval(pred, target, kind=LossKind()):
    pred = as_image(pred, "pred")
    target = as_image(target, "target")
    _check_pair(pred, target)
    return _loss_and_grad(pred - target, kind)[0]


_LOSS_CODES = {"smoothl1": 0, "l1": 1, "mse": 2}


@njit(cache=True, inline="always")
def _channel_forward(curves, c, t, lo, span, scale):
    u = (t - lo) / span
    live = 1.0
    if u < 0.0:
        u = 0.0
        live = 0.0
    elif u > 1.0:
        u = 1.0
        live = 0.0
    s = u * scale
    j = int(s)
    if j > scale - 1:
        j = scale - 1
    f = s - j
    c0 = curves[c, j]
    c1 = curves[c, j + 1]
    return j, f, u, (1.0 - f) * c0 + f * c1, (c1 - c0) * scale * live


@njit(cache=True, inline="always")
def _residual_grad(d, code, beta):
    ad = abs(d)
    if code == 2:
        return d * d, 2.0 * d
    if code == 1:
        return ad, np.sign(d)
    if ad < beta:
        return 0.5 * d * d / beta, d / beta
    return ad - 0.5 * beta, np.sign(d)


@njit(cache=True, inline="always")
def _channel_backward(gw, c, j, f, u, v, slope, span, g_curves, g_lo, g_span):
    gv = gw * span
    g_span[c] += gw * v
    g_lo[c] += gw
    g_curves[c, j] += gv * (1.0 - f)
    g_curves[c, j + 1] += gv * f
    # slope is zero wherever u was clamped, so u is the raw normalized value here
    gt = gv * slope / span
    g_lo[c] -= gt
    g_span[c] -= gt * u
    return gt


@njit(cache=True)
def _backward_kernel(x, tgt, m, minv, lo, span, curves, code, beta, g_curves, g_minv, g_m, g_lo, g_span):
    n = x.shape[0]
    scale = curves.shape[1] - 1
    inv_n = 1.0 / (3 * n)
    total = 0.0
    for p in range(n):
        r = x[p, 0]
        g = x[p, 1]
        b = x[p, 2]
        j0, f0, u0, v0, s0 = _channel_forward(
            curves, 0, r * m[0, 0] + g * m[1, 0] + b * m[2, 0], lo[0], span[0], scale
        )
        j1, f1, u1, v1, s1 = _channel_forward(
            curves, 1, r * m[0, 1] + g * m[1, 1] + b * m[2, 1], lo[1], span[1], scale
        )
        j2, f2, u2, v2, s2 = _channel_forward(
            curves, 2, r * m[0, 2] + g * m[1, 2] + b * m[2, 2], lo[2], span[2], scale
        )
        w0 = v0 * span[0] + lo[0]
        w1 = v1 * span[1] + lo[1]
        w2 = v2 * span[2] + lo[2]
        gw0 = 0.0
        gw1 = 0.0
        gw2 = 0.0
        for c in range(3):
            y = w0 * minv[0, c] + w1 * minv[1, c] + w2 * minv[2, c]
            val, gd = _residual_grad(y - tgt[p, c], code, beta)
            total += val
            gd *= inv_n
            g_minv[0, c] += w0 * gd
            g_minv[1, c] += w1 * gd
            g_minv[2, c] += w2 * gd
            gw0 += gd * minv[0, c]
            gw1 += gd * minv[1, c]
            gw2 += gd * minv[2, c]
        gt0 = _channel_backward(gw0, 0, j0, f0, u0, v0, s0, span[0], g_curves, g_lo, g_span)
        gt1 = _channel_backward(gw1, 1, j1, f1, u1, v1, s1, span[1], g_curves, g_lo, g_span)
        gt2 = _channel_backward(gw2, 2, j2, f2, u2, v2, s2, span[2], g_curves, g_lo, g_span)
        g_m[0, 0] += r * gt0
        g_m[1, 0] += g * gt0
        g_m[2, 0] += b * gt0
        g_m[0, 1] += r * gt1
        g_m[1, 1] += g * gt1
        g_m[2, 1] += b * gt1
        g_m[0, 2] += r * gt2
        g_m[1, 2] += g * gt2
        g_m[2, 2] += b * gt2
    return total * inv_n


def backward(params, image, target, kind=LossKind(), rgb_only=False):
    """Loss of the unclamped transform output and its exact gradients.

    Curves are piecewise linear (right-hand segment at knots); the sign
    pattern of the basis that defines the normalization bounds is held
    fixed for the pass. With ``rgb_only`` the basis gradient is reported
    as zeros.
    """
    img = as_image(image)
    tgt = as_image(target, "target")
    _check_pair(img, tgt)
    m = check_invertible(params.basis)
    curves = params.curves
    minv = np.linalg.inv(m)

    neg = (m < 0.0).astype(np.float64)
    sgn = np.sign(m)
    lo = np.minimum(m, 0.0).sum(axis=0)
    span = np.abs(m).sum(axis=0)
    dlo_dm = neg
    dspan_dm = sgn
    narrow = span < RANGE_MIN
    if np.any(narrow):
        # widened span is constant; only its center moves with the basis
        lo = np.where(narrow, lo + 0.5 * span - 0.5 * RANGE_MIN, lo)
        span = np.where(narrow, RANGE_MIN, span)
        dlo_dm = np.where(narrow, neg + 0.5 * sgn, neg)
        dspan_dm = np.where(narrow, 0.0, sgn)

    g_curves = np.zeros_like(curves)
    g_minv = np.zeros((3, 3))
    g_m = np.zeros((3, 3))
    g_lo = np.zeros(3)
    g_span = np.zeros(3)
    loss = _backward_kernel(
        img.reshape(-1, 3),
        tgt.reshape(-1, 3),
        m,
        minv,
        lo,
        span,
        curves,
        _LOSS_CODES[kind.name],
        kind.beta,
        g_curves,
        g_minv,
        g_m,
        g_lo,
        g_span,
    )
    if rgb_only:
        return loss, Gradients(np.zeros((3, 3)), g_curves)
    # d(M^-1) = -M^-1 dM M^-1
    g_m += -minv.T @ g_minv @ minv.T
    g_m += g_lo * dlo_dm + g_span * dspan_dm
    return loss, Gradients(g_m, g_curves)


def _raw_params(basis, curves):
    # finite-difference probes may push curve values slightly outside [0, 1]
    p = IacParams.__new__(IacParams)
    p.basis = check_invertible(basis)
    p.curves = np.ascontiguousarray(curves, dtype=np.float64)
    p.bounds = compute_bounds(p.basis)
    return p


def grad_fd(params, image, target, kind=LossKind(), h=1e-5):
    """Central finite differences of the loss w.r.t. every parameter."""
    if not h > 0:
        raise InvalidInputError("step h must be positive")
    img = as_image(image)
    tgt = as_image(target, "target")
    _check_pair(img, tgt)

    def loss_at(basis, curves):
        return loss_eval(apply_iac(img, _raw_params(basis, curves), clamp=False), tgt, kind)

    basis = params.basis.copy()
    curves = params.curves.copy()
    d_basis = np.zeros((3, 3))
    for idx in np.ndindex(3, 3):
        orig = basis[idx]
        basis[idx] = orig + h
        up = loss_at(basis, curves)
        basis[idx] = orig - h
        down = loss_at(basis, curves)
        basis[idx] = orig
        d_basis[idx] = (up - down) / (2 * h)
    d_curves = np.zeros_like(curves)
    for idx in np.ndindex(*curves.shape):
        orig = curves[idx]
        curves[idx] = orig + h
        up = loss_at(basis, curves)
        curves[idx] = orig - h
        down = loss_at(basis, curves)
        curves[idx] = orig
        d_curves[idx] = (up - down) / (2 * h)
    return Gradients(d_basis, d_curves)


def adam_update(param, grad, m, v, step, lr, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
    """One bias-corrected Adam update; ``step`` counts from 1. Returns (param, m, v)."""
    m = beta1 * m + (1.0 - beta1) * grad
    v = beta2 * v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


def adam_step(state, grads, params, lr_basis, lr_curves, rgb_only=False):
    """Projected Adam step on basis and curves; returns (state, params).

    A basis that drifts below the invertibility threshold is rank-repaired,
    and curve values are clipped back into [0, 1].
    """
    if not (np.all(np.isfinite(grads.d_basis)) and np.all(np.isfinite(grads.d_curves))):
        raise DivergedError("non-finite gradients", iteration=state.step)
    step = state.step + 1
    b = dict(beta1=state.beta1, beta2=state.beta2, eps=state.eps)
    curves, m_c, v_c = adam_update(
        params.curves, grads.d_curves, state.m_curves, state.v_curves, step, lr_curves, **b
    )
    curves = np.clip(curves, 0.0, 1.0)
    repairs = state.repairs
    if rgb_only:
        basis, m_b, v_b = params.basis, state.m_basis, state.v_basis
    else:
        basis, m_b, v_b = adam_update(
            params.basis, grads.d_basis, state.m_basis, state.v_basis, step, lr_basis, **b
        )
        if not abs(np.linalg.det(basis)) >= DET_MIN:
            basis = repair_rank(basis, seed=state.seed * 1_000_003 + step)
            repairs += 1
    new_state = replace(
        state, m_basis=m_b, v_basis=v_b, m_curves=m_c, v_curves=v_c, step=step, repairs=repairs
    )
    return new_state, IacParams(basis, curves)


def downsample(image, max_edge):
    """Box-average ``image`` by the smallest integer factor bringing its longer edge to <= max_edge."""
    img = as_image(image)
    h, w, _ = img.shape
    factor = math.ceil(max(h, w) / max_edge)
    if factor <= 1:
        return img
    hh, ww = h // factor, w // factor
    if hh < 1 or ww < 1:
        raise InvalidInputError(f"image {h}x{w} too small to downsample by {factor}")
    crop = img[: hh * factor, : ww * factor]
    return crop.reshape(hh, factor, ww, factor, 3).mean(axis=(1, 3))


def fit_iac(image, target, config=None, init=None):
    """Fit basis and curves so that apply_iac(image) approximates target.

    Starts from ``init`` or from the identity transform. Optimization runs on
    box-downsampled copies; the reported PSNR/SSIM are measured on the
    full-resolution clamped output.
    """
    from .metrics import psnr, ssim

    config = config or FitConfig()
    img = as_image(image)
    tgt = as_image(target, "target")
    _check_pair(img, tgt)
    small_x = downsample(img, config.downsample_to)
    small_y = downsample(tgt, config.downsample_to)

    if init is None:
        params = IacParams(np.eye(3), identity_curves(config.curve_dims))
    else:
        params = init.copy()
        if config.rgb_only:
            params = IacParams(np.eye(3), params.curves)
    state = AdamState.zeros(params, seed=config.seed)

    history = []
    start = time.perf_counter()
    for it in range(config.iterations):
        loss, grads = backward(params, small_x, small_y, config.loss, rgb_only=config.rgb_only)
        if not math.isfinite(loss):
            raise DivergedError(f"loss became non-finite at iteration {it}", iteration=it)
        history.append(loss)
        state, params = adam_step(
            state,
            grads,
            params,
            config.learning_rate_basis,
            config.learning_rate_curves,
            rgb_only=config.rgb_only,
        )
    final_loss = loss_eval(apply_iac(small_x, params, clamp=False), small_y, config.loss)
    wall = time.perf_counter() - start

    pred = apply_iac(img, params, clamp=True)
    target_c = np.clip(tgt, 0.0, 1.0)
    final_ssim = ssim(pred, target_c) if min(img.shape[:2]) >= 11 else float("nan")
    report = FitReport(
        loss_history=history,
        final_loss=final_loss,
        final_psnr=psnr(pred, target_c),
        final_ssim=final_ssim,
        iterations_run=len(history),
        wall_time=wall,
        repaired_rank_count=state.repairs,
        condition_number=float(np.linalg.cond(params.basis)),
    )
    return params, report


def fit_rgb_only(image, target, config=None, init=None):
    """fit_iac with the basis frozen at identity (per-channel RGB curves)."""
    config = replace(config or FitConfig(), rgb_only=True)
    return fit_iac(image, target, config, init=init)


@dataclass
class GradCheckResult:
    curve_dims: int
    loss: str
    max_rel_error: float
    max_abs_error_small: float
    passed: bool


def _near_kinks(params, image, target, kind, margin):
    """True if any pixel sits within ``margin`` of a curve knot, a clamp
    edge, or a kink of the loss, where finite differences are unreliable."""
    k = params.curve_dims
    t = image.reshape(-1, 3) @ params.basis
    u = (t - params.bounds.lo) / params.bounds.span
    knots = np.abs(u * (k - 1) - np.round(u * (k - 1))) / (k - 1)
    if np.any(knots < margin):
        return True
    if np.any(np.abs(params.basis) < margin):
        return True
    d = np.abs(apply_iac(image, params, clamp=False) - target)
    edge = kind.beta if kind.name == "smoothl1" else 0.0
    return kind.name != "mse" and bool(np.any(np.abs(d - edge) < margin))


def gradient_check(trials=20, seed=0, size=8, h=1e-5, rtol=1e-4, atol=1e-7, margin=1e-4):
    """Compare ``backward`` with ``grad_fd`` on random instances.

    Each instance draws a basis near identity, random curves with K cycling
    through 8/16/32 and a loss cycling through smooth-L1/L1/MSE. Instances
    that land within ``margin`` of a kink are redrawn. Components with
    magnitude above 1e-6 must agree to ``rtol``; smaller ones to ``atol``.
    """
    rng = np.random.default_rng(seed)
    kinds = (LossKind("smoothl1"), LossKind("l1"), LossKind("mse"))
    results = []
    while len(results) < trials:
        i = len(results)
        k = (8, 16, 32)[i % 3]
        kind = kinds[(i // 3) % 3]
        basis = np.eye(3) + 0.5 * rng.uniform(-1, 1, (3, 3))
        if np.linalg.cond(basis) > 50:
            continue
        params = IacParams(basis, rng.uniform(0.05, 0.95, (3, k)))
        image = rng.uniform(size=(size, size, 3))
        target = rng.uniform(size=(size, size, 3))
        if _near_kinks(params, image, target, kind, margin):
            continue
        _, g = backward(params, image, target, kind)
        fd = grad_fd(params, image, target, kind, h)
        a = np.concatenate([g.d_basis.ravel(), g.d_curves.ravel()])
        b = np.concatenate([fd.d_basis.ravel(), fd.d_curves.ravel()])
        scale = np.maximum(np.abs(a), np.abs(b))
        big = scale > 1e-6
        rel = float(np.max(np.abs(a - b)[big] / scale[big])) if big.any() else 0.0
        small = float(np.max(np.abs(a - b)[~big])) if (~big).any() else 0.0
        results.append(GradCheckResult(k, kind.name, rel, small, rel <= rtol and small <= atol))
    return results
