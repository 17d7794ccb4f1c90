"""Synthetic targets: known color edits applied to an input image."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_image
from .errors import InvalidInputError


def gray_axis_rotation(angle_deg):
    """3x3 rotation about (1, 1, 1) acting on column vectors."""
    theta = np.radians(angle_deg)
    k = np.ones(3) / np.sqrt(3.0)
    cross = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.cos(theta) * np.eye(3) + np.sin(theta) * cross + (1 - np.cos(theta)) * np.outer(k, k)


@dataclass(frozen=True)
class HueRotate:
    angle: float

    def apply(self, img):
        return np.clip(img @ gray_axis_rotation(self.angle).T, 0.0, 1.0)


@dataclass(frozen=True)
class Gamma:
    gamma: tuple

    def __post_init__(self):
        g = np.broadcast_to(np.asarray(self.gamma, dtype=np.float64), (3,))
        if not np.all(np.isfinite(g)) or np.any(g <= 0):
            raise InvalidInputError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "gamma", tuple(float(v) for v in g))

    def apply(self, img):
        return np.clip(img, 0.0, 1.0) ** np.asarray(self.gamma)


@dataclass(frozen=True)
class ChannelMix:
    matrix: tuple

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(m)):
            raise InvalidInputError("channel-mix matrix must be finite")
        object.__setattr__(self, "matrix", tuple(map(float, m.ravel())))

    def apply(self, img):
        return np.clip(img @ np.asarray(self.matrix).reshape(3, 3), 0.0, 1.0)


@dataclass(frozen=True)
class ExposureShift:
    ev: float

    def apply(self, img):
        return np.clip(img * 2.0**self.ev, 0.0, 1.0)


@dataclass(frozen=True)
class Permute:
    """``perm`` names the source channel of each output, e.g. "GBR"."""

    perm: str

    def __post_init__(self):
        p = self.perm.upper()
        if sorted(p) != ["B", "G", "R"]:
            raise InvalidInputError(f"perm must be a permutation of RGB, got {self.perm!r}")
        object.__setattr__(self, "perm", p)

    def apply(self, img):
        return img[..., ["RGB".index(ch) for ch in self.perm]]


KINDS = {
    "hue_rotate": HueRotate,
    "gamma": Gamma,
    "channel_mix": ChannelMix,
    "exposure": ExposureShift,
    "permute": Permute,
}


def make_kind(name, **kwargs):
    try:
        cls = KINDS[name]
    except KeyError:
        raise InvalidInputError(f"unknown synth kind {name!r}; choose from {sorted(KINDS)}") from None
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise InvalidInputError(f"bad parameters for {name}: {exc}") from exc


def synth_target(image, kind, seed=0):
    # every kind is deterministic; seed is accepted so callers can treat kinds uniformly
    del seed
    return kind.apply(as_image(image))
