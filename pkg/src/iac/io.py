"""Image and parameter-file persistence."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import IacParams, as_image
from .errors import DecodeError, ParamsFormatError, SingularBasisError

PARAMS_FORMAT = "iac-params"
PARAMS_VERSION = 1

_FORMATS = {".png": "PNG", ".ppm": "PPM", ".pnm": "PPM"}


def load_image(path):
    """Read an 8-bit RGB PNG or binary PPM into floats ``byte / 255``."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            fmt, mode, info = im.format, im.mode, dict(im.info)
            if fmt not in ("PNG", "PPM"):
                raise DecodeError(f"{path}: unsupported format {fmt}")
            if mode in ("RGBA", "LA", "PA") or (mode == "P" and "transparency" in info):
                raise DecodeError(f"{path}: images with alpha are not supported")
            if mode in ("L", "P"):
                im = im.convert("RGB")
            elif mode != "RGB":
                raise DecodeError(f"{path}: expected 8-bit RGB, got mode {mode}")
            data = np.asarray(im, dtype=np.uint8)
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"{path}: cannot decode image ({exc})") from exc
    return data.astype(np.float64) / 255.0


def to_bytes(image):
    """Quantize [0, 1] floats to uint8 with round-half-up."""
    img = as_image(image)
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_image(image, path):
    path = Path(path)
    fmt = _FORMATS.get(path.suffix.lower())
    if fmt is None:
        raise ValueError(f"{path}: use a .png or .ppm extension")
    Image.fromarray(to_bytes(image), mode="RGB").save(path, format=fmt)


def params_to_dict(params, fit_meta=None):
    doc = {
        "format": PARAMS_FORMAT,
        "version": PARAMS_VERSION,
        "basis_layout": "row-major 3x3; columns are n1, n2, n3",
        "basis": [float(v) for v in params.basis.ravel()],
        "curve_dims": int(params.curve_dims),
        "curves": [[float(v) for v in row] for row in params.curves],
    }
    if fit_meta:
        doc["fit"] = dict(fit_meta)
    return doc


def params_from_dict(doc):
    if not isinstance(doc, dict) or doc.get("format") != PARAMS_FORMAT:
        raise ParamsFormatError("not an iac parameter document")
    if doc.get("version") != PARAMS_VERSION:
        raise ParamsFormatError(f"unsupported version {doc.get('version')!r}")
    try:
        basis = np.asarray(doc["basis"], dtype=np.float64)
        curves = np.asarray(doc["curves"], dtype=np.float64)
        k = int(doc["curve_dims"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParamsFormatError(f"malformed parameter document: {exc}") from exc
    if basis.shape != (9,):
        raise ParamsFormatError(f"basis must hold 9 values, got {basis.size}")
    if curves.shape != (3, k):
        raise ParamsFormatError(f"curves must be 3 arrays of {k} values, got {curves.shape}")
    try:
        return IacParams(basis.reshape(3, 3), curves)
    except SingularBasisError:
        raise
    except ValueError as exc:
        raise ParamsFormatError(str(exc)) from exc


def params_save(params, path, fit_meta=None):
    # json writes floats with repr(), which round-trips float64 exactly
    text = json.dumps(params_to_dict(params, fit_meta), indent=1)
    Path(path).write_text(text + "\n")


def params_load(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParamsFormatError(f"{path}: {exc}") from exc
    return params_from_dict(doc)
