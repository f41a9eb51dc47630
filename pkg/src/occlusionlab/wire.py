"""Byte-level encoding shared by the backend service and its client:
PNG-in-base64 images, RLE mask payloads, raw float32 tensors."""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from .errors import ValidationError
from .masks import BinaryMask, rle_decode, rle_encode


def encode_image(image: np.ndarray) -> str:
    """uint8 H x W x C image -> base64 PNG (lossless round-trip)."""
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image(payload: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload, validate=True)
        img = Image.open(io.BytesIO(raw))
        img.load()
    except Exception as exc:
        raise ValidationError(f"invalid image payload: {exc}") from exc
    return np.asarray(img.convert("RGB"))


def encode_mask(mask: BinaryMask) -> dict:
    return {
        "width": mask.width,
        "height": mask.height,
        "counts": ",".join(str(c) for c in rle_encode(mask.bits)),
    }


def decode_mask(payload: dict) -> BinaryMask:
    counts_s = payload["counts"]
    counts = [int(c) for c in counts_s.split(",")] if counts_s else []
    return rle_decode(counts, int(payload["width"]), int(payload["height"]))


def encode_tensor(values: np.ndarray) -> dict:
    values = np.ascontiguousarray(values, dtype=np.float32)
    return {
        "shape": list(values.shape),
        "dtype": "float32",
        "data": base64.b64encode(values.tobytes()).decode("ascii"),
    }


def decode_tensor(payload: dict) -> np.ndarray:
    if payload.get("dtype") != "float32":
        raise ValidationError(f"unsupported tensor dtype {payload.get('dtype')!r}")
    raw = base64.b64decode(payload["data"])
    values = np.frombuffer(raw, dtype=np.float32).copy()
    return values.reshape(payload["shape"])
