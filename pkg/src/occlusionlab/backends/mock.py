"""Deterministic mock backend for tests and CI.

Both operations follow published rules so tests can recompute outputs
independently; all randomness derives from SHA-256 digests of request
fields, so outputs are byte-identical across processes and platforms.

Inpainting rule (``mock-inpaint-v1``):

1. ring = unmasked pixels 8-adjacent to at least one masked pixel;
2. fill[c] = float64 mean of the ring pixels in channel c (127.5 per
   channel when the ring is empty, i.e. an all-true mask);
3. rng = ``np.random.default_rng(int.from_bytes(sha256(b"mock-inpaint-v1"
   + pack("<qqii", seed, steps, width, height) + packbits(mask bits,
   row-major) + prompt_utf8).digest(), "big"))``;
4. noise = rng.uniform(-1, 1, (n_masked, channels)), masked pixels in
   row-major order;
5. masked output = clip(rint(fill + noise), 0, 255) as uint8; every
   unmasked pixel is copied bit-exactly. An empty mask returns the
   input unchanged.

Feature rule (``mock-features-v1``):

1. pooled = float64 image average-pooled over non-overlapping 8x8
   windows, shape (H/8, W/8, C);
2. rng = ``np.random.default_rng(int.from_bytes(sha256(b"mock-features-v1"
   + pack("<qq", seed, timestep) + tap_utf8 + b"\\x00" + prompt_utf8)
   .digest(), "big"))``; P = rng.standard_normal((8, C));
3. values[k, y, x] = sum_c P[k, c] * pooled[y, x, c], cast to float32.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from ..errors import CapabilityError
from .base import (
    CapabilityReport,
    DiffusionFeatureMap,
    FeatureRequest,
    GenerativeBackend,
    InpaintRequest,
    TapSpec,
)

_DIMS_MULTIPLE = 8
_FEATURE_CHANNELS = 8
_SCHEDULE_RANGE = (0, 999)
_TAPS = {"mid": TapSpec(channels=_FEATURE_CHANNELS, spatial_divisor=8)}


def _require_dims(width: int, height: int) -> None:
    if width % _DIMS_MULTIPLE or height % _DIMS_MULTIPLE:
        raise CapabilityError(
            f"mock backend requires image sides divisible by {_DIMS_MULTIPLE}, "
            f"got {width}x{height}"
        )


def dilate8(bits: np.ndarray) -> np.ndarray:
    """One-step binary dilation with the 3x3 (8-connected) structuring element."""
    out = bits.copy()
    h, w = bits.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = bits
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            out |= padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return out


def _inpaint_rng(
    seed: int, steps: int, width: int, height: int, mask_bits: np.ndarray, prompt: str
) -> np.random.Generator:
    digest = hashlib.sha256(
        b"mock-inpaint-v1"
        + struct.pack("<qqii", seed, steps, width, height)
        + np.packbits(mask_bits, axis=None).tobytes()
        + prompt.encode("utf-8")
    ).digest()
    return np.random.default_rng(int.from_bytes(digest, "big"))


def _feature_rng(seed: int, timestep: int, tap: str, prompt: str) -> np.random.Generator:
    digest = hashlib.sha256(
        b"mock-features-v1"
        + struct.pack("<qq", seed, timestep)
        + tap.encode("utf-8")
        + b"\x00"
        + prompt.encode("utf-8")
    ).digest()
    return np.random.default_rng(int.from_bytes(digest, "big"))


class MockDiffusionBackend(GenerativeBackend):
    """Stand-in for a frozen diffusion model; see module docstring for
    the published output rules."""

    name = "mock"
    version = "mock-1"

    def inpaint(self, request: InpaintRequest) -> np.ndarray:
        image = np.asarray(request.image, dtype=np.uint8)
        height, width = image.shape[:2]
        _require_dims(width, height)
        mask = request.mask.bits
        if not mask.any():
            return image.copy()

        ring = dilate8(mask) & ~mask
        channels = image.shape[2]
        if ring.any():
            fill = image[ring].astype(np.float64).mean(axis=0)
        else:
            fill = np.full(channels, 127.5, dtype=np.float64)

        rng = _inpaint_rng(request.seed, request.steps, width, height, mask, request.prompt)
        n_masked = int(mask.sum())
        noise = rng.uniform(-1.0, 1.0, size=(n_masked, channels))
        out = image.copy()
        out[mask] = np.clip(np.rint(fill[None, :] + noise), 0, 255).astype(np.uint8)
        return out

    def extract_features(self, request: FeatureRequest) -> DiffusionFeatureMap:
        image = np.asarray(request.image, dtype=np.uint8)
        height, width = image.shape[:2]
        _require_dims(width, height)
        if request.tap not in _TAPS:
            raise CapabilityError(
                f"unknown tap {request.tap!r}; valid taps: {sorted(_TAPS)}"
            )
        lo, hi = _SCHEDULE_RANGE
        if not lo <= request.timestep <= hi:
            raise CapabilityError(
                f"timestep {request.timestep} outside schedule range [{lo}, {hi}]"
            )

        channels = image.shape[2]
        pooled = (
            image.astype(np.float64)
            .reshape(height // 8, 8, width // 8, 8, channels)
            .mean(axis=(1, 3))
        )
        rng = _feature_rng(request.seed, request.timestep, request.tap, request.prompt)
        projection = rng.standard_normal((_FEATURE_CHANNELS, channels))
        values = np.einsum("kc,yxc->kyx", projection, pooled).astype(np.float32)
        return DiffusionFeatureMap(values=values)

    def capabilities(self) -> CapabilityReport:
        return CapabilityReport(
            backend_name=self.name,
            backend_version=self.version,
            dims_multiple=_DIMS_MULTIPLE,
            taps=dict(_TAPS),
            schedule_range=_SCHEDULE_RANGE,
            max_parallel_requests=0,
        )

    def parameter_checksum(self) -> str:
        # The mock's "parameters" are its published rule constants.
        blob = repr(
            (
                self.name,
                self.version,
                _DIMS_MULTIPLE,
                _FEATURE_CHANNELS,
                _SCHEDULE_RANGE,
                sorted(_TAPS),
            )
        ).encode("ascii")
        return hashlib.sha256(blob).hexdigest()


def fingerprint_fixed_requests(num_requests: int = 10) -> str:
    """SHA-256 digest of the mock's outputs on a fixed request battery.

    Used to assert byte-identical behaviour across separate processes:
    run this in-process and in a subprocess and compare digests.
    """
    backend = MockDiffusionBackend()
    digest = hashlib.sha256()
    from ..masks import BinaryMask

    for i in range(num_requests):
        rng = np.random.default_rng(1000 + i)
        image = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
        bits = np.zeros((32, 32), dtype=bool)
        bits[4 + i % 8 : 16 + i % 8, 6 : 20 + i % 4] = True
        mask = BinaryMask(bits)
        painted = backend.inpaint(
            InpaintRequest(image=image, mask=mask, prompt=f"A class of fixture-{i}", seed=i, steps=1 + i % 3)
        )
        digest.update(painted.tobytes())
        fm = backend.extract_features(
            FeatureRequest(image=image, timestep=37 * i % 1000, tap="mid", seed=i)
        )
        digest.update(fm.values.tobytes())
    return digest.hexdigest()
