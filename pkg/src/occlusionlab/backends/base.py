"""Uniform interface to a frozen generative model.

A backend offers two operations: mask-conditioned inpainting and
intermediate-feature extraction. Backends are frozen functions of their
requests; they never receive parameter updates, and expose a parameter
checksum so training can assert that contract.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..masks import BinaryMask


@dataclass(frozen=True)
class InpaintRequest:
    """Image + mask + text prompt for the inpainting path."""

    image: np.ndarray  # H x W x C uint8
    mask: BinaryMask
    prompt: str
    seed: int = 0
    steps: int = 1

    def __post_init__(self):
        if self.image.ndim != 3:
            raise ValidationError(f"image must be H x W x C, got {self.image.shape}")
        if self.image.shape[:2] != (self.mask.height, self.mask.width):
            raise ValidationError(
                f"mask {(self.mask.height, self.mask.width)} does not match "
                f"image {self.image.shape[:2]}"
            )


@dataclass(frozen=True)
class FeatureRequest:
    """Image + null prompt for the feature-extraction path."""

    image: np.ndarray  # H x W x C uint8
    timestep: int
    tap: str
    prompt: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.image.ndim != 3:
            raise ValidationError(f"image must be H x W x C, got {self.image.shape}")


@dataclass
class DiffusionFeatureMap:
    """Intermediate feature tensor: channels x h x w, finite values."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 3:
            raise ValidationError(f"feature map must be c x h x w, got {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise ValidationError("feature map contains non-finite values")

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def spatial(self) -> tuple[int, int]:
        return self.values.shape[1], self.values.shape[2]


@dataclass(frozen=True)
class TapSpec:
    """Feature shape contract for one tap: channels, spatial downscale."""

    channels: int
    spatial_divisor: int


@dataclass(frozen=True)
class CapabilityReport:
    """Static description of what a backend supports."""

    backend_name: str
    backend_version: str
    dims_multiple: int
    taps: dict[str, TapSpec]
    schedule_range: tuple[int, int]
    max_parallel_requests: int  # 0 means unbounded

    def to_dict(self) -> dict:
        return {
            "backend_name": self.backend_name,
            "backend_version": self.backend_version,
            "dims_multiple": self.dims_multiple,
            "taps": {
                name: {"channels": t.channels, "spatial_divisor": t.spatial_divisor}
                for name, t in self.taps.items()
            },
            "schedule_range": list(self.schedule_range),
            "max_parallel_requests": self.max_parallel_requests,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "CapabilityReport":
        return cls(
            backend_name=payload["backend_name"],
            backend_version=payload["backend_version"],
            dims_multiple=payload["dims_multiple"],
            taps={
                name: TapSpec(channels=t["channels"], spatial_divisor=t["spatial_divisor"])
                for name, t in payload["taps"].items()
            },
            schedule_range=tuple(payload["schedule_range"]),
            max_parallel_requests=payload["max_parallel_requests"],
        )


class GenerativeBackend(abc.ABC):
    """Frozen inpainting + feature-extraction provider."""

    name: str = "backend"
    version: str = "0"

    @abc.abstractmethod
    def inpaint(self, request: InpaintRequest) -> np.ndarray:
        """Fill the masked region; returns an image with the input's dims."""

    @abc.abstractmethod
    def extract_features(self, request: FeatureRequest) -> DiffusionFeatureMap:
        """Extract the intermediate feature map for the requested tap."""

    @abc.abstractmethod
    def capabilities(self) -> CapabilityReport:
        """Describe dims constraints, taps, shapes and schedule range."""

    @abc.abstractmethod
    def parameter_checksum(self) -> str:
        """Stable digest of the backend's parameters (frozen contract)."""


def describe_capabilities(backend: GenerativeBackend) -> CapabilityReport:
    """Capability metadata for a constructed backend; never fails."""
    return backend.capabilities()
