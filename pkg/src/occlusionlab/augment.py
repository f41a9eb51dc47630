"""The augmentation operator family: black-out, replace-parts, CutMix,
and diffusion inpainting.

Every operator is a deterministic function of its inputs (and seed) and
produces an AugmentedSample carrying the image, per-class label weights
and the mask that produced it. Black-out and replace-parts touch only
mask-true pixels, bit-exactly.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .backends.base import GenerativeBackend, InpaintRequest
from .errors import BackendError, ValidationError
from .masks import BinaryMask, mask_record, parse_mask_record
from .occlusion import OcclusionPlan

INPAINT_PROMPT_TEMPLATE = "A class of {object_class}"


class AugmentationKind(enum.Enum):
    BLACK_OUT = "black-out"
    CUTMIX = "cutmix"
    REPLACE_PARTS = "replace-parts"
    SD_INPAINT = "sd-inpaint"

    @classmethod
    def parse(cls, name: str) -> "AugmentationKind":
        for kind in cls:
            if kind.value == name:
                return kind
        valid = ", ".join(k.value for k in cls)
        raise ValidationError(f"unknown augmentation method {name!r}; expected one of {valid}")


@dataclass
class AugmentedSample:
    """One augmented image with label weights and provenance.

    ``source_mask`` is the part mask that produced the sample; CutMix
    has no part mask and records its patch rectangle instead.
    """

    image: np.ndarray  # H x W x C uint8
    label_weights: np.ndarray  # (num_classes,) float64, sums to 1
    source_mask: BinaryMask | None
    kind: AugmentationKind
    rect: tuple[int, int, int, int] | None = None  # CutMix (x0, y0, x1, y1)

    def __post_init__(self):
        if self.image.ndim != 3:
            raise ValidationError(f"image must be H x W x C, got shape {self.image.shape}")
        if np.any(self.label_weights < 0) or not np.isclose(self.label_weights.sum(), 1.0):
            raise ValidationError("label weights must be non-negative and sum to 1")
        if self.source_mask is not None and (
            self.source_mask.height != self.image.shape[0]
            or self.source_mask.width != self.image.shape[1]
        ):
            raise ValidationError("mask dimensions do not match image")


def one_hot(label: int, num_classes: int) -> np.ndarray:
    if not 0 <= label < num_classes:
        raise ValidationError(f"label {label} outside [0, {num_classes})")
    weights = np.zeros(num_classes, dtype=np.float64)
    weights[label] = 1.0
    return weights


def _check_image_mask(image: np.ndarray, mask: BinaryMask) -> None:
    if image.ndim != 3:
        raise ValidationError(f"image must be H x W x C, got shape {image.shape}")
    if image.shape[:2] != (mask.height, mask.width):
        raise ValidationError(
            f"image {image.shape[:2]} and mask {(mask.height, mask.width)} dims differ"
        )


def apply_black_mask(image: np.ndarray, mask: BinaryMask) -> np.ndarray:
    """Zero out mask-true pixels; the single masking kernel shared by the
    black-out augmenter and the evaluation harness."""
    _check_image_mask(image, mask)
    out = image.copy()
    out[mask.bits] = 0
    return out


def black_out(
    image: np.ndarray, mask: BinaryMask, *, label: int, num_classes: int
) -> AugmentedSample:
    """Blacks out the masked parts, keeping only shape information there."""
    return AugmentedSample(
        image=apply_black_mask(image, mask),
        label_weights=one_hot(label, num_classes),
        source_mask=mask,
        kind=AugmentationKind.BLACK_OUT,
    )


def replace_parts(
    image: np.ndarray,
    mask: BinaryMask,
    donor_image: np.ndarray,
    *,
    label: int,
    num_classes: int,
) -> AugmentedSample:
    """Replace masked pixels with the donor image's pixels at the same
    coordinates; the label stays with the original image."""
    _check_image_mask(image, mask)
    if donor_image.shape != image.shape:
        raise ValidationError(
            f"donor shape {donor_image.shape} does not match image {image.shape}"
        )
    out = image.copy()
    out[mask.bits] = donor_image[mask.bits]
    return AugmentedSample(
        image=out,
        label_weights=one_hot(label, num_classes),
        source_mask=mask,
        kind=AugmentationKind.REPLACE_PARTS,
    )


def cutmix_from_rect(
    image_a: np.ndarray,
    label_a: int,
    image_b: np.ndarray,
    label_b: int,
    rect: tuple[int, int, int, int],
    *,
    num_classes: int,
) -> AugmentedSample:
    """Paste the given rectangle of image_b onto image_a and weight the
    labels by the area split: lambda = 1 - rect_area / (W*H)."""
    if image_a.shape != image_b.shape:
        raise ValidationError(
            f"image shapes differ: {image_a.shape} vs {image_b.shape}"
        )
    height, width = image_a.shape[:2]
    x0, y0, x1, y1 = rect
    if not (0 <= x0 <= x1 <= width and 0 <= y0 <= y1 <= height):
        raise ValidationError(f"rect {rect} outside {width}x{height} image")
    rect_area = (x1 - x0) * (y1 - y0)
    lam = 1.0 - rect_area / (width * height)
    out = image_a.copy()
    out[y0:y1, x0:x1] = image_b[y0:y1, x0:x1]
    weights = np.zeros(num_classes, dtype=np.float64)
    weights[label_a] += lam
    weights[label_b] += 1.0 - lam
    return AugmentedSample(
        image=out,
        label_weights=weights,
        source_mask=None,
        kind=AugmentationKind.CUTMIX,
        rect=(x0, y0, x1, y1),
    )


def cutmix(
    image_a: np.ndarray,
    label_a: int,
    image_b: np.ndarray,
    label_b: int,
    seed: int,
    *,
    num_classes: int,
) -> AugmentedSample:
    """Standard CutMix: lambda ~ Beta(1,1), a centered random rectangle of
    area ratio (1 - lambda) clipped to the image, labels weighted by the
    realized areas."""
    if image_a.shape != image_b.shape:
        raise ValidationError(
            f"image shapes differ: {image_a.shape} vs {image_b.shape}"
        )
    height, width = image_a.shape[:2]
    rng = np.random.default_rng(seed)
    lam = rng.beta(1.0, 1.0)
    cut_ratio = float(np.sqrt(1.0 - lam))
    cut_w = int(round(width * cut_ratio))
    cut_h = int(round(height * cut_ratio))
    cx = int(rng.integers(0, width))
    cy = int(rng.integers(0, height))
    x0 = max(cx - cut_w // 2, 0)
    y0 = max(cy - cut_h // 2, 0)
    x1 = min(x0 + cut_w, width)
    y1 = min(y0 + cut_h, height)
    return cutmix_from_rect(
        image_a, label_a, image_b, label_b, (x0, y0, x1, y1), num_classes=num_classes
    )


def inpaint_augment(
    image: np.ndarray,
    plan: OcclusionPlan,
    class_name: str,
    backend: GenerativeBackend,
    *,
    label: int,
    num_classes: int,
    seed: int = 0,
    steps: int = 1,
) -> AugmentedSample:
    """Replace the planned occlusion region with backend inpainting,
    prompted with the object class. An empty mask short-circuits without
    touching the backend."""
    mask = plan.composite
    _check_image_mask(image, mask)
    if mask.is_empty():
        out = image.copy()
    else:
        prompt = INPAINT_PROMPT_TEMPLATE.format(object_class=class_name)
        request = InpaintRequest(image=image, mask=mask, prompt=prompt, seed=seed, steps=steps)
        try:
            out = backend.inpaint(request)
        except BackendError as exc:
            raise BackendError(f"inpainting failed for image {plan.image_id}: {exc}") from exc
    return AugmentedSample(
        image=out,
        label_weights=one_hot(label, num_classes),
        source_mask=mask,
        kind=AugmentationKind.SD_INPAINT,
    )


def encode_label_weights(weights: np.ndarray) -> str:
    """Sparse 'label:weight' encoding for manifest rows."""
    nz = np.flatnonzero(weights)
    return ";".join(f"{int(i)}:{weights[int(i)]!r}" for i in nz)


def decode_label_weights(text: str, num_classes: int) -> np.ndarray:
    weights = np.zeros(num_classes, dtype=np.float64)
    for chunk in text.split(";"):
        if not chunk:
            continue
        idx, val = chunk.split(":")
        weights[int(idx)] = float(val)
    return weights


MANIFEST_FIELDS = ["image_id", "kind", "seed", "mask_file", "prompt", "label_weights"]


class AugmentationCache:
    """On-disk cache of augmented images: <root>/<method>/<image_id>.png
    plus a manifest CSV and a status marker for resumable runs."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def method_dir(self, kind: AugmentationKind) -> Path:
        return self.root / kind.value

    def image_path(self, kind: AugmentationKind, image_id: str) -> Path:
        return self.method_dir(kind) / f"{image_id}.png"

    def mask_path(self, kind: AugmentationKind, image_id: str) -> Path:
        return self.method_dir(kind) / "masks" / f"{image_id}.txt"

    def manifest_path(self, kind: AugmentationKind) -> Path:
        return self.method_dir(kind) / "manifest.csv"

    def status_path(self, kind: AugmentationKind) -> Path:
        return self.method_dir(kind) / "status.json"

    def has(self, kind: AugmentationKind, image_id: str) -> bool:
        return self.image_path(kind, image_id).exists()

    def put(
        self,
        image_id: str,
        sample: AugmentedSample,
        *,
        seed: int,
        prompt: str = "",
    ) -> None:
        method_dir = self.method_dir(sample.kind)
        method_dir.mkdir(parents=True, exist_ok=True)
        Image.fromarray(sample.image).save(self.image_path(sample.kind, image_id))
        mask_file = ""
        if sample.source_mask is not None:
            mpath = self.mask_path(sample.kind, image_id)
            mpath.parent.mkdir(parents=True, exist_ok=True)
            mpath.write_text(mask_record(image_id, sample.source_mask) + "\n")
            mask_file = str(mpath.relative_to(method_dir))
        manifest = self.manifest_path(sample.kind)
        new_file = not manifest.exists()
        with open(manifest, "a", newline="") as fh:
            writer = csv.writer(fh)
            if new_file:
                writer.writerow(MANIFEST_FIELDS)
            writer.writerow(
                [
                    image_id,
                    sample.kind.value,
                    seed,
                    mask_file,
                    prompt,
                    encode_label_weights(sample.label_weights),
                ]
            )

    def get_image(self, kind: AugmentationKind, image_id: str) -> np.ndarray:
        path = self.image_path(kind, image_id)
        if not path.exists():
            raise FileNotFoundError(path)
        return np.asarray(Image.open(path).convert("RGB"))

    def get_mask(self, kind: AugmentationKind, image_id: str) -> BinaryMask | None:
        path = self.mask_path(kind, image_id)
        if not path.exists():
            return None
        _, mask = parse_mask_record(path.read_text().strip())
        return mask

    def read_manifest(self, kind: AugmentationKind) -> list[dict]:
        manifest = self.manifest_path(kind)
        if not manifest.exists():
            return []
        with open(manifest, newline="") as fh:
            return list(csv.DictReader(fh))

    def manifest_entries(self, kind: AugmentationKind) -> dict[str, dict]:
        return {row["image_id"]: row for row in self.read_manifest(kind)}

    def mark_status(self, kind: AugmentationKind, *, complete: bool, error: str = "") -> None:
        self.method_dir(kind).mkdir(parents=True, exist_ok=True)
        entries = len(self.read_manifest(kind))
        payload = {"complete": complete, "entries": entries}
        if error:
            payload["error"] = error
        with open(self.status_path(kind), "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)

    def status(self, kind: AugmentationKind) -> dict:
        path = self.status_path(kind)
        if not path.exists():
            return {"complete": False, "entries": 0}
        with open(path) as fh:
            return json.load(fh)
