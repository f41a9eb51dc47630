"""COCO-style single-object part-annotation store.

The expected JSON layout is the usual ``images`` / ``annotations`` /
``categories`` triple. Each category's ``supercategory`` names the
object class of the images its annotations belong to (categories
without a supercategory use their own name), so a single-object image
derives its class label from its part annotations. Class labels are
assigned by sorting the class names.

Part geometry may be a polygon list or an uncompressed RLE dict;
internally every part is normalized to RLE and rasterized on demand.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AnnotationError, GeometryError, ValidationError
from .masks import BinaryMask, rasterize_polygons, rle_decode, rle_encode


@dataclass(frozen=True)
class ImageRecord:
    """One annotated image and its class assignment."""

    image_id: str
    path: Path
    class_label: int
    class_name: str
    width: int
    height: int


@dataclass(frozen=True)
class PartAnnotation:
    """A single part: id, COCO-style geometry, cached pixel area."""

    part_id: int
    geometry: list | dict
    area: int


@dataclass(frozen=True)
class PartSet:
    """The per-image set of part annotations, pairwise disjoint."""

    image_id: str
    parts: tuple[PartAnnotation, ...]
    width: int
    height: int

    def __post_init__(self):
        if len(self.parts) < 1:
            raise ValidationError(f"PartSet for image {self.image_id} has no parts")
        ids = [p.part_id for p in self.parts]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate part ids in image {self.image_id}: {ids}")

    @property
    def n(self) -> int:
        return len(self.parts)

    @property
    def part_ids(self) -> tuple[int, ...]:
        return tuple(p.part_id for p in self.parts)

    def part(self, part_id: int) -> PartAnnotation:
        for p in self.parts:
            if p.part_id == part_id:
                return p
        raise ValidationError(f"unknown part id {part_id} in image {self.image_id}")


def rasterize_mask(part: PartAnnotation, width: int, height: int) -> BinaryMask:
    """Rasterize a part's geometry onto a width x height canvas.

    Polygon geometry uses the pixel-center even-odd rule; RLE geometry
    must match the canvas size exactly.
    """
    geom = part.geometry
    if isinstance(geom, dict):
        size = geom.get("size")
        if size is not None and (size[0] != height or size[1] != width):
            raise ValidationError(
                f"part {part.part_id}: RLE size {size} does not match "
                f"canvas {height}x{width}"
            )
        return rle_decode(list(geom["counts"]), width, height)
    if isinstance(geom, list):
        polygons = geom if geom and isinstance(geom[0], (list, tuple)) else [geom]
        return rasterize_polygons([list(p) for p in polygons], width, height)
    raise ValidationError(f"part {part.part_id}: unsupported geometry {type(geom)}")


@dataclass
class ValidationReport:
    """Outcome of validate_partset; report-only, never raises."""

    image_id: str
    overlaps: list[tuple[int, int, int]] = field(default_factory=list)
    out_of_bounds: list[tuple[int, int]] = field(default_factory=list)
    zero_area: list[int] = field(default_factory=list)

    def is_clean(self) -> bool:
        return not (self.overlaps or self.out_of_bounds or self.zero_area)

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "overlaps": [list(t) for t in self.overlaps],
            "out_of_bounds": [list(t) for t in self.out_of_bounds],
            "zero_area": list(self.zero_area),
        }


def validate_partset(ps: PartSet) -> ValidationReport:
    """Check disjointness, bounds and degeneracy of one part set.

    Overlaps are reported per offending pair with the shared pixel
    count; geometry that spills outside the image is reported with its
    clipped-pixel count.
    """
    report = ValidationReport(image_id=ps.image_id)
    masks: dict[int, BinaryMask] = {}
    for part in ps.parts:
        try:
            mask = rasterize_mask(part, ps.width, ps.height)
        except GeometryError as exc:
            report.out_of_bounds.append((part.part_id, exc.clipped_pixels))
            continue
        masks[part.part_id] = mask
        if mask.popcount == 0:
            report.zero_area.append(part.part_id)
    ids = sorted(masks)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            shared = int(np.count_nonzero(masks[a].bits & masks[b].bits))
            if shared > 0:
                report.overlaps.append((a, b, shared))
    return report


@dataclass
class LoadReport:
    """Statistics and issues collected while loading a dataset."""

    images_loaded: int = 0
    images_skipped_no_parts: int = 0
    skipped_image_ids: list[str] = field(default_factory=list)
    overlap_resolutions: list[tuple[str, int, int, int]] = field(default_factory=list)
    area_mismatches: list[tuple[str, int, int, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "images_loaded": self.images_loaded,
            "images_skipped_no_parts": self.images_skipped_no_parts,
            "skipped_image_ids": list(self.skipped_image_ids),
            "overlap_resolutions": [list(t) for t in self.overlap_resolutions],
            "area_mismatches": [list(t) for t in self.area_mismatches],
        }


@dataclass
class PartDataset:
    """Loaded, validated dataset: (ImageRecord, PartSet) pairs plus metadata."""

    root: Path
    pairs: list[tuple[ImageRecord, PartSet]]
    report: LoadReport
    label_table: dict[int, str]

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def num_classes(self) -> int:
        return len(self.label_table)

    def write_label_table(self, path: Path | str) -> None:
        """Emit the two-column (class_label, class_name) CSV."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class_label", "class_name"])
            for label in sorted(self.label_table):
                writer.writerow([label, self.label_table[label]])


def read_label_table(path: Path | str) -> dict[int, str]:
    """Read a (class_label, class_name) CSV back into a dict."""
    table: dict[int, str] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            table[int(row["class_label"])] = row["class_name"]
    return table


def _class_name_of(category: dict) -> str:
    return category.get("supercategory") or category["name"]


def load_part_dataset(
    root: Path | str, annotation_file: Path | str, *, strict: bool = True
) -> PartDataset:
    """Load a COCO-style part-annotation file into validated pairs.

    Images without part annotations are skipped (and counted); in
    strict mode overlapping parts abort the load, in lenient mode the
    contested pixels go to the lower part_id and the resolution is
    recorded in the load report. Pairs come back ordered by image_id.
    """
    root = Path(root)
    annotation_file = Path(annotation_file)
    try:
        with open(annotation_file, "rb") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise AnnotationError(
            f"{annotation_file}: malformed JSON at byte offset {exc.pos}: {exc.msg}"
        ) from exc

    for section in ("images", "annotations", "categories"):
        if section not in data:
            raise AnnotationError(f"{annotation_file}: missing '{section}' section")

    categories = {c["id"]: c for c in data["categories"]}
    class_names = sorted({_class_name_of(c) for c in categories.values()})
    label_of = {name: i for i, name in enumerate(class_names)}

    images = {}
    for img in data["images"]:
        if img.get("width", 0) <= 0 or img.get("height", 0) <= 0:
            raise AnnotationError(
                f"image {img.get('id')}: non-positive dimensions "
                f"{img.get('width')}x{img.get('height')}"
            )
        images[img["id"]] = img

    by_image: dict = {}
    unknown_refs = []
    for ann in data["annotations"]:
        if ann["image_id"] not in images:
            unknown_refs.append(ann["image_id"])
            continue
        by_image.setdefault(ann["image_id"], []).append(ann)
    if unknown_refs:
        raise AnnotationError(
            "annotations reference unknown image ids: "
            + ", ".join(str(i) for i in sorted(set(unknown_refs), key=str))
        )

    report = LoadReport()
    pairs: list[tuple[ImageRecord, PartSet]] = []
    for raw_id, img in images.items():
        image_id = str(raw_id)
        anns = by_image.get(raw_id)
        if not anns:
            report.images_skipped_no_parts += 1
            report.skipped_image_ids.append(image_id)
            continue
        width, height = img["width"], img["height"]

        part_classes = {_class_name_of(categories[a["category_id"]]) for a in anns}
        if len(part_classes) != 1:
            raise AnnotationError(
                f"image {image_id}: parts span multiple classes {sorted(part_classes)}; "
                "multi-object images are not supported"
            )
        class_name = part_classes.pop()

        anns = sorted(anns, key=lambda a: a["id"])
        masks: list[tuple[int, np.ndarray]] = []
        for ann in anns:
            raw = PartAnnotation(part_id=ann["id"], geometry=ann["segmentation"], area=0)
            try:
                mask = rasterize_mask(raw, width, height)
            except GeometryError as exc:
                raise AnnotationError(
                    f"image {image_id}, part {ann['id']}: geometry outside bounds "
                    f"({exc.clipped_pixels} pixels clipped)"
                ) from exc
            masks.append((ann["id"], mask.bits.copy()))
            declared = ann.get("area")
            if declared is not None and int(declared) != mask.popcount:
                report.area_mismatches.append(
                    (image_id, ann["id"], int(declared), mask.popcount)
                )

        for i in range(len(masks)):
            for j in range(i + 1, len(masks)):
                id_a, bits_a = masks[i]
                id_b, bits_b = masks[j]
                shared = int(np.count_nonzero(bits_a & bits_b))
                if shared == 0:
                    continue
                if strict:
                    raise AnnotationError(
                        f"image {image_id}: parts {id_a} and {id_b} overlap in "
                        f"{shared} pixels (strict mode)"
                    )
                bits_b &= ~bits_a  # contested pixels go to the lower part_id
                report.overlap_resolutions.append((image_id, id_a, id_b, shared))

        parts = tuple(
            PartAnnotation(
                part_id=pid,
                geometry={"size": [height, width], "counts": rle_encode(bits)},
                area=int(np.count_nonzero(bits)),
            )
            for pid, bits in masks
        )
        record = ImageRecord(
            image_id=image_id,
            path=root / img["file_name"],
            class_label=label_of[class_name],
            class_name=class_name,
            width=width,
            height=height,
        )
        pairs.append((record, PartSet(image_id=image_id, parts=parts, width=width, height=height)))
        report.images_loaded += 1

    pairs.sort(key=lambda pr: pr[0].image_id)
    report.skipped_image_ids.sort()
    label_table = {i: name for i, name in enumerate(class_names)}
    return PartDataset(root=root, pairs=pairs, report=report, label_table=label_table)
