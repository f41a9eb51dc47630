"""Occlusion planning: part-combination selection and patch-grid masks.

Training-side: pick the size-ceil(n/2) part subset with the largest
combined area and build its composite mask. Evaluation-side: black out
a seeded random selection of 16x16 grid cells to hit a target
information-loss level.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .annotations import PartSet, rasterize_mask
from .errors import ValidationError
from .masks import BinaryMask, mask_record, parse_mask_record

DEFAULT_PATCH_SIZE = 16


@dataclass(frozen=True)
class OcclusionPlan:
    """Chosen part subset, its composite mask, and the covered fraction."""

    image_id: str
    selected_part_ids: tuple[int, ...]
    composite: BinaryMask
    occluded_fraction: float


@dataclass(frozen=True)
class PatchGrid:
    """Axis-aligned grid of cells tiling the image; edge cells may be smaller."""

    width: int
    height: int
    patch_size: int
    cells: tuple[tuple[int, int, int, int], ...]  # (x0, y0, x1, y1) per cell

    @property
    def cell_count(self) -> int:
        return len(self.cells)


def build_patch_grid(width: int, height: int, patch_size: int = DEFAULT_PATCH_SIZE) -> PatchGrid:
    """Tile the image with patch_size cells anchored at (0, 0)."""
    if patch_size <= 0:
        raise ValidationError(f"patch_size must be positive, got {patch_size}")
    if patch_size > min(width, height):
        raise ValidationError(
            f"patch_size {patch_size} exceeds image side min({width}, {height})"
        )
    cells = []
    for y0 in range(0, height, patch_size):
        for x0 in range(0, width, patch_size):
            cells.append((x0, y0, min(x0 + patch_size, width), min(y0 + patch_size, height)))
    return PatchGrid(width=width, height=height, patch_size=patch_size, cells=tuple(cells))


def compose_mask(ps: PartSet, ids) -> BinaryMask:
    """Bitwise OR of the selected parts' masks; empty selection is allowed."""
    ids = list(ids)
    known = set(ps.part_ids)
    unknown = [i for i in ids if i not in known]
    if unknown:
        raise ValidationError(f"unknown part ids {unknown} in image {ps.image_id}")
    bits = np.zeros((ps.height, ps.width), dtype=bool)
    for part in ps.parts:
        if part.part_id in ids:
            bits |= rasterize_mask(part, ps.width, ps.height).bits
    return BinaryMask(bits)


def select_part_combination(ps: PartSet) -> OcclusionPlan:
    """Pick the max-area subset of ceil(n/2) parts and compose its mask.

    Union area ties are broken by the lexicographically smallest sorted
    part-id tuple. For pairwise-disjoint parts this reduces to taking
    the top-k parts by area (smallest ids among equal areas); otherwise
    all C(n, k) subsets are enumerated.
    """
    k = math.ceil(ps.n / 2)
    masks = {p.part_id: rasterize_mask(p, ps.width, ps.height) for p in ps.parts}
    areas = {pid: m.popcount for pid, m in masks.items()}

    union_all = np.zeros((ps.height, ps.width), dtype=bool)
    for m in masks.values():
        union_all |= m.bits
    disjoint = int(np.count_nonzero(union_all)) == sum(areas.values())

    if disjoint:
        ranked = sorted(areas, key=lambda pid: (-areas[pid], pid))
        best_ids = tuple(sorted(ranked[:k]))
    else:
        best_ids = None
        best_area = -1
        for combo in itertools.combinations(sorted(areas), k):
            bits = np.zeros((ps.height, ps.width), dtype=bool)
            for pid in combo:
                bits |= masks[pid].bits
            area = int(np.count_nonzero(bits))
            if area > best_area or (area == best_area and combo < best_ids):
                best_area = area
                best_ids = combo

    composite = compose_mask(ps, best_ids)
    return OcclusionPlan(
        image_id=ps.image_id,
        selected_part_ids=best_ids,
        composite=composite,
        occluded_fraction=composite.fraction(),
    )


def simulate_patch_occlusion(
    width: int,
    height: int,
    target_loss: float,
    seed: int,
    patch_size: int = DEFAULT_PATCH_SIZE,
) -> BinaryMask:
    """Black out round(target% of grid cells), chosen uniformly without
    replacement from the seeded generator.

    Cell count (not pixel count) drives the selection, so edge cells
    smaller than patch_size each still count as one cell. Rounding is
    floor(x + 0.5). Deterministic in (seed, dims, target, patch_size).
    """
    if not 0 <= target_loss <= 100:
        raise ValidationError(f"target_loss must be in [0, 100], got {target_loss}")
    grid = build_patch_grid(width, height, patch_size)
    n_select = int(math.floor(target_loss / 100.0 * grid.cell_count + 0.5))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(grid.cell_count, size=n_select, replace=False)
    bits = np.zeros((height, width), dtype=bool)
    for idx in chosen:
        x0, y0, x1, y1 = grid.cells[int(idx)]
        bits[y0:y1, x0:x1] = True
    return BinaryMask(bits)


def measured_information_loss(mask: BinaryMask) -> float:
    """Fraction of image pixels the mask blacks out."""
    return mask.fraction()


def save_plans(plans: list[OcclusionPlan], out_dir: Path | str) -> Path:
    """Write one JSON plan file per image plus a summary; returns the dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_dist: dict[int, int] = {}
    fractions = []
    for plan in plans:
        payload = {
            "image_id": plan.image_id,
            "selected_part_ids": list(plan.selected_part_ids),
            "occluded_fraction": plan.occluded_fraction,
            "mask_record": mask_record(plan.image_id, plan.composite),
        }
        with open(out_dir / f"{plan.image_id}.json", "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
        n_sel = len(plan.selected_part_ids)
        n_dist[n_sel] = n_dist.get(n_sel, 0) + 1
        fractions.append(plan.occluded_fraction)
    summary = {
        "num_plans": len(plans),
        "mean_occluded_fraction": float(np.mean(fractions)) if fractions else 0.0,
        "selected_count_distribution": {str(k): v for k, v in sorted(n_dist.items())},
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    return out_dir


def load_plans(plan_dir: Path | str) -> dict[str, OcclusionPlan]:
    """Read back plans written by save_plans, keyed by image_id."""
    plan_dir = Path(plan_dir)
    plans: dict[str, OcclusionPlan] = {}
    for path in sorted(plan_dir.glob("*.json")):
        if path.name == "summary.json":
            continue
        with open(path) as fh:
            payload = json.load(fh)
        rec_id, mask = parse_mask_record(payload["mask_record"])
        if rec_id != payload["image_id"]:
            raise ValidationError(f"{path}: mask record id {rec_id!r} != plan id")
        plans[rec_id] = OcclusionPlan(
            image_id=rec_id,
            selected_part_ids=tuple(payload["selected_part_ids"]),
            composite=mask,
            occluded_fraction=payload["occluded_fraction"],
        )
    return plans
