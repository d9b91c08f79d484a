"""Annotation and result files, in-memory indexes, and evaluation config.

Ground truth is a JSON document with ``images``, ``annotations`` and
``categories`` arrays; results are a JSON array of detection records.
Both may be gzip-compressed (suffix ``.gz``). Loading validates cross
references and reports every offender with its document path.
"""

import gzip
import json
import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

from .geometry import Box, RleMask, rle_decode_counts, rle_encode_counts

SCALE_NAMES = ("xs", "s", "m", "l", "xl")
MISSED_ORACLE_MODES = ("remove_gt", "score_one", "score_neg_inf", "score_mean",
                       "score_sampled")


class ValidationError(ValueError):
    """Input document failed validation; message lists every offender."""


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class ImageMeta:
    id: int
    width: int
    height: int
    # categories whose annotation is known incomplete in this image, and
    # categories verified absent; both drive the ignore rules
    not_exhaustive: frozenset = frozenset()
    verified_absent: frozenset = frozenset()


@dataclass(frozen=True)
class GroundTruth:
    id: int
    image_id: int
    category_id: int
    box: Box
    mask: Optional[RleMask] = None
    is_crowd: bool = False
    area: float = 0.0

    def geometry_area(self) -> float:
        return float(self.mask.area) if self.mask is not None else self.box.area


@dataclass(frozen=True)
class Detection:
    ordinal: int  # ingestion index; the deterministic tie-breaker
    image_id: int
    category_id: int
    score: float
    box: Optional[Box] = None
    mask: Optional[RleMask] = None
    # synthetic detections injected by oracles may rank after all real ones
    rank_last: bool = False

    def geometry(self, mode: str):
        g = self.mask if mode == "mask" else self.box
        if g is None:
            raise ValueError(f"detection {self.ordinal} has no {mode} geometry")
        return g

    def sort_key(self) -> tuple:
        # score descending, ordinal ascending; rank_last after everything
        return (1 if self.rank_last else 0, -self.score, self.ordinal)


@dataclass(frozen=True)
class EvalConfig:
    mode: str = "box"
    foreground_iou: float = 0.5
    background_iou: float = 0.1
    iou_thresholds: tuple = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
    max_dets_per_image: int = 100
    missed_gt_oracle: str = "remove_gt"
    use_ignored_for_errors: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("box", "mask"):
            raise ValueError(f"mode must be 'box' or 'mask', got {self.mode!r}")
        if not 0.0 < self.background_iou < self.foreground_iou <= 1.0:
            raise ValueError("need 0 < background_iou < foreground_iou <= 1")
        if not self.iou_thresholds:
            raise ValueError("iou_thresholds must be non-empty")
        if list(self.iou_thresholds) != sorted(set(self.iou_thresholds)):
            raise ValueError("iou_thresholds must be strictly increasing")
        if any(not 0.0 < t <= 1.0 for t in self.iou_thresholds):
            raise ValueError("iou_thresholds must lie in (0, 1]")
        if self.max_dets_per_image < 1:
            raise ValueError("max_dets_per_image must be >= 1")
        if self.missed_gt_oracle not in MISSED_ORACLE_MODES:
            raise ValueError(f"unknown missed_gt_oracle {self.missed_gt_oracle!r}")


class Dataset:
    """Validated ground truth with per-image and per-category indexes."""

    def __init__(self, categories, images, instances):
        self.categories: dict[int, Category] = {c.id: c for c in categories}
        self.images: dict[int, ImageMeta] = {im.id: im for im in images}
        self.instances: list[GroundTruth] = list(instances)
        self._by_image_cat: dict[tuple[int, int], list[GroundTruth]] = {}
        self._n_gt: dict[int, int] = {c: 0 for c in self.categories}
        for gt in self.instances:
            self._by_image_cat.setdefault((gt.image_id, gt.category_id), []).append(gt)
            if not gt.is_crowd:
                self._n_gt[gt.category_id] += 1

    def gts_in(self, image_id: int, category_id: int) -> list:
        return self._by_image_cat.get((image_id, category_id), [])

    def n_gt(self, category_id: int) -> int:
        """Non-crowd instance count; the recall denominator."""
        return self._n_gt[category_id]

    def evaluable_categories(self) -> list[int]:
        return sorted(c for c, n in self._n_gt.items() if n > 0)

    def category_name(self, category_id: int) -> str:
        return self.categories[category_id].name


class DetectionSet:
    """Detections for one model, indexed by (image, category).

    ``transformed_by`` names the counterfactual transforms already applied;
    transforms refuse to stack, so it is () or one application's names.
    """

    def __init__(self, detections, transformed_by: tuple = ()):
        self.detections: list[Detection] = list(detections)
        self.transformed_by = tuple(transformed_by)
        self._by_image_cat: dict[tuple[int, int], list[Detection]] = {}
        for det in self.detections:
            self._by_image_cat.setdefault((det.image_id, det.category_id), []).append(det)

    def dets_in(self, image_id: int, category_id: int) -> list:
        return self._by_image_cat.get((image_id, category_id), [])

    def __len__(self) -> int:
        return len(self.detections)


# --- parsing helpers --------------------------------------------------------

def _read_json(path):
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        return json.load(fh)


def _write_json(doc, path):
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wt", encoding="utf-8") as fh:
        json.dump(doc, fh)


def _parse_box(raw, where, errors) -> Optional[Box]:
    if (not isinstance(raw, (list, tuple)) or len(raw) != 4
            or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in raw)):
        errors.append(f"{where}: bbox must be four finite numbers, got {raw!r}")
        return None
    x, y, w, h = (float(v) for v in raw)
    if w < 0 or h < 0:
        errors.append(f"{where}: bbox has negative size {raw!r}")
        return None
    return Box(x, y, w, h)


def _parse_mask(raw, where, errors) -> Optional[RleMask]:
    if not isinstance(raw, dict) or "size" not in raw or "counts" not in raw:
        errors.append(f"{where}: segmentation must carry 'size' and 'counts'")
        return None
    size = raw["size"]
    if not (isinstance(size, (list, tuple)) and len(size) == 2):
        errors.append(f"{where}: segmentation size must be [height, width]")
        return None
    h, w = int(size[0]), int(size[1])
    counts = raw["counts"]
    string_form = isinstance(counts, str)
    try:
        arr = rle_decode_counts(counts) if string_form else counts
        return RleMask(h, w, arr, string_form=string_form)
    except (ValueError, TypeError, IndexError) as exc:
        errors.append(f"{where}: bad run-length stream ({exc})")
        return None


def _mask_doc(mask: RleMask) -> dict:
    counts = (rle_encode_counts(mask.counts) if mask.string_form
              else [int(v) for v in mask.counts])
    return {"size": [mask.height, mask.width], "counts": counts}


def _raise_if(errors, path):
    if errors:
        head = f"{path}: {len(errors)} validation error(s)"
        raise ValidationError("\n".join([head] + [f"  - {e}" for e in errors]))


def load_ground_truth(path) -> Dataset:
    doc = _read_json(path)
    errors: list[str] = []
    categories = []
    seen = set()
    for i, raw in enumerate(doc.get("categories", [])):
        where = f"categories[{i}]"
        try:
            cat = Category(id=int(raw["id"]), name=str(raw.get("name", raw["id"])))
        except (KeyError, TypeError, ValueError):
            errors.append(f"{where}: needs integer 'id'")
            continue
        if cat.id in seen:
            errors.append(f"{where}: duplicate category id {cat.id}")
        seen.add(cat.id)
        categories.append(cat)

    images = []
    image_ids = set()
    for i, raw in enumerate(doc.get("images", [])):
        where = f"images[{i}]"
        try:
            im = ImageMeta(
                id=int(raw["id"]), width=int(raw.get("width", 0)),
                height=int(raw.get("height", 0)),
                not_exhaustive=frozenset(raw.get("not_exhaustive_category_ids", [])),
                verified_absent=frozenset(raw.get("neg_category_ids", [])))
        except (KeyError, TypeError, ValueError):
            errors.append(f"{where}: needs integer 'id'")
            continue
        if im.id in image_ids:
            errors.append(f"{where}: duplicate image id {im.id}")
        if im.width < 0 or im.height < 0:
            errors.append(f"{where} (id={im.id}): negative canvas")
        image_ids.add(im.id)
        images.append(im)

    instances = []
    ann_ids = set()
    for i, raw in enumerate(doc.get("annotations", [])):
        where = f"annotations[{i}]"
        try:
            ann_id = int(raw["id"])
            where = f"{where} (id={ann_id})"
            image_id = int(raw["image_id"])
            category_id = int(raw["category_id"])
        except (KeyError, TypeError, ValueError):
            errors.append(f"{where}: needs integer id, image_id, category_id")
            continue
        if ann_id in ann_ids:
            errors.append(f"{where}: duplicate annotation id")
        ann_ids.add(ann_id)
        if image_id not in image_ids:
            errors.append(f"{where}: image_id {image_id} not declared")
        if category_id not in seen:
            errors.append(f"{where}: category_id {category_id} not declared")
        box = _parse_box(raw.get("bbox"), where, errors)
        mask = None
        if raw.get("segmentation") is not None:
            mask = _parse_mask(raw["segmentation"], where, errors)
        if box is None:
            continue
        area = raw.get("area")
        computed = float(mask.area) if mask is not None else box.area
        if area is None:
            area = computed
        elif not math.isclose(float(area), computed, rel_tol=1e-6, abs_tol=1e-6):
            # trust the file for round-tripping, but flag the mismatch
            warnings.warn(f"{where}: stored area {area} != geometry area {computed}",
                          stacklevel=2)
        instances.append(GroundTruth(
            id=ann_id, image_id=image_id, category_id=category_id, box=box,
            mask=mask, is_crowd=bool(raw.get("iscrowd", 0)), area=float(area)))
    _raise_if(errors, path)
    return Dataset(categories, images, instances)


def save_ground_truth(dataset: Dataset, path) -> None:
    doc = {
        "images": [
            {"id": im.id, "width": im.width, "height": im.height,
             **({"not_exhaustive_category_ids": sorted(im.not_exhaustive)}
                if im.not_exhaustive else {}),
             **({"neg_category_ids": sorted(im.verified_absent)}
                if im.verified_absent else {})}
            for im in dataset.images.values()],
        "annotations": [
            {"id": gt.id, "image_id": gt.image_id, "category_id": gt.category_id,
             "bbox": [gt.box.x, gt.box.y, gt.box.w, gt.box.h],
             **({"segmentation": _mask_doc(gt.mask)} if gt.mask is not None else {}),
             "iscrowd": int(gt.is_crowd), "area": gt.area}
            for gt in dataset.instances],
        "categories": [{"id": c.id, "name": c.name}
                       for c in dataset.categories.values()],
    }
    _write_json(doc, path)


def load_detections(path, dataset: Dataset, config: EvalConfig = EvalConfig()) -> DetectionSet:
    doc = _read_json(path)
    if not isinstance(doc, list):
        raise ValidationError(f"{path}: results must be a JSON array")
    errors: list[str] = []
    dets = []
    for i, raw in enumerate(doc):
        where = f"results[{i}]"
        try:
            image_id = int(raw["image_id"])
            category_id = int(raw["category_id"])
            score = float(raw["score"])
        except (KeyError, TypeError, ValueError):
            errors.append(f"{where}: needs image_id, category_id, score")
            continue
        if image_id not in dataset.images:
            errors.append(f"{where}: image_id {image_id} not in ground truth")
        if category_id not in dataset.categories:
            errors.append(f"{where}: category_id {category_id} not in ground truth")
        if not (math.isfinite(score) and 0.0 <= score <= 1.0):
            errors.append(f"{where}: score {score!r} outside [0, 1]")
        box = mask = None
        if raw.get("bbox") is not None:
            box = _parse_box(raw["bbox"], where, errors)
        if raw.get("segmentation") is not None:
            mask = _parse_mask(raw["segmentation"], where, errors)
        if config.mode == "mask" and mask is None:
            errors.append(f"{where}: mask mode requires a segmentation")
        if config.mode == "box" and box is None:
            errors.append(f"{where}: box mode requires a bbox")
        dets.append(Detection(ordinal=i, image_id=image_id, category_id=category_id,
                              score=score, box=box, mask=mask))
    _raise_if(errors, path)
    return DetectionSet(truncate_detections(dets, config.max_dets_per_image))


def truncate_detections(dets, max_per_image: int) -> list:
    """Keep the top ``max_per_image`` per image by (score desc, ordinal asc),
    preserving ingestion order among survivors."""
    by_image: dict[int, list[Detection]] = {}
    for det in dets:
        by_image.setdefault(det.image_id, []).append(det)
    keep = set()
    for image_dets in by_image.values():
        ranked = sorted(image_dets, key=Detection.sort_key)
        keep.update(d.ordinal for d in ranked[:max_per_image])
    return [d for d in dets if d.ordinal in keep]


def save_detections(dets: DetectionSet, path) -> None:
    doc = []
    for det in dets.detections:
        rec = {"image_id": det.image_id, "category_id": det.category_id,
               "score": det.score}
        if det.box is not None:
            rec["bbox"] = [det.box.x, det.box.y, det.box.w, det.box.h]
        if det.mask is not None:
            rec["segmentation"] = _mask_doc(det.mask)
        doc.append(rec)
    _write_json(doc, path)


def config_replace(config: EvalConfig, **kw) -> EvalConfig:
    return replace(config, **kw)
