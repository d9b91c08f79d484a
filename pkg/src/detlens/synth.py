"""Synthetic ground truth / detection pairs with known error content.

Each requested unit (a clean hit or one specific error) is planted in
its own cell of a sparse grid, with margins wide enough that nothing
overlaps across cells. That spatial isolation makes the expected error
counts exact, which is what the recovery tests lean on.

Boxes are integer-aligned and away from canvas edges, so the optional
masks rasterize losslessly and mask-mode runs reproduce box-mode IoU
digit for digit.
"""

import math
import random
from dataclasses import dataclass

from .dataset import Category, Dataset, Detection, DetectionSet, EvalConfig, GroundTruth, ImageMeta
from .errors import ErrorKind
from .geometry import Box, box_to_mask

CELL = 64
MARGIN = 8

CALIBRATIONS = ("well_calibrated", "inverted", "uniform")


@dataclass(frozen=True)
class ErrorBudget:
    tp: int = 10
    cls: int = 0
    loc: int = 0
    both: int = 0
    dupe: int = 0
    bkg: int = 0
    missed: int = 0
    images: int = 4
    classes: int = 3
    calibration: str = "well_calibrated"
    with_masks: bool = True
    seed: int = 0

    def units(self) -> int:
        return self.tp + self.cls + self.loc + self.both + self.dupe + self.bkg + self.missed

    def gt_units(self) -> int:
        return self.units() - self.bkg

    def validate(self) -> None:
        counts = (self.tp, self.cls, self.loc, self.both, self.dupe, self.bkg,
                  self.missed)
        if any(c < 0 for c in counts):
            raise ValueError("budget counts must be non-negative")
        if self.units() == 0:
            raise ValueError("budget is empty")
        if self.images < 1 or self.classes < 1:
            raise ValueError("need at least one image and one class")
        if (self.cls or self.both) and self.classes < 2:
            raise ValueError("cls and both units need a second class to confuse")
        if self.gt_units() < self.classes:
            raise ValueError(
                f"{self.classes} classes need {self.classes} GT-bearing units, "
                f"budget has {self.gt_units()}; classes without GT are not evaluated")
        if self.calibration not in CALIBRATIONS:
            raise ValueError(f"unknown calibration {self.calibration!r}")


def _loc_shift(width: int, t_b: float, t_f: float, rng: random.Random) -> int:
    """Horizontal shift putting two width x h boxes at IoU inside
    [t_b, t_f). IoU of the shifted pair is (w - dx) / (w + dx)."""
    target = rng.uniform(t_b + 0.02, t_f - 0.02)
    dx = round(width * (1.0 - target) / (1.0 + target))
    for candidate in (dx, dx + 1, dx - 1, dx + 2):
        if 0 < candidate < width:
            iou = (width - candidate) / (width + candidate)
            if t_b <= iou < t_f:
                return candidate
    raise AssertionError(f"no integer shift reaches [{t_b}, {t_f}) for width {width}")


def generate(budget: ErrorBudget, config: EvalConfig = EvalConfig()):
    """Build (dataset, detections, expected error counts) for a budget.

    The expected counts are what ``classify_errors`` must report when run
    with the same config; generation is deterministic in the seed.
    """
    budget.validate()
    rng = random.Random(budget.seed)
    t_b, t_f = config.background_iou, config.foreground_iou

    units = (["tp"] * budget.tp + ["cls"] * budget.cls + ["loc"] * budget.loc
             + ["both"] * budget.both + ["dupe"] * budget.dupe
             + ["bkg"] * budget.bkg + ["missed"] * budget.missed)
    rng.shuffle(units)

    # every class must own at least one GT unit, or its confusions vanish
    # from the analysis; pin the first occurrences, randomize the rest
    gt_unit_idx = [i for i, u in enumerate(units) if u != "bkg"]
    pinned = rng.sample(gt_unit_idx, budget.classes)
    classes = list(range(1, budget.classes + 1))
    unit_class = {}
    for cls_id, idx in zip(classes, pinned):
        unit_class[idx] = cls_id
    for i in range(len(units)):
        if i not in unit_class:
            unit_class[i] = rng.choice(classes)

    capacity = math.ceil(len(units) / budget.images)
    side = math.ceil(math.sqrt(capacity))
    canvas = side * CELL

    def score(kind_is_hit: bool) -> float:
        lo, hi = (0.60, 0.95) if kind_is_hit else (0.10, 0.55)
        if budget.calibration == "inverted":
            kind_is_hit = not kind_is_hit
            lo, hi = (0.60, 0.95) if kind_is_hit else (0.10, 0.55)
        elif budget.calibration == "uniform":
            lo, hi = 0.10, 0.95
        return round(rng.uniform(lo, hi), 6)

    images = [ImageMeta(id=i + 1, width=canvas, height=canvas)
              for i in range(budget.images)]
    instances: list[GroundTruth] = []
    detections: list[Detection] = []
    expected = {k: 0 for k in (ErrorKind.CLS, ErrorKind.LOC, ErrorKind.BOTH,
                               ErrorKind.DUPE, ErrorKind.BKG, ErrorKind.MISS)}
    next_gt = 1

    def add_gt(image_id: int, cat: int, box: Box) -> GroundTruth:
        nonlocal next_gt
        mask = box_to_mask(box, canvas, canvas) if budget.with_masks else None
        gt = GroundTruth(id=next_gt, image_id=image_id, category_id=cat, box=box,
                         mask=mask, area=float(mask.area) if mask else box.area)
        next_gt += 1
        instances.append(gt)
        return gt

    def add_det(image_id: int, cat: int, box: Box, hit: bool) -> None:
        mask = box_to_mask(box, canvas, canvas) if budget.with_masks else None
        detections.append(Detection(ordinal=len(detections), image_id=image_id,
                                    category_id=cat, score=score(hit), box=box,
                                    mask=mask))

    def other_class(cat: int) -> int:
        return rng.choice([c for c in classes if c != cat])

    for i, unit in enumerate(units):
        image_id = i // capacity + 1
        slot = i % capacity
        ox = (slot % side) * CELL + MARGIN
        oy = (slot // side) * CELL + MARGIN
        cat = unit_class[i]
        w = rng.randint(20, 28)
        h = rng.randint(20, 28)
        box = Box(float(ox), float(oy), float(w), float(h))
        if unit == "tp":
            add_gt(image_id, cat, box)
            add_det(image_id, cat, box, hit=True)
        elif unit == "cls":
            add_gt(image_id, cat, box)
            add_det(image_id, other_class(cat), box, hit=False)
            expected[ErrorKind.CLS] += 1
        elif unit == "loc":
            add_gt(image_id, cat, box)
            dx = _loc_shift(w, t_b, t_f, rng)
            add_det(image_id, cat, Box(float(ox + dx), float(oy), float(w), float(h)),
                    hit=False)
            expected[ErrorKind.LOC] += 1
        elif unit == "both":
            # companion hit keeps the GT matched, so the error stays 'both'
            add_gt(image_id, cat, box)
            add_det(image_id, cat, box, hit=True)
            dx = _loc_shift(w, t_b, t_f, rng)
            add_det(image_id, other_class(cat),
                    Box(float(ox + dx), float(oy), float(w), float(h)), hit=False)
            expected[ErrorKind.BOTH] += 1
        elif unit == "dupe":
            add_gt(image_id, cat, box)
            add_det(image_id, cat, box, hit=True)
            add_det(image_id, cat, box, hit=False)
            expected[ErrorKind.DUPE] += 1
        elif unit == "bkg":
            add_det(image_id, cat, box, hit=False)
            expected[ErrorKind.BKG] += 1
        elif unit == "missed":
            add_gt(image_id, cat, box)
            expected[ErrorKind.MISS] += 1

    categories = [Category(id=c, name=f"class_{c:02d}") for c in classes]
    dataset = Dataset(categories, images, instances)
    return dataset, DetectionSet(detections), expected


def random_budget(seed: int, max_images: int = 8, max_classes: int = 5,
                  max_per_kind: int = 6) -> ErrorBudget:
    """A feasible random budget; property tests sweep these by seed."""
    rng = random.Random(seed)
    classes = rng.randint(2, max_classes)
    budget = ErrorBudget(
        tp=rng.randint(classes, classes + 8),  # enough GT units for every class
        cls=rng.randint(0, max_per_kind),
        loc=rng.randint(0, max_per_kind),
        both=rng.randint(0, max_per_kind),
        dupe=rng.randint(0, max_per_kind),
        bkg=rng.randint(0, max_per_kind),
        missed=rng.randint(0, max_per_kind),
        images=rng.randint(1, max_images),
        classes=classes,
        calibration=rng.choice(list(CALIBRATIONS)),
        seed=seed,
    )
    budget.validate()
    return budget
