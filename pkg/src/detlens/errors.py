"""Classifying unmatched detections and ground truth into error kinds.

Every false positive gets exactly one kind, decided at the operating
point (foreground_iou, background_iou) with overlaps measured against
all non-crowd GT in the image, matched or not:

  loc   same-category overlap in [background, foreground)
  cls   other-category overlap at/above foreground
  dupe  same-category overlap at/above foreground (its GT already taken)
  both  other-category overlap in [background, foreground)
  bkg   nothing above background anywhere

checked in that order; the first hit wins. Localization outranks
classification, and a detection at/above foreground on both its own and
another category reads as a duplicate, not a localization error.

Unmatched GT targeted by a cls or loc record is covered (fixing those
detections would recover it); the rest are missed. Crowd regions are
never targets and never missed.
"""

import random
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .apcore import IGNORE_CATEGORY, Matcher, average_precision, pr_curve
from .dataset import Dataset, DetectionSet, EvalConfig
from .geometry import iou_matrix


class ErrorKind(str, Enum):
    CLS = "cls"
    LOC = "loc"
    BOTH = "both"
    DUPE = "dupe"
    BKG = "bkg"
    MISS = "miss"
    # aggregate views, not part of the per-detection partition
    FP = "fp"
    FN = "fn"


MAIN_KINDS = (ErrorKind.CLS, ErrorKind.LOC, ErrorKind.BOTH, ErrorKind.DUPE,
              ErrorKind.BKG, ErrorKind.MISS)
DET_KINDS = (ErrorKind.CLS, ErrorKind.LOC, ErrorKind.BOTH, ErrorKind.DUPE,
             ErrorKind.BKG)


@dataclass(frozen=True)
class ErrorRecord:
    kind: ErrorKind
    detection: object = None  # None for missed GT
    gt: object = None  # target GT for cls/loc/both/dupe, the GT for miss
    iou_same: float = 0.0
    iou_other: float = 0.0
    det_ignored: bool = False  # cls record for an ignored detection

    @property
    def image_id(self) -> int:
        return self.detection.image_id if self.detection is not None else self.gt.image_id

    @property
    def category_id(self) -> int:
        """The detection's category, or the GT's for missed records."""
        return (self.detection.category_id if self.detection is not None
                else self.gt.category_id)

    def area(self, mode: str) -> float:
        """Pixel area used for attribute binning: the GT when the record
        has one, otherwise the detection."""
        obj = self.gt if self.gt is not None else self.detection
        if mode == "mask" and obj.mask is not None:
            return float(obj.mask.area)
        return obj.box.area


@dataclass
class ErrorLedger:
    config: EvalConfig
    records: list
    tables: dict  # category_id -> MatchTable at foreground_iou
    covered: dict  # unmatched GT id -> list of cls/loc records targeting it
    ap_per_category: dict  # category_id -> AP at foreground_iou
    ap: float  # mean over categories

    @property
    def counts(self) -> dict:
        out = {kind: 0 for kind in MAIN_KINDS}
        for rec in self.records:
            out[rec.kind] += 1
        return out

    def records_of(self, kind: ErrorKind) -> list:
        return [r for r in self.records if r.kind == kind]

    def missed_gt_ids(self, category_id: Optional[int] = None) -> list:
        return [r.gt.id for r in self.records
                if r.kind == ErrorKind.MISS
                and (category_id is None or r.gt.category_id == category_id)]

    def false_negative_gt_ids(self, category_id: int) -> set:
        """Missed plus covered GT for one category: everything unmatched."""
        ids = set(self.missed_gt_ids(category_id))
        for gt_id, recs in self.covered.items():
            if recs[0].gt.category_id == category_id:
                ids.add(gt_id)
        return ids


def _argmax_by_id(ious: np.ndarray, mask: np.ndarray) -> int:
    """Index of the maximum among masked entries; first (lowest GT id)
    wins ties. -1 when the mask is empty."""
    if not mask.any():
        return -1
    masked = np.where(mask, ious, -1.0)
    return int(np.argmax(masked))


def classify_errors(dets: DetectionSet, gts: Dataset, config: EvalConfig = EvalConfig(),
                    matcher: Optional[Matcher] = None,
                    threads: Optional[int] = None) -> ErrorLedger:
    """Match at the foreground threshold and put every unmatched
    detection and GT into the taxonomy. Also freezes per-category AP at
    the operating point, which the counterfactuals diff against."""
    t_f = config.foreground_iou
    t_b = config.background_iou
    categories = gts.evaluable_categories()
    if not categories:
        raise ValueError("no evaluable categories: every category has zero ground truth")
    if matcher is None:
        matcher = Matcher(dets, gts, config, threads=threads)
    tables = {cat: matcher.match(cat, t_f) for cat in categories}
    ap_per_category = {cat: average_precision(pr_curve(tables[cat]))
                       for cat in categories}

    # candidate detections per image: the regular false positives, plus
    # category-ignored ones that may still explain a cross-class GT
    fp_by_image: dict[int, list] = {}
    ignored_cls_eligible: set[int] = set()
    for cat in categories:
        table = tables[cat]
        for det in table.unmatched_dets():
            fp_by_image.setdefault(det.image_id, []).append(det)
        if config.use_ignored_for_errors:
            for det in table.ignored_dets(IGNORE_CATEGORY):
                fp_by_image.setdefault(det.image_id, []).append(det)
                ignored_cls_eligible.add(det.ordinal)

    evaluable = set(categories)
    det_records: list[ErrorRecord] = []
    for image_id in sorted(fp_by_image):
        image_dets = sorted(fp_by_image[image_id], key=lambda d: d.ordinal)
        image_gts = sorted((g for g in (gt for cat in evaluable
                                        for gt in gts.gts_in(image_id, cat))
                            if not g.is_crowd), key=lambda g: g.id)
        gt_cats = np.array([g.category_id for g in image_gts], dtype=np.int64)
        mode = config.mode
        ious = iou_matrix([d.geometry(mode) for d in image_dets],
                          [g.mask if mode == "mask" else g.box for g in image_gts],
                          [False] * len(image_gts), mode)
        for i, det in enumerate(image_dets):
            same = gt_cats == det.category_id
            other = ~same
            j_same = _argmax_by_id(ious[i], same)
            j_other = _argmax_by_id(ious[i], other)
            iou_same = float(ious[i, j_same]) if j_same >= 0 else 0.0
            iou_other = float(ious[i, j_other]) if j_other >= 0 else 0.0
            if det.ordinal in ignored_cls_eligible:
                if iou_other >= t_f:
                    det_records.append(ErrorRecord(
                        kind=ErrorKind.CLS, detection=det, gt=image_gts[j_other],
                        iou_same=iou_same, iou_other=iou_other, det_ignored=True))
                continue
            if t_b <= iou_same < t_f:
                kind, target = ErrorKind.LOC, image_gts[j_same]
            elif iou_other >= t_f:
                kind, target = ErrorKind.CLS, image_gts[j_other]
            elif iou_same >= t_f:
                kind, target = ErrorKind.DUPE, image_gts[j_same]
            elif t_b <= iou_other < t_f:
                kind, target = ErrorKind.BOTH, image_gts[j_other]
            else:
                kind, target = ErrorKind.BKG, None
            det_records.append(ErrorRecord(kind=kind, detection=det, gt=target,
                                           iou_same=iou_same, iou_other=iou_other))
    det_records.sort(key=lambda r: r.detection.ordinal)

    # coverage: unmatched GT explained by a cls/loc detection
    matched_gt_ids = {gt_id for table in tables.values() for gt_id in table.gt_matched}
    covered: dict[int, list] = {}
    for rec in det_records:
        if rec.kind in (ErrorKind.CLS, ErrorKind.LOC) and rec.gt.id not in matched_gt_ids:
            covered.setdefault(rec.gt.id, []).append(rec)

    miss_records = [
        ErrorRecord(kind=ErrorKind.MISS, gt=gt)
        for gt in gts.instances
        if gt.category_id in evaluable and not gt.is_crowd
        and gt.id not in matched_gt_ids and gt.id not in covered]
    miss_records.sort(key=lambda r: (r.gt.category_id, r.gt.id))

    ledger = ErrorLedger(config=config, records=det_records + miss_records,
                         tables=tables, covered=covered,
                         ap_per_category=ap_per_category,
                         ap=float(np.mean(list(ap_per_category.values()))))
    _check_accounting(ledger, gts)
    return ledger


def _check_accounting(ledger: ErrorLedger, gts: Dataset) -> None:
    # partition: one record per unmatched non-ignored detection
    for cat, table in ledger.tables.items():
        fp = {d.ordinal for d in table.unmatched_dets()}
        recorded = [r.detection.ordinal for r in ledger.records
                    if r.detection is not None and not r.det_ignored
                    and r.detection.category_id == cat]
        assert len(recorded) == len(set(recorded)), \
            f"category {cat}: a detection carries two error records"
        assert set(recorded) == fp, \
            f"category {cat}: error records do not cover the false positives"
        # every unmatched non-crowd GT is either missed or covered
        missed = set(ledger.missed_gt_ids(cat))
        fn = ledger.false_negative_gt_ids(cat)
        assert missed <= fn
        assert len(fn) == table.n_gt - table.tp_count, \
            f"category {cat}: FN accounting mismatch"


def split_special(ledger: ErrorLedger) -> tuple:
    """(false positive records, false negative GT ids) across categories."""
    fps = [r for r in ledger.records if r.detection is not None and not r.det_ignored]
    fns = set()
    for cat in ledger.tables:
        fns |= ledger.false_negative_gt_ids(cat)
    return fps, fns


def top_errors(ledger: ErrorLedger, kind: ErrorKind, k: int = 10) -> list:
    """Most confident k records of a kind; missed GT has no confidence,
    so a seeded sample stands in."""
    records = ledger.records_of(kind)
    if kind == ErrorKind.MISS:
        rng = random.Random(ledger.config.rng_seed)
        return rng.sample(records, min(k, len(records)))
    ranked = sorted(records, key=lambda r: (-r.detection.score, r.detection.ordinal))
    return ranked[:k]
