"""Greedy matching, precision-recall curves, and average precision.

Detections are processed per (image, category) in score order (ties by
ingestion order) and greedily take the highest-IoU free ground truth at
or above the threshold, lowest GT id on ties. Detections that fail the
regular match may then be flagged ignored by a same-category crowd
region or by an image whose annotations for that category are known
incomplete; ignored detections leave the PR curve entirely.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import Dataset, Detection, DetectionSet, EvalConfig
from .geometry import iou_matrix

RECALL_GRID = np.arange(101) / 100.0

IGNORE_CROWD = "crowd"
IGNORE_CATEGORY = "category"


@dataclass
class MatchTable:
    """Match outcome for one category at one IoU threshold, all images."""

    category_id: int
    threshold: float
    detections: list  # every detection of the category, globally rank-sorted
    matched: dict  # det ordinal -> gt id
    gt_matched: dict  # gt id -> det ordinal
    ignored: dict  # det ordinal -> reason, for unmatched ignorable dets
    n_gt: int  # non-crowd GT count

    @property
    def tp_count(self) -> int:
        return len(self.matched)

    def unmatched_dets(self, include_ignored: bool = False) -> list:
        return [d for d in self.detections if d.ordinal not in self.matched
                and (include_ignored or d.ordinal not in self.ignored)]

    def ignored_dets(self, reason: Optional[str] = None) -> list:
        return [d for d in self.detections if d.ordinal in self.ignored
                and (reason is None or self.ignored[d.ordinal] == reason)]


@dataclass
class PRCurve:
    category_id: int
    threshold: float
    n_gt: int
    tp: np.ndarray  # per ranked non-ignored detection
    scores: np.ndarray
    interpolated: np.ndarray  # precision at the 101-point recall grid

    @property
    def recall(self) -> np.ndarray:
        return np.cumsum(self.tp) / self.n_gt

    @property
    def precision(self) -> np.ndarray:
        hits = np.cumsum(self.tp)
        return hits / np.arange(1, len(self.tp) + 1)


@dataclass
class EvalResult:
    config: EvalConfig
    thresholds: tuple
    categories: tuple
    ap: dict  # (threshold, category_id) -> AP in [0, 100]
    ap_per_threshold: dict  # threshold -> mean over categories
    mean_ap: float

    def curve_count(self) -> int:
        return len(self.ap)


class Matcher:
    """Caches per-(image, category) rank order and IoU matrices so that
    matching at many thresholds reuses one geometry pass."""

    def __init__(self, dets: DetectionSet, gts: Dataset, config: EvalConfig,
                 threads: Optional[int] = None):
        self.dets = dets
        self.gts = gts
        self.config = config
        self._cells: dict[tuple[int, int], tuple] = {}
        keys = sorted(set(dets._by_image_cat) | set(gts._by_image_cat))
        if threads and threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                cells = list(pool.map(self._build_cell, keys))
        else:
            cells = [self._build_cell(k) for k in keys]
        self._cells = dict(zip(keys, cells))

    def _build_cell(self, key):
        image_id, category_id = key
        mode = self.config.mode
        dets = sorted(self.dets.dets_in(image_id, category_id), key=Detection.sort_key)
        gts = self.gts.gts_in(image_id, category_id)
        normal = sorted((g for g in gts if not g.is_crowd), key=lambda g: g.id)
        crowds = sorted((g for g in gts if g.is_crowd), key=lambda g: g.id)
        det_geoms = [d.geometry(mode) for d in dets]
        iou = iou_matrix(det_geoms, [g.mask if mode == "mask" else g.box for g in normal],
                         [False] * len(normal), mode)
        crowd_iou = iou_matrix(det_geoms,
                               [g.mask if mode == "mask" else g.box for g in crowds],
                               [True] * len(crowds), mode)
        return dets, normal, crowds, iou, crowd_iou

    def match(self, category_id: int, threshold: float) -> MatchTable:
        matched: dict[int, int] = {}
        gt_matched: dict[int, int] = {}
        ignored: dict[int, str] = {}
        all_dets: list[Detection] = []
        for (image_id, cat), cell in self._cells.items():
            if cat != category_id:
                continue
            dets, normal, crowds, iou, crowd_iou = cell
            meta = self.gts.images[image_id]
            category_ignorable = (category_id in meta.not_exhaustive
                                  and category_id not in meta.verified_absent)
            taken = np.zeros(len(normal), dtype=bool)
            for i, det in enumerate(dets):
                all_dets.append(det)
                best_j = -1
                best_iou = 0.0
                for j in range(len(normal)):
                    if taken[j]:
                        continue
                    v = iou[i, j]
                    if v >= threshold and v > best_iou:
                        best_iou = v
                        best_j = j
                if best_j >= 0:
                    taken[best_j] = True
                    matched[det.ordinal] = normal[best_j].id
                    gt_matched[normal[best_j].id] = det.ordinal
                    continue
                if len(crowds) and crowd_iou[i].max() >= threshold:
                    ignored[det.ordinal] = IGNORE_CROWD
                elif category_ignorable:
                    ignored[det.ordinal] = IGNORE_CATEGORY
        all_dets.sort(key=Detection.sort_key)
        return MatchTable(category_id=category_id, threshold=threshold,
                          detections=all_dets, matched=matched,
                          gt_matched=gt_matched, ignored=ignored,
                          n_gt=self.gts.n_gt(category_id))


def pr_curve(table: MatchTable, n_gt: Optional[int] = None) -> PRCurve:
    """Build the interpolated curve from a match table.

    ``n_gt`` overrides the recall denominator (counterfactuals shrink it).
    """
    denom = table.n_gt if n_gt is None else n_gt
    if denom <= 0:
        raise ValueError(f"category {table.category_id} has no ground truth")
    ranked = [d for d in table.detections if d.ordinal not in table.ignored]
    tp = np.array([d.ordinal in table.matched for d in ranked], dtype=np.float64)
    scores = np.array([d.score for d in ranked], dtype=np.float64)
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(1.0 - tp)
    recall = tp_cum / denom
    with np.errstate(invalid="ignore"):
        precision = tp_cum / (tp_cum + fp_cum)
    # right-to-left running max: precision achievable at >= this recall
    envelope = np.maximum.accumulate(precision[::-1])[::-1] if len(precision) else precision
    idx = np.searchsorted(recall, RECALL_GRID, side="left")
    interpolated = np.zeros(101, dtype=np.float64)
    valid = idx < len(envelope)
    interpolated[valid] = envelope[idx[valid]]
    return PRCurve(category_id=table.category_id, threshold=table.threshold,
                   n_gt=denom, tp=tp, scores=scores, interpolated=interpolated)


def average_precision(curve: PRCurve) -> float:
    """Mean interpolated precision over the recall grid, scaled to [0, 100]."""
    return float(curve.interpolated.mean() * 100.0)


def category_ap(matcher: Matcher, category_id: int, threshold: float,
                n_gt: Optional[int] = None) -> float:
    return average_precision(pr_curve(matcher.match(category_id, threshold), n_gt))


def evaluate(dets: DetectionSet, gts: Dataset, config: EvalConfig = EvalConfig(),
             threads: Optional[int] = None) -> EvalResult:
    """AP per (threshold, category) plus the usual means.

    Categories without ground truth are excluded everywhere; an empty
    category set is an error.
    """
    categories = tuple(gts.evaluable_categories())
    if not categories:
        raise ValueError("no evaluable categories: every category has zero ground truth")
    matcher = Matcher(dets, gts, config, threads=threads)
    ap: dict[tuple, float] = {}

    def one(job):
        threshold, cat = job
        return job, category_ap(matcher, cat, threshold)

    jobs = [(t, c) for t in config.iou_thresholds for c in categories]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    for job, value in sorted(results, key=lambda r: r[0]):
        ap[job] = value
    ap_per_threshold = {t: float(np.mean([ap[(t, c)] for c in categories]))
                        for t in config.iou_thresholds}
    mean_ap = float(np.mean(list(ap_per_threshold.values())))
    return EvalResult(config=config, thresholds=tuple(config.iou_thresholds),
                      categories=categories, ap=ap,
                      ap_per_threshold=ap_per_threshold, mean_ap=mean_ap)


def map_at_threshold(dets: DetectionSet, gts: Dataset, config: EvalConfig,
                     threshold: Optional[float] = None,
                     n_gt_override: Optional[dict] = None,
                     matcher: Optional[Matcher] = None,
                     threads: Optional[int] = None) -> float:
    """Mean AP over evaluable categories at a single threshold.

    ``n_gt_override`` replaces recall denominators per category; a zero
    entry drops the category. All categories dropped means there is
    nothing left to get wrong, which scores 100.
    """
    if threshold is None:
        threshold = config.foreground_iou
    if matcher is None:
        matcher = Matcher(dets, gts, config, threads=threads)
    values = []
    for cat in gts.evaluable_categories():
        n_gt = gts.n_gt(cat)
        if n_gt_override is not None and cat in n_gt_override:
            n_gt = n_gt_override[cat]
        if n_gt <= 0:
            continue
        values.append(category_ap(matcher, cat, threshold, n_gt))
    return float(np.mean(values)) if values else 100.0
