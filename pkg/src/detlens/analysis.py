"""Slicing error weights by object attributes, and threshold sweeps.

An attribute slice restricts an oracle to the error records satisfying
a predicate; the delta then measures how much that slice of the error
kind costs. Scale uses the usual five area bins.
"""

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

from .apcore import Matcher, map_at_threshold
from .dataset import Dataset, DetectionSet, EvalConfig
from .errors import MAIN_KINDS, ErrorLedger, ErrorRecord, classify_errors
from .oracles import MAIN_ORACLES, SPECIAL_ORACLES, Oracle, delta_ap

# area edges in pixels: 16^2, 32^2, 96^2, 288^2
SCALE_EDGES = {
    "xs": (0.0, 256.0),
    "s": (256.0, 1024.0),
    "m": (1024.0, 9216.0),
    "l": (9216.0, 82944.0),
    "xl": (82944.0, float("inf")),
}
SCALE_ORDER = ("xs", "s", "m", "l", "xl")

Predicate = Callable[[ErrorRecord], bool]


def scale_of(area: float) -> str:
    for name in SCALE_ORDER:
        lo, hi = SCALE_EDGES[name]
        if lo <= area < hi:
            return name
    raise ValueError(f"area {area} fits no scale bin")


def scale_predicate(name: str, mode: str) -> Predicate:
    if name not in SCALE_EDGES:
        raise ValueError(f"unknown scale bin {name!r}")
    lo, hi = SCALE_EDGES[name]
    return lambda rec: lo <= rec.area(mode) < hi


def category_predicate(category_ids) -> Predicate:
    wanted = frozenset(category_ids)
    return lambda rec: rec.category_id in wanted


def area_predicate(lo: float, hi: float, mode: str) -> Predicate:
    return lambda rec: lo <= rec.area(mode) < hi


def attribute_delta_ap(dets: DetectionSet, gts: Dataset, ledger: ErrorLedger,
                       oracle: Oracle, predicate: Predicate,
                       threads: Optional[int] = None) -> float:
    """Delta AP from fixing only the records that satisfy the predicate."""
    restricted = [r for r in ledger.records if predicate(r)]
    return delta_ap(dets, gts, ledger, oracle, records=restricted, threads=threads)


@dataclass
class ScaleTable:
    mode: str
    cells: dict  # (bin name, ErrorKind) -> delta AP

    def row(self, name: str) -> dict:
        return {kind: self.cells[(name, kind)] for kind in MAIN_KINDS
                if (name, kind) in self.cells}


def scale_report(dets: DetectionSet, gts: Dataset, ledger: ErrorLedger,
                 kinds: Sequence[Oracle] = MAIN_ORACLES,
                 threads: Optional[int] = None) -> ScaleTable:
    """Per-scale-bin isolated deltas, one column per error kind."""
    mode = ledger.config.mode
    cells = {}
    for name in SCALE_ORDER:
        pred = scale_predicate(name, mode)
        for oracle in kinds:
            cells[(name, oracle)] = attribute_delta_ap(
                dets, gts, ledger, oracle, pred, threads=threads)
    return ScaleTable(mode=mode, cells=cells)


def subset_ap(dets: DetectionSet, gts: Dataset, predicate,
              config: EvalConfig = EvalConfig(),
              threads: Optional[int] = None) -> float:
    """AP at the operating threshold on the instances and detections that
    satisfy an object-level predicate. Crowd regions are filtered too."""
    instances = [g for g in gts.instances if predicate(g)]
    filtered_gts = Dataset(gts.categories.values(), gts.images.values(), instances)
    if not filtered_gts.evaluable_categories():
        raise ValueError("no evaluable categories in the selected subset")
    kept = [d for d in dets.detections if predicate(d)]
    return map_at_threshold(DetectionSet(kept, dets.transformed_by), filtered_gts,
                            config, config.foreground_iou, threads=threads)


@dataclass
class SweepRow:
    foreground_iou: float
    ap: float
    main: dict  # Oracle -> delta
    special: dict  # Oracle -> delta


def threshold_sweep(dets: DetectionSet, gts: Dataset, config: EvalConfig,
                    foreground_thresholds: Sequence[float],
                    threads: Optional[int] = None) -> list:
    """Re-run the decomposition at several operating thresholds.

    The geometry cache is shared across the sweep; each threshold gets
    its own ledger and deltas.
    """
    matcher = Matcher(dets, gts, config, threads=threads)
    rows = []
    for t_f in foreground_thresholds:
        cfg = replace(config, foreground_iou=t_f)
        ledger = classify_errors(dets, gts, cfg, matcher=matcher, threads=threads)
        main = {o: delta_ap(dets, gts, ledger, o, threads=threads)
                for o in MAIN_ORACLES}
        special = {o: delta_ap(dets, gts, ledger, o, threads=threads)
                   for o in SPECIAL_ORACLES}
        rows.append(SweepRow(foreground_iou=t_f, ap=ledger.ap, main=main,
                             special=special))
    return rows
