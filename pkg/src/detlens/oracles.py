"""Counterfactual fixes and their AP deltas.

Each oracle edits the detection set (or the recall denominators) as if
one error kind had not happened, then the edited run is rescored from
scratch at the operating threshold. The weight of an error kind is the
AP gained by fixing it in isolation.

Fix-style oracles (cls, loc) can hand several detections to one GT;
only the strongest claimant survives, the rest are dropped. That keeps
a full fix of every kind at exactly 100 AP: afterwards each counted GT
pairs with exactly one detection.

Oracles compose. A joint application resolves all requested kinds from
the same original ledger in one pass, which is what the conditional
(progressive) deltas are built on.
"""

import random
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

from .apcore import map_at_threshold
from .dataset import Dataset, Detection, DetectionSet, EvalConfig
from .errors import ErrorKind, ErrorLedger


class Oracle(str, Enum):
    CLS = "cls"
    LOC = "loc"
    BOTH = "both"
    DUPE = "dupe"
    BKG = "bkg"
    MISSED = "miss"
    FP = "fp"
    FN = "fn"


MAIN_ORACLES = (Oracle.CLS, Oracle.LOC, Oracle.BOTH, Oracle.DUPE, Oracle.BKG,
                Oracle.MISSED)
SPECIAL_ORACLES = (Oracle.FP, Oracle.FN)

_SUPPRESSIBLE = (ErrorKind.BOTH, ErrorKind.DUPE, ErrorKind.BKG)


@dataclass
class OracleOutcome:
    detections: DetectionSet
    n_gt_override: dict  # category -> effective GT count; empty if untouched
    applied: tuple


def apply_oracle(dets: DetectionSet, gts: Dataset, ledger: ErrorLedger,
                 oracle: Oracle, records: Optional[list] = None) -> OracleOutcome:
    return apply_oracles(dets, gts, ledger, (oracle,), records=records)


def apply_oracles(dets: DetectionSet, gts: Dataset, ledger: ErrorLedger,
                  oracles: Sequence[Oracle],
                  records: Optional[list] = None) -> OracleOutcome:
    """Resolve the requested error kinds against the original run.

    ``records`` restricts the fix to a subset of the ledger (attribute
    slicing); default is every record. Detections already produced by an
    oracle cannot be transformed again.
    """
    if dets.transformed_by:
        raise ValueError(f"detections already transformed by {dets.transformed_by}")
    requested = tuple(dict.fromkeys(oracles))
    if records is None:
        records = ledger.records
    config = ledger.config

    suppress: set[int] = set()
    reclass: dict[int, int] = {}
    relocate: dict[int, object] = {}
    removed_gt: dict[int, set] = {}  # category -> gt ids taken out of the count
    missed_for_injection: list = []

    def drop_gt(gt) -> None:
        removed_gt.setdefault(gt.category_id, set()).add(gt.id)

    for rec in records:
        if rec.kind == ErrorKind.CLS and Oracle.CLS in requested:
            reclass[rec.detection.ordinal] = rec.gt.category_id
        elif rec.kind == ErrorKind.LOC and Oracle.LOC in requested:
            relocate[rec.detection.ordinal] = rec.gt
        elif rec.kind in _SUPPRESSIBLE and Oracle(rec.kind.value) in requested:
            suppress.add(rec.detection.ordinal)
        if rec.kind == ErrorKind.MISS and Oracle.MISSED in requested:
            if config.missed_gt_oracle == "remove_gt":
                drop_gt(rec.gt)
            else:
                missed_for_injection.append(rec.gt)
        if Oracle.FP in requested and rec.detection is not None and not rec.det_ignored:
            if rec.detection.ordinal not in reclass and rec.detection.ordinal not in relocate:
                suppress.add(rec.detection.ordinal)
        if Oracle.FN in requested and rec.gt is not None and not rec.gt.is_crowd:
            table = ledger.tables[rec.gt.category_id]
            if rec.kind == ErrorKind.MISS or (
                    rec.kind in (ErrorKind.CLS, ErrorKind.LOC)
                    and rec.gt.id not in table.gt_matched):
                drop_gt(rec.gt)

    # a GT removed from the count must not also receive a synthetic hit
    if removed_gt:
        dropped = {g for ids in removed_gt.values() for g in ids}
        missed_for_injection = [g for g in missed_for_injection if g.id not in dropped]

    # fixes outrank blanket suppression: a reclassed/relocated detection
    # stays even when the FP oracle runs alongside
    suppress -= set(reclass) | set(relocate)

    _dedupe_claims(dets, ledger, reclass, relocate, suppress)

    by_ordinal = {d.ordinal: d for d in dets.detections}
    out: list[Detection] = []
    for det in dets.detections:
        if det.ordinal in suppress:
            continue
        if det.ordinal in reclass:
            det = replace(det, category_id=reclass[det.ordinal])
        elif det.ordinal in relocate:
            gt = relocate[det.ordinal]
            det = replace(det, box=gt.box,
                          mask=gt.mask if gt.mask is not None else det.mask)
        out.append(det)
    out.extend(_injections(dets, missed_for_injection, config, by_ordinal))

    override = {cat: gts.n_gt(cat) - len(ids) for cat, ids in removed_gt.items()}
    applied = tuple(o.value for o in requested)
    return OracleOutcome(detections=DetectionSet(out, transformed_by=applied),
                         n_gt_override=override, applied=applied)


def _dedupe_claims(dets: DetectionSet, ledger: ErrorLedger, reclass: dict,
                   relocate: dict, suppress: set) -> None:
    """One surviving claimant per GT: the original match plus any fixed
    detections aimed at it compete on rank; losers are suppressed."""
    claims: dict[int, list] = {}
    by_ordinal = {d.ordinal: d for d in dets.detections}
    for rec in ledger.records:
        ordinal = rec.detection.ordinal if rec.detection is not None else None
        if ordinal in reclass and rec.kind == ErrorKind.CLS:
            claims.setdefault(rec.gt.id, []).append(by_ordinal[ordinal])
        elif ordinal in relocate and rec.kind == ErrorKind.LOC:
            claims.setdefault(rec.gt.id, []).append(by_ordinal[ordinal])
    if not claims:
        return
    for cat, table in ledger.tables.items():
        for gt_id, det_ordinal in table.gt_matched.items():
            if gt_id in claims:
                claims[gt_id].append(by_ordinal[det_ordinal])
    for gt_id, claimants in claims.items():
        claimants.sort(key=Detection.sort_key)
        for loser in claimants[1:]:
            suppress.add(loser.ordinal)
            reclass.pop(loser.ordinal, None)
            relocate.pop(loser.ordinal, None)


def _injections(dets: DetectionSet, missed: list, config: EvalConfig,
                by_ordinal: dict) -> list:
    """Synthetic detections standing in for hits on missed GT, used by
    the score_* variants of the missed-GT oracle."""
    if not missed:
        return []
    mode = config.missed_gt_oracle
    scores = [d.score for d in dets.detections]
    rng = random.Random(config.rng_seed)
    next_ordinal = max(by_ordinal, default=-1) + 1
    out = []
    for gt in sorted(missed, key=lambda g: (g.category_id, g.id)):
        if mode == "score_one":
            score, rank_last = 1.0, False
        elif mode == "score_neg_inf":
            score, rank_last = 0.0, True
        elif mode == "score_mean":
            score = sum(scores) / len(scores) if scores else 0.0
            rank_last = False
        elif mode == "score_sampled":
            score, rank_last = (rng.choice(scores) if scores else 0.0), False
        else:
            raise ValueError(f"unexpected missed_gt_oracle {mode!r}")
        out.append(Detection(ordinal=next_ordinal, image_id=gt.image_id,
                             category_id=gt.category_id, score=score,
                             box=gt.box, mask=gt.mask, rank_last=rank_last))
        next_ordinal += 1
    return out


@dataclass
class DeltaReport:
    """Isolated AP deltas for the six error kinds and the two aggregates."""
    ap: float  # operating point, before any fix
    main: dict  # Oracle -> delta
    special: dict  # Oracle -> delta


def delta_ap(dets: DetectionSet, gts: Dataset, ledger: ErrorLedger, oracle: Oracle,
             records: Optional[list] = None, threads: Optional[int] = None) -> float:
    """AP gain from fixing one error kind in isolation."""
    outcome = apply_oracles(dets, gts, ledger, (oracle,), records=records)
    fixed = map_at_threshold(outcome.detections, gts, ledger.config,
                             ledger.config.foreground_iou,
                             n_gt_override=outcome.n_gt_override or None,
                             threads=threads)
    return fixed - ledger.ap


def delta_ap_joint(dets: DetectionSet, gts: Dataset, ledger: ErrorLedger,
                   oracles: Sequence[Oracle], threads: Optional[int] = None) -> float:
    outcome = apply_oracles(dets, gts, ledger, oracles)
    fixed = map_at_threshold(outcome.detections, gts, ledger.config,
                             ledger.config.foreground_iou,
                             n_gt_override=outcome.n_gt_override or None,
                             threads=threads)
    return fixed - ledger.ap


def delta_report(dets: DetectionSet, gts: Dataset, ledger: ErrorLedger,
                 threads: Optional[int] = None) -> DeltaReport:
    main = {o: delta_ap(dets, gts, ledger, o, threads=threads) for o in MAIN_ORACLES}
    special = {o: delta_ap(dets, gts, ledger, o, threads=threads)
               for o in SPECIAL_ORACLES}
    return DeltaReport(ap=ledger.ap, main=main, special=special)


def delta_ap_progressive(dets: DetectionSet, gts: Dataset, ledger: ErrorLedger,
                         order: Sequence[Oracle],
                         threads: Optional[int] = None) -> list:
    """Conditional deltas: each oracle's gain on top of every oracle
    before it in ``order``, all prefixes resolved from the original
    ledger. Sums to the full-fix gain; order changes the split, which is
    exactly the trap this view exists to demonstrate."""
    values = []
    previous = 0.0
    for i in range(1, len(order) + 1):
        joint = delta_ap_joint(dets, gts, ledger, order[:i], threads=threads)
        values.append(joint - previous)
        previous = joint
    return values


@dataclass
class IdentityReport:
    oracle_a: Oracle
    oracle_b: Oracle
    dap_a: float
    dap_b: float
    dap_joint: float
    dap_a_given_b: float

    @property
    def interaction_residual(self) -> float:
        """(dap_a + dap_b - joint) and (dap_a - dap_a_given_b) describe the
        same interaction; this is their disagreement."""
        return (self.dap_a + self.dap_b - self.dap_joint) - (self.dap_a - self.dap_a_given_b)

    @property
    def chain_residual(self) -> float:
        """joint minus (dap_b then dap_a_given_b)."""
        return self.dap_joint - self.dap_b - self.dap_a_given_b

    @property
    def max_residual(self) -> float:
        return max(abs(self.interaction_residual), abs(self.chain_residual))


def check_identities(dets: DetectionSet, gts: Dataset, ledger: ErrorLedger,
                     oracle_a: Oracle, oracle_b: Oracle,
                     threads: Optional[int] = None) -> IdentityReport:
    dap_a = delta_ap(dets, gts, ledger, oracle_a, threads=threads)
    dap_b = delta_ap(dets, gts, ledger, oracle_b, threads=threads)
    dap_joint = delta_ap_joint(dets, gts, ledger, (oracle_a, oracle_b), threads=threads)
    return IdentityReport(oracle_a=oracle_a, oracle_b=oracle_b, dap_a=dap_a,
                          dap_b=dap_b, dap_joint=dap_joint,
                          dap_a_given_b=dap_joint - dap_b)
