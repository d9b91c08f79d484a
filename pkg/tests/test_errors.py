import pytest

from detlens import EvalConfig, classify_errors, split_special, top_errors
from detlens.errors import MAIN_KINDS, ErrorKind

from conftest import make_dataset, make_dets


def kinds_of(ledger):
    return [(r.kind, r.detection.ordinal if r.detection else None) for r in ledger.records]


def test_pure_classification_error():
    # class 2 owns a hit elsewhere so that its detections are analysed
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20)),
                        (2, 1, 2, (120, 120, 20, 20))])
    dets = make_dets([(1, 2, 0.8, (10, 10, 20, 20)),
                      (1, 2, 0.9, (120, 120, 20, 20))])
    ledger = classify_errors(dets, gts)
    assert kinds_of(ledger) == [(ErrorKind.CLS, 0)]
    rec = ledger.records[0]
    assert rec.gt.id == 1 and rec.iou_other == 1.0
    # the confused GT is covered, not missed
    assert ledger.missed_gt_ids() == []
    assert 1 in ledger.covered


def test_pure_localization_error():
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20))])
    dets = make_dets([(1, 1, 0.8, (20, 10, 20, 20))])  # IoU 1/3
    ledger = classify_errors(dets, gts)
    assert kinds_of(ledger) == [(ErrorKind.LOC, 0)]
    assert ledger.records[0].iou_same == pytest.approx(1 / 3)
    assert ledger.missed_gt_ids() == []


def test_both_error_keeps_gt_missed():
    # wrong class and bad overlap: fixing either alone cannot recover the GT
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20)),
                        (2, 1, 2, (120, 120, 20, 20))])
    dets = make_dets([(1, 2, 0.8, (20, 10, 20, 20)),
                      (1, 2, 0.9, (120, 120, 20, 20))])
    ledger = classify_errors(dets, gts)
    assert (ErrorKind.BOTH, 0) in kinds_of(ledger)
    assert ledger.missed_gt_ids() == [1]  # 'both' does not cover its target


def test_duplicate_error():
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20))])
    dets = make_dets([(1, 1, 0.9, (10, 10, 20, 20)),
                      (1, 1, 0.8, (10, 10, 20, 20))])
    ledger = classify_errors(dets, gts)
    assert kinds_of(ledger) == [(ErrorKind.DUPE, 1)]
    assert ledger.records[0].gt.id == 1  # overlap with the matched GT counts


def test_background_error():
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20))])
    dets = make_dets([(1, 1, 0.9, (10, 10, 20, 20)),
                      (1, 1, 0.8, (150, 150, 20, 20))])
    ledger = classify_errors(dets, gts)
    assert kinds_of(ledger) == [(ErrorKind.BKG, 1)]


def test_missed_gt():
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20)),
                        (2, 1, 1, (60, 60, 20, 20))])
    dets = make_dets([(1, 1, 0.9, (10, 10, 20, 20))])
    ledger = classify_errors(dets, gts)
    assert kinds_of(ledger) == [(ErrorKind.MISS, None)]
    assert ledger.records[0].gt.id == 2


def test_exactly_foreground_is_not_localization():
    # overlap of exactly the foreground threshold belongs to dupe/cls,
    # never loc: the half-open interval closes at the top
    gts = make_dataset([(1, 1, 1, (0, 0, 10, 10))])
    dets = make_dets([(1, 1, 0.9, (0, 0, 10, 10)),
                      (1, 1, 0.8, (0, 0, 10, 5))])  # IoU exactly 0.5
    ledger = classify_errors(dets, gts)
    assert kinds_of(ledger) == [(ErrorKind.DUPE, 1)]


def test_exactly_background_is_localization():
    gts = make_dataset([(1, 1, 1, (0, 0, 10, 10))])
    dets = make_dets([(1, 1, 0.8, (0, 0, 10, 1))])  # IoU exactly 0.1
    ledger = classify_errors(dets, gts)
    assert kinds_of(ledger) == [(ErrorKind.LOC, 0)]


def test_below_background_is_background():
    gts = make_dataset([(1, 1, 1, (0, 0, 10, 10))])
    dets = make_dets([(1, 1, 0.8, (0, 0, 10, 0.9))])  # IoU just under 0.1
    ledger = classify_errors(dets, gts)
    # background detections cover nothing, so the GT stays missed
    assert kinds_of(ledger) == [(ErrorKind.BKG, 0), (ErrorKind.MISS, None)]


def test_localization_outranks_classification():
    # overlaps its own class at 1/3 and another class at 7/13: fixable
    # either way, and the taxonomy blames localization first
    gts = make_dataset([(1, 1, 1, (0, 0, 10, 10)),
                        (2, 1, 2, (2, 0, 10, 10))])
    dets = make_dets([(1, 1, 0.8, (5, 0, 10, 10))])
    ledger = classify_errors(dets, gts)
    assert ledger.records[0].kind == ErrorKind.LOC
    assert ledger.records[0].gt.id == 1
    assert ledger.records[0].iou_other > 0.5  # cls also qualified; loc won


def test_classification_outranks_duplicate():
    gts = make_dataset([(1, 1, 1, (0, 0, 10, 10)),
                        (2, 1, 2, (0, 0, 10, 10))])
    dets = make_dets([(1, 1, 0.9, (0, 0, 10, 10)),
                      (1, 1, 0.8, (0, 0, 10, 10))])
    ledger = classify_errors(dets, gts)
    by_ordinal = {r.detection.ordinal: r for r in ledger.records if r.detection}
    assert by_ordinal[1].kind == ErrorKind.CLS
    assert by_ordinal[1].gt.id == 2


def test_both_requires_same_class_below_background():
    # same-class and other-class overlap both inside [t_b, t_f): loc, not both
    gts = make_dataset([(1, 1, 1, (0, 0, 12, 10)),
                        (2, 1, 2, (18, 0, 12, 10))])
    dets = make_dets([(1, 1, 0.8, (9, 0, 12, 10))])
    ledger = classify_errors(dets, gts)
    assert ledger.records[0].kind == ErrorKind.LOC


def test_crowds_excluded_from_error_overlaps():
    # detection sits fully on an other-class crowd region: background error
    gts = make_dataset([(1, 1, 1, (0, 0, 10, 10)),
                        (2, 1, 2, (100, 100, 50, 50), True)])
    dets = make_dets([(1, 1, 0.9, (0, 0, 10, 10)),
                      (1, 1, 0.8, (110, 110, 20, 20))])
    ledger = classify_errors(dets, gts)
    assert kinds_of(ledger) == [(ErrorKind.BKG, 1)]
    # and crowd GT is never reported missed
    assert ledger.missed_gt_ids() == []


def test_matched_gt_still_counts_for_overlap():
    # the dupe definition needs the matched GT to stay visible
    gts = make_dataset([(1, 1, 1, (0, 0, 10, 10))])
    dets = make_dets([(1, 1, 0.9, (0, 0, 10, 10)),
                      (1, 1, 0.8, (1, 0, 10, 10))])
    ledger = classify_errors(dets, gts)
    assert ledger.records[0].kind == ErrorKind.DUPE


def test_partition_and_fn_accounting():
    gts = make_dataset([(i, 1, 1 + i % 2, (i * 30, 10, 20, 20)) for i in range(1, 6)])
    dets = make_dets([(1, 1, 0.9, (30, 10, 20, 20)),
                      (1, 2, 0.8, (60, 10, 20, 20)),
                      (1, 1, 0.7, (62, 10, 20, 20)),
                      (1, 2, 0.6, (150, 150, 10, 10)),
                      (1, 1, 0.5, (90, 14, 20, 20))])
    ledger = classify_errors(dets, gts)
    det_records = [r for r in ledger.records if r.detection is not None]
    fp_ordinals = set()
    for cat, table in ledger.tables.items():
        fp_ordinals |= {d.ordinal for d in table.unmatched_dets()}
    assert {r.detection.ordinal for r in det_records} == fp_ordinals
    assert len(det_records) == len(fp_ordinals)
    for cat, table in ledger.tables.items():
        fn = ledger.false_negative_gt_ids(cat)
        assert len(fn) == table.n_gt - table.tp_count


def test_raising_background_threshold_moves_loc_to_bkg():
    gts = make_dataset([(1, 1, 1, (0, 0, 10, 10))])
    dets = make_dets([(1, 1, 0.8, (7, 0, 10, 10))])  # IoU 3/17 ~ 0.176
    loose = classify_errors(dets, gts, EvalConfig(background_iou=0.1))
    tight = classify_errors(dets, gts, EvalConfig(background_iou=0.2))
    assert loose.records[0].kind == ErrorKind.LOC
    assert tight.records[0].kind == ErrorKind.BKG


def test_ignored_detection_explains_cross_class_gt():
    extras = {1: {"not_exhaustive": frozenset({1})}}
    gts = make_dataset([(1, 1, 2, (10, 10, 20, 20)),
                        (2, 1, 1, (60, 60, 20, 20))], image_extras=extras)
    dets = make_dets([(1, 1, 0.9, (60, 60, 20, 20)),
                      (1, 1, 0.8, (10, 10, 20, 20))])  # ignored, sits on GT 1
    default = classify_errors(dets, gts, EvalConfig())
    assert default.missed_gt_ids() == [1]
    assert all(r.detection is None or r.detection.ordinal != 1
               for r in default.records)

    flagged = classify_errors(dets, gts, EvalConfig(use_ignored_for_errors=True))
    assert flagged.missed_gt_ids() == []
    cls = [r for r in flagged.records if r.kind == ErrorKind.CLS]
    assert len(cls) == 1 and cls[0].det_ignored and cls[0].detection.ordinal == 1
    # the ignored detection is not a false positive for the aggregates,
    # but the GT it covers still counts as a false negative
    fps, fns = split_special(flagged)
    assert all(r.detection.ordinal != 1 for r in fps)
    assert fns == {1}


def test_counts_property_covers_all_kinds():
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20)),
                        (2, 1, 2, (120, 120, 20, 20))])
    dets = make_dets([(1, 2, 0.8, (10, 10, 20, 20)),
                      (1, 2, 0.9, (120, 120, 20, 20))])
    counts = classify_errors(dets, gts).counts
    assert set(counts) == set(MAIN_KINDS)
    assert counts[ErrorKind.CLS] == 1
    assert sum(counts.values()) == 1


def test_detections_of_unevaluated_categories_are_invisible():
    # class 2 has no GT anywhere: it has no PR curve, so its stray
    # detection neither gets a record nor covers the GT it sits on
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20))])
    dets = make_dets([(1, 2, 0.8, (10, 10, 20, 20))])
    ledger = classify_errors(dets, gts)
    assert kinds_of(ledger) == [(ErrorKind.MISS, None)]


def test_top_errors_ranked_by_confidence():
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20))])
    dets = make_dets([(1, 1, 0.9, (10, 10, 20, 20)),
                      (1, 1, 0.3, (100, 100, 20, 20)),
                      (1, 1, 0.7, (140, 140, 20, 20)),
                      (1, 1, 0.5, (60, 60, 20, 20))])
    ledger = classify_errors(dets, gts)
    top = top_errors(ledger, ErrorKind.BKG, 2)
    assert [r.detection.score for r in top] == [0.7, 0.5]


def test_top_missed_sample_is_seeded():
    gts = make_dataset([(i, 1, 1, (i * 25, 10, 20, 20)) for i in range(1, 8)])
    dets = make_dets([(1, 1, 0.9, (25, 10, 20, 20))])
    ledger = classify_errors(dets, gts, EvalConfig(rng_seed=42))
    again = classify_errors(dets, gts, EvalConfig(rng_seed=42))
    first = [r.gt.id for r in top_errors(ledger, ErrorKind.MISS, 3)]
    second = [r.gt.id for r in top_errors(again, ErrorKind.MISS, 3)]
    assert first == second
    assert len(first) == 3
