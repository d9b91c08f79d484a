import pytest

from detlens import (EvalConfig, attribute_delta_ap, classify_errors, delta_ap,
                     scale_of, scale_report, subset_ap, threshold_sweep)
from detlens.analysis import SCALE_EDGES, SCALE_ORDER, category_predicate
from detlens.oracles import MAIN_ORACLES, Oracle
from detlens.synth import ErrorBudget, generate

from conftest import make_dataset, make_dets


@pytest.mark.parametrize("area,expected", [
    (0.0, "xs"),
    (255.9, "xs"),
    (256.0, "s"),      # lower edge belongs to the bin above
    (1024.0, "m"),
    (9216.0, "l"),
    (82944.0, "xl"),
    (1e12, "xl"),
])
def test_scale_bins_are_half_open(area, expected):
    assert scale_of(area) == expected


def test_scale_bins_tile_the_positive_axis():
    edges = [SCALE_EDGES[name] for name in SCALE_ORDER]
    assert edges[0][0] == 0.0
    assert edges[-1][1] == float("inf")
    for (_, hi), (lo, _) in zip(edges, edges[1:]):
        assert hi == lo


def test_negative_area_fits_no_bin():
    with pytest.raises(ValueError, match="fits no scale bin"):
        scale_of(-1.0)


def synth_world(seed=5):
    budget = ErrorBudget(tp=6, cls=2, loc=2, both=1, dupe=1, bkg=2, missed=2,
                         images=3, classes=3, seed=seed)
    config = EvalConfig(rng_seed=seed)
    ds, dets, _ = generate(budget, config)
    return ds, dets, config


def test_unrestricted_slice_equals_the_plain_delta():
    ds, dets, config = synth_world()
    ledger = classify_errors(dets, ds, config)
    for oracle in MAIN_ORACLES:
        sliced = attribute_delta_ap(dets, ds, ledger, oracle, lambda r: True)
        assert sliced == pytest.approx(delta_ap(dets, ds, ledger, oracle))


def test_empty_slice_changes_nothing():
    ds, dets, config = synth_world()
    ledger = classify_errors(dets, ds, config)
    assert attribute_delta_ap(dets, ds, ledger, Oracle.CLS,
                              lambda r: False) == pytest.approx(0.0)


def test_category_slices_partition_the_records():
    ds, dets, config = synth_world()
    ledger = classify_errors(dets, ds, config)
    cats = sorted(ds.categories)
    per_cat = sum(len([r for r in ledger.records
                       if category_predicate([c])(r)]) for c in cats)
    assert per_cat == len(ledger.records)


def test_scale_report_covers_every_cell():
    ds, dets, config = synth_world()
    ledger = classify_errors(dets, ds, config)
    table = scale_report(dets, ds, ledger)
    assert table.mode == config.mode
    assert set(table.cells) == {(name, o) for name in SCALE_ORDER
                                for o in MAIN_ORACLES}
    for value in table.cells.values():
        assert value >= -1e-12


def test_scale_report_rows_line_up_with_manual_slices():
    ds, dets, config = synth_world()
    ledger = classify_errors(dets, ds, config)
    table = scale_report(dets, ds, ledger, kinds=(Oracle.CLS,))
    # synth boxes are 20 to 28 px square, all in the s bin
    for name in SCALE_ORDER:
        expected = 0.0 if name != "s" else delta_ap(dets, ds, ledger, Oracle.CLS)
        assert table.cells[(name, Oracle.CLS)] == pytest.approx(expected)


def test_subset_ap_on_everything_matches_operating_ap():
    ds, dets, config = synth_world()
    ledger = classify_errors(dets, ds, config)
    assert subset_ap(dets, ds, lambda obj: True, config) == pytest.approx(ledger.ap)


def test_subset_ap_single_category():
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20)),
                        (2, 1, 2, (120, 120, 20, 20))])
    dets = make_dets([(1, 1, 0.9, (10, 10, 20, 20)),
                      (1, 2, 0.8, (0, 0, 20, 20))])
    ap = subset_ap(dets, gts, lambda obj: obj.category_id == 1)
    assert ap == pytest.approx(100.0)


def test_subset_ap_refuses_an_empty_subset():
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20))], n_categories=1)
    dets = make_dets([(1, 1, 0.9, (10, 10, 20, 20))])
    with pytest.raises(ValueError, match="selected subset"):
        subset_ap(dets, gts, lambda obj: False)


def test_sweep_rows_match_standalone_runs():
    ds, dets, config = synth_world()
    rows = threshold_sweep(dets, ds, config, (0.5, 0.75))
    assert [r.foreground_iou for r in rows] == [0.5, 0.75]
    for row in rows:
        cfg = EvalConfig(foreground_iou=row.foreground_iou,
                         rng_seed=config.rng_seed)
        ledger = classify_errors(dets, ds, cfg)
        assert row.ap == pytest.approx(ledger.ap)
        for oracle in MAIN_ORACLES:
            assert row.main[oracle] == pytest.approx(
                delta_ap(dets, ds, ledger, oracle))


def test_sweep_ap_does_not_increase_with_stricter_overlap():
    ds, dets, config = synth_world()
    rows = threshold_sweep(dets, ds, config, (0.5, 0.6, 0.7, 0.8, 0.9))
    aps = [r.ap for r in rows]
    assert all(a >= b - 1e-12 for a, b in zip(aps, aps[1:]))
