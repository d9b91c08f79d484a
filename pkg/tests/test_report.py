import json
import xml.etree.ElementTree as ET

import pytest

from detlens import (EvalConfig, ErrorReport, export_report, import_report,
                     summarize)
from detlens.oracles import Oracle
from detlens.report import dumps_structured, render_svg, render_text
from detlens.synth import ErrorBudget, generate

from conftest import make_dataset, make_dets

GOLDEN_TEXT = (
    "demo on hand [box]\n"
    "operating point: foreground_iou=0.50 background_iou=0.10 max_dets=100 "
    "missed_oracle=remove_gt\n"
    "\n"
    "AP mean over thresholds = 83.50\n"
    "  0.50: 83.50 0.55: 83.50 0.60: 83.50 0.65: 83.50 0.70: 83.50"
    " 0.75: 83.50 0.80: 83.50 0.85: 83.50 0.90: 83.50 0.95: 83.50\n"
    "AP at operating point   = 83.50\n"
    "\n"
    "error contributions (delta AP, isolated):\n"
    "       cls     loc    both    dupe     bkg    miss\n"
    "      0.00    0.00    0.00    0.00   16.50    0.00\n"
    "special: fp=16.50  fn=0.00\n"
    "counts: cls=0  loc=0  both=0  dupe=0  bkg=1  miss=0\n"
)


def hand_report(**kwargs):
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20)),
                        (2, 1, 1, (60, 60, 20, 20))], n_categories=1)
    dets = make_dets([(1, 1, 0.9, (10, 10, 20, 20)),
                      (1, 1, 0.8, (150, 150, 20, 20)),
                      (1, 1, 0.7, (60, 60, 20, 20))])
    return summarize(dets, gts, EvalConfig(), model="demo",
                     dataset_name="hand", **kwargs)


def synth_report(**kwargs):
    budget = ErrorBudget(tp=6, cls=2, loc=2, both=1, dupe=1, bkg=2, missed=2,
                         images=3, classes=3, seed=41)
    config = EvalConfig(rng_seed=41)
    ds, dets, _ = generate(budget, config)
    return summarize(dets, ds, config, model="synth", dataset_name="grid",
                     **kwargs)


def test_text_rendering_is_stable():
    assert render_text(hand_report()) == GOLDEN_TEXT


def test_optional_sections_are_omitted_by_default():
    doc = hand_report().to_dict()
    assert set(doc) == {"schema_version", "meta", "config", "ap", "errors"}


def test_optional_sections_appear_when_requested():
    report = synth_report(with_scale=True, sweep_thresholds=(0.5, 0.75),
                          progressive_order=(Oracle.CLS, Oracle.BKG), top_k=3)
    doc = report.to_dict()
    assert set(doc) == {"schema_version", "meta", "config", "ap", "errors",
                        "scale", "sweep", "progressive", "top"}
    assert list(doc["scale"]) == ["xs", "s", "m", "l", "xl"]
    assert [row["foreground_iou"] for row in doc["sweep"]] == [0.5, 0.75]
    assert doc["progressive"]["order"] == ["cls", "bkg"]
    assert len(doc["progressive"]["deltas"]) == 2
    text = render_text(report)
    for heading in ("by object scale", "threshold sweep", "progressive",
                    "most confident errors"):
        assert heading in text


def test_structured_round_trip_is_byte_identical(tmp_path):
    report = synth_report(with_scale=True, sweep_thresholds=(0.5,),
                          progressive_order=(Oracle.CLS,), top_k=2)
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    export_report(report, first)
    export_report(import_report(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_floats_survive_serialization_exactly():
    report = synth_report()
    doc = json.loads(dumps_structured(report))
    rebuilt = ErrorReport.from_dict(doc)
    assert rebuilt.ap_mean == report.ap_mean
    assert rebuilt.main == report.main
    assert rebuilt.special == report.special


def test_gzip_round_trip(tmp_path):
    report = hand_report()
    path = tmp_path / "report.json.gz"
    export_report(report, path)
    assert import_report(path).to_dict() == report.to_dict()


def test_unknown_schema_version_is_rejected():
    doc = hand_report().to_dict()
    doc["schema_version"] = 99
    with pytest.raises(ValueError, match="schema_version"):
        ErrorReport.from_dict(doc)


def test_unknown_export_format_is_rejected(tmp_path):
    with pytest.raises(ValueError, match="format"):
        export_report(hand_report(), tmp_path / "x", fmt="yaml")


def test_svg_is_well_formed_and_labelled():
    report = synth_report()
    root = ET.fromstring(render_svg(report))
    assert root.tag.endswith("svg")
    ns = root.tag[:-3]
    texts = [el.text for el in root.iter(f"{ns}text")]
    for kind, value in report.main.items():
        assert kind in texts or any(kind in t for t in texts if t)
        assert f"{value:.2f}" in texts
    rects = root.iter(f"{ns}rect")
    assert sum(1 for _ in rects) == len(report.main)


def test_svg_handles_a_clean_run():
    gts = make_dataset([(1, 1, 1, (10, 10, 20, 20))], n_categories=1)
    dets = make_dets([(1, 1, 0.9, (10, 10, 20, 20))])
    report = summarize(dets, gts)
    svg = render_svg(report)
    ET.fromstring(svg)
    assert "no errors" in svg


def test_svg_handles_a_single_error_kind():
    report = hand_report()  # only bkg errors
    svg = render_svg(report)
    root = ET.fromstring(svg)
    ns = root.tag[:-3]
    assert any(el is not None for el in root.iter(f"{ns}circle"))
    assert "bkg 1" in svg


def test_svg_escapes_markup_in_names():
    report = hand_report()
    report.model = "<bad&model>"
    svg = render_svg(report)
    ET.fromstring(svg)
    assert "&lt;bad&amp;model&gt;" in svg


def test_export_text_format(tmp_path):
    path = tmp_path / "report.txt"
    export_report(hand_report(), path, fmt="text")
    assert path.read_text() == GOLDEN_TEXT
