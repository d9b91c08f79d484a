"""Assembling and rendering evaluation reports.

The structured form is plain JSON with a schema version; floats are
emitted at full precision so an imported report compares equal to the
exported one. The text form is fixed-layout and stable for a given
input, and the SVG form is a single self-contained document.
"""

import gzip
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .analysis import SCALE_ORDER, scale_report, threshold_sweep
from .apcore import evaluate
from .dataset import Dataset, DetectionSet, EvalConfig
from .errors import MAIN_KINDS, classify_errors, top_errors
from .oracles import (MAIN_ORACLES, SPECIAL_ORACLES, Oracle, delta_ap_progressive,
                      delta_report)

SCHEMA_VERSION = 1

_KIND_LABEL = {"cls": "cls", "loc": "loc", "both": "both", "dupe": "dupe",
               "bkg": "bkg", "miss": "miss", "fp": "fp", "fn": "fn"}


@dataclass
class ErrorReport:
    model: str
    dataset: str
    mode: str
    config: dict
    ap_mean: float
    ap_per_threshold: dict  # "0.50" -> value
    ap_operating: float
    main: dict  # "cls" -> delta
    special: dict  # "fp"/"fn" -> delta
    counts: dict  # "cls" -> int
    scale: Optional[dict] = None  # bin -> kind -> delta
    sweep: Optional[list] = None  # rows of {"foreground_iou", "ap", kinds...}
    progressive: Optional[dict] = None  # {"order": [...], "deltas": [...]}
    top: Optional[dict] = None  # kind -> [entry dicts]
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        doc = {
            "schema_version": self.schema_version,
            "meta": {"model": self.model, "dataset": self.dataset, "mode": self.mode},
            "config": self.config,
            "ap": {"mean": self.ap_mean, "per_threshold": self.ap_per_threshold,
                   "operating": self.ap_operating},
            "errors": {"main": self.main, "special": self.special,
                       "counts": self.counts},
        }
        for key in ("scale", "sweep", "progressive", "top"):
            value = getattr(self, key)
            if value is not None:
                doc[key] = value
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ErrorReport":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
        return cls(model=doc["meta"]["model"], dataset=doc["meta"]["dataset"],
                   mode=doc["meta"]["mode"], config=doc["config"],
                   ap_mean=doc["ap"]["mean"],
                   ap_per_threshold=doc["ap"]["per_threshold"],
                   ap_operating=doc["ap"]["operating"],
                   main=doc["errors"]["main"], special=doc["errors"]["special"],
                   counts=doc["errors"]["counts"], scale=doc.get("scale"),
                   sweep=doc.get("sweep"), progressive=doc.get("progressive"),
                   top=doc.get("top"))


def _record_entry(rec) -> dict:
    entry = {"kind": rec.kind.value, "image_id": rec.image_id,
             "category_id": rec.category_id,
             "iou_same": rec.iou_same, "iou_other": rec.iou_other}
    if rec.detection is not None:
        entry["score"] = rec.detection.score
        entry["ordinal"] = rec.detection.ordinal
    if rec.gt is not None:
        entry["gt_id"] = rec.gt.id
        entry["gt_category_id"] = rec.gt.category_id
    return entry


def summarize(dets: DetectionSet, gts: Dataset, config: EvalConfig = EvalConfig(),
              model: str = "model", dataset_name: str = "dataset",
              with_scale: bool = False,
              sweep_thresholds: Optional[Sequence[float]] = None,
              progressive_order: Optional[Sequence[Oracle]] = None,
              top_k: Optional[int] = None,
              threads: Optional[int] = None) -> ErrorReport:
    """Full evaluation plus error decomposition in one report object."""
    result = evaluate(dets, gts, config, threads=threads)
    ledger = classify_errors(dets, gts, config, threads=threads)
    deltas = delta_report(dets, gts, ledger, threads=threads)
    counts = {k.value: v for k, v in ledger.counts.items()}
    report = ErrorReport(
        model=model, dataset=dataset_name, mode=config.mode,
        config={
            "mode": config.mode,
            "foreground_iou": config.foreground_iou,
            "background_iou": config.background_iou,
            "iou_thresholds": list(config.iou_thresholds),
            "max_dets_per_image": config.max_dets_per_image,
            "missed_gt_oracle": config.missed_gt_oracle,
            "use_ignored_for_errors": config.use_ignored_for_errors,
            "rng_seed": config.rng_seed,
        },
        ap_mean=result.mean_ap,
        ap_per_threshold={f"{t:.2f}": v for t, v in result.ap_per_threshold.items()},
        ap_operating=ledger.ap,
        main={o.value: deltas.main[o] for o in MAIN_ORACLES},
        special={o.value: deltas.special[o] for o in SPECIAL_ORACLES},
        counts=counts)
    if with_scale:
        table = scale_report(dets, gts, ledger, threads=threads)
        report.scale = {name: {o.value: table.cells[(name, o)] for o in MAIN_ORACLES}
                        for name in SCALE_ORDER}
    if sweep_thresholds:
        rows = threshold_sweep(dets, gts, config, sweep_thresholds, threads=threads)
        report.sweep = [
            {"foreground_iou": r.foreground_iou, "ap": r.ap,
             **{o.value: r.main[o] for o in MAIN_ORACLES},
             **{o.value: r.special[o] for o in SPECIAL_ORACLES}}
            for r in rows]
    if progressive_order:
        values = delta_ap_progressive(dets, gts, ledger, list(progressive_order),
                                      threads=threads)
        report.progressive = {"order": [o.value for o in progressive_order],
                              "deltas": values,
                              "final_ap": ledger.ap + sum(values)}
    if top_k:
        report.top = {k.value: [_record_entry(r) for r in top_errors(ledger, k, top_k)]
                      for k in MAIN_KINDS}
    return report


# --- text ------------------------------------------------------------------

def render_text(report: ErrorReport) -> str:
    lines = []
    lines.append(f"{report.model} on {report.dataset} [{report.mode}]")
    cfg = report.config
    lines.append(
        f"operating point: foreground_iou={cfg['foreground_iou']:.2f} "
        f"background_iou={cfg['background_iou']:.2f} "
        f"max_dets={cfg['max_dets_per_image']} missed_oracle={cfg['missed_gt_oracle']}")
    lines.append("")
    thr = " ".join(f"{k}:{v:6.2f}" for k, v in report.ap_per_threshold.items())
    lines.append(f"AP mean over thresholds = {report.ap_mean:.2f}")
    lines.append(f"  {thr}")
    lines.append(f"AP at operating point   = {report.ap_operating:.2f}")
    lines.append("")
    lines.append("error contributions (delta AP, isolated):")
    head = "  " + "".join(f"{_KIND_LABEL[k]:>8}" for k in report.main)
    vals = "  " + "".join(f"{v:8.2f}" for v in report.main.values())
    lines.append(head)
    lines.append(vals)
    lines.append("special: " + "  ".join(f"{k}={v:.2f}" for k, v in report.special.items()))
    lines.append("counts: " + "  ".join(f"{k}={v}" for k, v in report.counts.items()))
    if report.scale is not None:
        lines.append("")
        lines.append("delta AP by object scale:")
        kinds = list(next(iter(report.scale.values())))
        lines.append("  bin " + "".join(f"{k:>8}" for k in kinds))
        for name in SCALE_ORDER:
            row = report.scale[name]
            lines.append(f"  {name:>3} " + "".join(f"{row[k]:8.2f}" for k in kinds))
    if report.sweep is not None:
        lines.append("")
        lines.append("threshold sweep:")
        kinds = [k for k in report.sweep[0] if k not in ("foreground_iou", "ap")]
        lines.append("  t_f      ap" + "".join(f"{k:>8}" for k in kinds))
        for row in report.sweep:
            lines.append(f"  {row['foreground_iou']:.2f}{row['ap']:8.2f}"
                         + "".join(f"{row[k]:8.2f}" for k in kinds))
    if report.progressive is not None:
        lines.append("")
        lines.append("progressive (order-dependent) deltas:")
        for name, value in zip(report.progressive["order"],
                               report.progressive["deltas"]):
            lines.append(f"  +{name:<6} {value:8.2f}")
        lines.append(f"  cumulative AP {report.progressive['final_ap']:.2f}")
    if report.top is not None:
        lines.append("")
        lines.append("most confident errors:")
        for kind, entries in report.top.items():
            if not entries:
                continue
            shown = ", ".join(
                f"img {e['image_id']}"
                + (f" score {e['score']:.3f}" if "score" in e else f" gt {e['gt_id']}")
                for e in entries[:5])
            lines.append(f"  {kind}: {shown}")
    return "\n".join(lines) + "\n"


# --- svg ---------------------------------------------------------------------

_PALETTE = {"cls": "#e6883c", "loc": "#4878b0", "both": "#b05fa0",
            "dupe": "#55a868", "bkg": "#c44e52", "miss": "#8172b2"}


def render_svg(report: ErrorReport) -> str:
    """Bar chart of the six isolated deltas plus a pie of error counts,
    in one standalone SVG document."""
    width, height = 720, 330
    bar_w = 54
    gap = 18
    x0, y0 = 50, 40
    plot_h = 200
    main = report.main
    peak = max(max(main.values()), 1e-9)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<text x="{x0}" y="20" font-size="14">{_esc(report.model)} on '
        f'{_esc(report.dataset)} [{report.mode}]: AP {report.ap_operating:.2f}, '
        f'delta AP by error kind</text>',
    ]
    for i, (kind, value) in enumerate(main.items()):
        h = 0.0 if peak <= 0 else plot_h * value / peak
        x = x0 + i * (bar_w + gap)
        y = y0 + plot_h - h
        parts.append(f'<rect x="{x}" y="{y:.1f}" width="{bar_w}" height="{h:.1f}" '
                     f'fill="{_PALETTE[kind]}"/>')
        parts.append(f'<text x="{x + bar_w / 2}" y="{y - 4:.1f}" '
                     f'text-anchor="middle">{value:.2f}</text>')
        parts.append(f'<text x="{x + bar_w / 2}" y="{y0 + plot_h + 16}" '
                     f'text-anchor="middle">{kind}</text>')
    parts.append(f'<line x1="{x0}" y1="{y0 + plot_h}" x2="{x0 + 6 * (bar_w + gap)}" '
                 f'y2="{y0 + plot_h}" stroke="#444"/>')

    cx, cy, radius = 590, y0 + plot_h / 2, 80
    total = sum(report.counts[k] for k in _PALETTE)
    parts.append(f'<text x="{cx}" y="{y0 - 6}" text-anchor="middle">error counts</text>')
    if total == 0:
        parts.append(f'<text x="{cx}" y="{cy}" text-anchor="middle">no errors</text>')
    else:
        angle = -math.pi / 2
        for kind, colour in _PALETTE.items():
            frac = report.counts[kind] / total
            if frac == 0:
                continue
            if frac == 1.0:
                parts.append(f'<circle cx="{cx}" cy="{cy}" r="{radius}" fill="{colour}"/>')
                parts.append(f'<text x="{cx}" y="{cy + 4}" text-anchor="middle" '
                             f'fill="#fff">{kind} {report.counts[kind]}</text>')
                break
            sweep = 2 * math.pi * frac
            x1, y1 = cx + radius * math.cos(angle), cy + radius * math.sin(angle)
            x2 = cx + radius * math.cos(angle + sweep)
            y2 = cy + radius * math.sin(angle + sweep)
            large = 1 if sweep > math.pi else 0
            parts.append(
                f'<path d="M{cx},{cy} L{x1:.2f},{y1:.2f} '
                f'A{radius},{radius} 0 {large} 1 {x2:.2f},{y2:.2f} Z" fill="{colour}"/>')
            mid = angle + sweep / 2
            lx = cx + (radius + 18) * math.cos(mid)
            ly = cy + (radius + 18) * math.sin(mid)
            parts.append(f'<text x="{lx:.1f}" y="{ly:.1f}" text-anchor="middle">'
                         f'{kind} {report.counts[kind]}</text>')
            angle += sweep
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


# --- persistence -------------------------------------------------------------

def export_report(report: ErrorReport, path, fmt: str = "structured") -> None:
    text = {"structured": lambda: json.dumps(report.to_dict(), indent=2),
            "text": lambda: render_text(report),
            "svg": lambda: render_svg(report)}
    if fmt not in text:
        raise ValueError(f"unknown format {fmt!r}")
    payload = text[fmt]()
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wt", encoding="utf-8") as fh:
        fh.write(payload if payload.endswith("\n") else payload + "\n")


def import_report(path) -> ErrorReport:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        return ErrorReport.from_dict(json.load(fh))


def dumps_structured(report: ErrorReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"
