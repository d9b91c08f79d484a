"""Command line front end.

Subcommands:
  eval       evaluate one detection file and decompose its errors
  sweep      repeat the decomposition over several operating thresholds
  scale      slice error contributions by object scale
  compare    evaluate several detection files, or merge exported reports
  toperrors  list the most confident errors of one kind
  selftest   generate fixtures with known content and verify recovery

Exit status: 0 on success, 2 on invalid input, 1 on internal failure.
Diagnostics go to stderr; reports go to stdout or --out.
"""

import argparse
import json
import sys

from . import __version__
from .dataset import (MISSED_ORACLE_MODES, EvalConfig, ValidationError,
                      load_detections, load_ground_truth)
from .errors import ErrorKind, classify_errors, top_errors
from .oracles import MAIN_ORACLES, Oracle
from .report import (ErrorReport, dumps_structured, export_report, import_report,
                     render_svg, render_text, summarize)


def _common_flags(p: argparse.ArgumentParser, with_dets: bool = True) -> None:
    p.add_argument("--gt", required=True, help="ground truth JSON (optionally .gz)")
    if with_dets:
        p.add_argument("--dets", required=True, help="detection results JSON")
    p.add_argument("--mode", choices=("box", "mask"), default="box")
    p.add_argument("--tf", type=float, default=0.5, help="foreground IoU threshold")
    p.add_argument("--tb", type=float, default=0.1, help="background IoU threshold")
    p.add_argument("--max-dets", type=int, default=100,
                   help="per-image detection cap")
    p.add_argument("--missed-oracle", choices=MISSED_ORACLE_MODES,
                   default="remove_gt", help="how the missed-GT fix is realised")
    p.add_argument("--use-ignored", action="store_true",
                   help="let ignored detections explain cross-category GT")
    p.add_argument("--seed", type=int, default=0, help="seed for sampled choices")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None, help="write the report here")
    p.add_argument("--format", choices=("text", "structured", "svg"), default="text")
    p.add_argument("--model", default="model", help="label for the report")
    p.add_argument("--dataset-name", default="dataset", help="label for the report")


def _config(args) -> EvalConfig:
    return EvalConfig(mode=args.mode, foreground_iou=args.tf, background_iou=args.tb,
                      max_dets_per_image=args.max_dets,
                      missed_gt_oracle=args.missed_oracle,
                      use_ignored_for_errors=args.use_ignored, rng_seed=args.seed)


def _load(args, config):
    gts = load_ground_truth(args.gt)
    dets = load_detections(args.dets, gts, config)
    return dets, gts


def _emit(report: ErrorReport, args) -> None:
    if args.out:
        export_report(report, args.out, fmt=args.format)
        print(f"wrote {args.out}", file=sys.stderr)
        return
    if args.format == "structured":
        sys.stdout.write(dumps_structured(report))
    elif args.format == "svg":
        sys.stdout.write(render_svg(report))
    else:
        sys.stdout.write(render_text(report))


def _parse_order(text: str) -> list:
    try:
        return [Oracle(name.strip()) for name in text.split(",") if name.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad oracle name in --progressive: {exc}")


def cmd_eval(args) -> int:
    config = _config(args)
    dets, gts = _load(args, config)
    order = _parse_order(args.progressive) if args.progressive else None
    report = summarize(dets, gts, config, model=args.model,
                       dataset_name=args.dataset_name,
                       progressive_order=order, top_k=args.top,
                       threads=args.threads)
    _emit(report, args)
    return 0


def cmd_sweep(args) -> int:
    config = _config(args)
    dets, gts = _load(args, config)
    thresholds = [float(v) for v in args.tf_list.split(",") if v.strip()]
    if not thresholds:
        raise ValidationError("--tf-list is empty")
    report = summarize(dets, gts, config, model=args.model,
                       dataset_name=args.dataset_name,
                       sweep_thresholds=thresholds, threads=args.threads)
    _emit(report, args)
    return 0


def cmd_scale(args) -> int:
    config = _config(args)
    dets, gts = _load(args, config)
    report = summarize(dets, gts, config, model=args.model,
                       dataset_name=args.dataset_name, with_scale=True,
                       threads=args.threads)
    _emit(report, args)
    return 0


def cmd_toperrors(args) -> int:
    config = _config(args)
    dets, gts = _load(args, config)
    ledger = classify_errors(dets, gts, config, threads=args.threads)
    kind = ErrorKind(args.kind)
    for rec in top_errors(ledger, kind, args.count):
        bits = [f"kind={rec.kind.value}", f"image={rec.image_id}",
                f"category={rec.category_id}"]
        if rec.detection is not None:
            bits.append(f"score={rec.detection.score:.4f}")
            bits.append(f"iou_same={rec.iou_same:.3f}")
            bits.append(f"iou_other={rec.iou_other:.3f}")
        if rec.gt is not None:
            bits.append(f"gt={rec.gt.id}")
        print("  ".join(bits))
    return 0


def cmd_compare(args) -> int:
    reports = []
    if args.report:
        for path in args.report:
            reports.append(import_report(path))
    if args.dets:
        config = _config(args)
        gts = load_ground_truth(args.gt)
        for spec_pair in args.dets:
            if "=" not in spec_pair:
                raise ValidationError(f"--dets wants NAME=PATH, got {spec_pair!r}")
            name, path = spec_pair.split("=", 1)
            dets = load_detections(path, gts, config)
            reports.append(summarize(dets, gts, config, model=name,
                                     dataset_name=args.dataset_name,
                                     threads=args.threads))
    if not reports:
        raise ValidationError("compare needs --dets NAME=PATH or --report PATH")
    kinds = list(reports[0].main) + list(reports[0].special)
    width = max(len(r.model) for r in reports)
    print(f"{'model':<{width}}      ap" + "".join(f"{k:>8}" for k in kinds))
    for r in reports:
        row = "".join(f"{r.main.get(k, r.special.get(k)):8.2f}" for k in kinds)
        print(f"{r.model:<{width}}  {r.ap_operating:6.2f}{row}")
    if args.out:
        merged = {"schema_version": reports[0].schema_version,
                  "reports": [r.to_dict() for r in reports]}
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(merged, fh, indent=2)
            fh.write("\n")
        print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_selftest(args) -> int:
    from .synth import generate, random_budget

    failures = 0
    for trial in range(args.trials):
        seed = args.seed + trial
        budget = random_budget(seed)
        config = EvalConfig(rng_seed=seed)
        dataset, dets, expected = generate(budget, config)
        ledger = classify_errors(dets, dataset, config)
        got = ledger.counts
        ok = all(got[k] == expected[k] for k in expected)
        if not ok:
            failures += 1
            print(f"seed {seed}: expected {expected}, got {got}", file=sys.stderr)
    print(f"selftest: {args.trials - failures}/{args.trials} trials recovered exactly")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="detlens",
                                     description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"detlens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate and decompose one detection file")
    _common_flags(p)
    p.add_argument("--progressive", default=None,
                   help="comma list of oracle names for order-dependent deltas")
    p.add_argument("--top", type=int, default=None,
                   help="include the K most confident errors per kind")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="decompose at several operating thresholds")
    _common_flags(p)
    p.add_argument("--tf-list", default="0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9",
                   help="comma list of foreground thresholds")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scale", help="slice error contributions by object scale")
    _common_flags(p)
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("compare", help="evaluate several runs side by side")
    p.add_argument("--gt", required=False, help="ground truth JSON")
    p.add_argument("--dets", action="append", default=[], metavar="NAME=PATH",
                   help="detection file, repeatable")
    p.add_argument("--report", action="append", default=[], metavar="PATH",
                   help="previously exported structured report, repeatable")
    p.add_argument("--mode", choices=("box", "mask"), default="box")
    p.add_argument("--tf", type=float, default=0.5)
    p.add_argument("--tb", type=float, default=0.1)
    p.add_argument("--max-dets", type=int, default=100)
    p.add_argument("--missed-oracle", choices=MISSED_ORACLE_MODES, default="remove_gt")
    p.add_argument("--use-ignored", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--dataset-name", default="dataset")
    p.add_argument("--out", default=None, help="write merged structured reports here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("toperrors", help="list the most confident errors of a kind")
    _common_flags(p)
    p.add_argument("--kind", required=True,
                   choices=[k.value for k in (ErrorKind.CLS, ErrorKind.LOC,
                                              ErrorKind.BOTH, ErrorKind.DUPE,
                                              ErrorKind.BKG, ErrorKind.MISS)])
    p.add_argument("--count", type=int, default=10)
    p.set_defaults(func=cmd_toperrors)

    p = sub.add_parser("selftest", help="verify recovery on generated fixtures")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "compare" and args.dets and not args.gt:
        parser.error("compare with --dets needs --gt")
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last resort, report and fail
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
