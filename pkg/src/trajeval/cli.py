"""Command-line entry point.

Exit status: 0 on success, 1 when some inputs could not be processed (the
rest of the run still completes), 2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from typing import List, Optional, Sequence

from trajeval import __version__
from trajeval.baselines import PredictorSpec, predict_corpus
from trajeval.metrics import JOINT, MARGINAL, MetricsConfig, evaluate
from trajeval.metrics.config import AP_FIRST_MATCH, AP_TOP_ONLY
from trajeval.mining import ExpressionError, evaluate_predicate, mine_interactive_pairs, parse_expression
from trajeval.mining.interactions import annotate_interactive_pair
from trajeval.pipeline import (
    WINDOW_OFFSETS,
    SET_ALIASES,
    ParentTooShortError,
    assign_split,
    build_windowed_set,
    corpus_stats,
)
from trajeval.scenario import (
    ScenarioError,
    read_predictions,
    read_scenarios,
    validate_scenario,
    write_predictions,
    write_scenarios,
)
from trajeval.synthetic import TEMPLATES, generate_synthetic_scenario

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2
THREADS_ENV = "TRAJEVAL_THREADS"


class UsageError(Exception):
    pass


def _default_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise UsageError(f"{THREADS_ENV} must be at least 1")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _horizons(text: str) -> List[int]:
    try:
        return sorted({int(h) for h in text.split(",") if h.strip()})
    except ValueError:
        raise argparse.ArgumentTypeError(f"horizons must be comma-separated integers, got {text!r}") from None


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _warn(msg: str) -> None:
    print(msg, file=sys.stderr)


# --------------------------------------------------------------------------
# Subcommands


def cmd_validate(args) -> int:
    count = 0
    for path in args.files:
        for s in read_scenarios(path):
            validate_scenario(s)
            count += 1
    print(f"{count} scenario(s) valid")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = MetricsConfig(ap_protocol=args.ap_protocol)
    for h in args.horizons:
        if h not in cfg.thresholds:
            raise UsageError(f"no thresholds for horizon {h}s; choose from {list(cfg.horizons)}")
    scenarios = list(read_scenarios(args.scenarios))
    predictions = read_predictions(args.predictions)
    workers = args.workers or _default_workers()
    report = evaluate(scenarios, predictions, cfg, args.mode, args.horizons, workers)
    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "metrics.json"), report.to_json())
    _write(os.path.join(args.out, "metrics.csv"), report.to_csv())
    _write(os.path.join(args.out, "pr_curves.csv"), report.pr_curves_csv())
    info = {
        "tool": "trajeval",
        "version": __version__,
        "python": platform.python_version(),
        "mode": args.mode,
        "horizons": args.horizons,
        "ap_protocol": args.ap_protocol,
        "workers": workers,
        "inputs": {
            "scenarios": {"path": os.path.abspath(args.scenarios), "sha256": _sha256(args.scenarios)},
            "predictions": {"path": os.path.abspath(args.predictions), "sha256": _sha256(args.predictions)},
        },
        "num_scenarios": len(scenarios),
        "num_predictions": len(predictions),
        "num_issues": len(report.issues),
    }
    _write(os.path.join(args.out, "run_info.json"), json.dumps(info, sort_keys=True, indent=2) + "\n")
    for issue in report.issues:
        _warn(f"{issue.scenario_id} {list(issue.agent_ids)}: {issue.reason}")
    return EXIT_PARTIAL if report.issues else EXIT_OK


def cmd_baseline(args) -> int:
    spec = PredictorSpec(args.kind, args.k, seed=args.seed, noise=args.noise)
    scenarios = list(read_scenarios(args.scenarios))
    predictions = predict_corpus(scenarios, spec, joint=args.mode == JOINT)
    write_predictions(args.out, predictions)
    print(f"wrote {len(predictions)} prediction record(s)")
    return EXIT_OK


def cmd_mine(args) -> int:
    scenarios = read_scenarios(args.scenarios)
    out = open(args.out, "w", encoding="utf-8") if args.out and not args.annotate else sys.stdout
    annotated = []
    try:
        if args.query:
            expr = parse_expression(args.query)
            for s in scenarios:
                for b in evaluate_predicate(expr, s):
                    row = {"scenario_id": s.scenario_id, "binding": dict(b.assignment), "times": list(b.times)}
                    out.write(json.dumps(row, sort_keys=True) + "\n")
        elif args.annotate:
            annotated = [annotate_interactive_pair(s) for s in scenarios]
        else:
            for s in scenarios:
                for label in mine_interactive_pairs(s):
                    row = {"scenario_id": s.scenario_id, "first": label.first, "second": label.second,
                           "kind": label.kind, "time": label.time}
                    out.write(json.dumps(row, sort_keys=True) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    if args.annotate:
        if not args.out:
            raise UsageError("--annotate requires --out")
        write_scenarios(args.out, annotated)
    return EXIT_OK


def cmd_split(args) -> int:
    if args.date is not None or args.vehicle is not None:
        if args.date is None or args.vehicle is None or args.scenarios:
            raise UsageError("give --date and --vehicle together, or --scenarios")
        print(assign_split(args.date, args.vehicle).value)
        return EXIT_OK
    if not args.scenarios:
        raise UsageError("one of --scenarios or --date/--vehicle is required")
    groups = {}
    for s in read_scenarios(args.scenarios):
        split = assign_split(s.capture_date, s.vehicle_id).value
        groups.setdefault(split, []).append(s)
        if not args.out_dir:
            print(f"{s.scenario_id}\t{split}")
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        for split, items in sorted(groups.items()):
            write_scenarios(os.path.join(args.out_dir, f"{split}.jsonl"), items)
            print(f"{split}\t{len(items)}")
    return EXIT_OK


def cmd_windows(args) -> int:
    windows, failed = [], 0
    for s in read_scenarios(args.scenarios):
        try:
            windows.extend(build_windowed_set(s, args.set))
        except ParentTooShortError as exc:
            _warn(str(exc))
            failed += 1
    write_scenarios(args.out, windows)
    print(f"wrote {len(windows)} window(s)")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_stats(args) -> int:
    stats = corpus_stats(read_scenarios(args.scenarios))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write(os.path.join(args.out, "stats.json"), stats.to_json())
        _write(os.path.join(args.out, "histograms.csv"), stats.histograms_csv())
    else:
        sys.stdout.write(stats.to_json())
    return EXIT_OK


def cmd_gen(args) -> int:
    scenarios = [
        generate_synthetic_scenario(args.seed + i, args.template, args.steps) for i in range(args.count)
    ]
    write_scenarios(args.out, scenarios)
    print(f"wrote {len(scenarios)} scenario(s)")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajeval", description="Trajectory prediction evaluation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check scenario files against the format and its invariants")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("evaluate", help="score predictions against scenarios")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--mode", choices=(MARGINAL, JOINT), default=MARGINAL)
    p.add_argument("--horizons", type=_horizons, default=[3, 5, 8], help="comma-separated seconds (default 3,5,8)")
    p.add_argument("--ap-protocol", choices=(AP_FIRST_MATCH, AP_TOP_ONLY), default=AP_FIRST_MATCH)
    p.add_argument("--workers", type=_positive_int, default=None, help=f"threads (default ${THREADS_ENV} or 1)")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="write baseline predictions")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--kind", choices=("cv", "constant_velocity", "noisy_cv"), default="cv")
    p.add_argument("--k", type=_positive_int, default=1, help="hypotheses per agent (noisy_cv only)")
    p.add_argument("--mode", choices=(MARGINAL, JOINT), default=MARGINAL)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("mine", help="run interaction rules or a predicate query")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--query", help="predicate expression, e.g. 'and(type($a,vehicle),lane_change($a))'")
    p.add_argument("--annotate", action="store_true", help="rewrite scenarios with a mined interactive pair")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("split", help="assign training/validation/test splits")
    p.add_argument("--scenarios")
    p.add_argument("--date")
    p.add_argument("--vehicle")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("windows", help="cut 9.1 s windows from longer scenarios")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--set", required=True, choices=sorted(WINDOW_OFFSETS) + sorted(SET_ALIASES))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_windows)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--out", help="directory for stats.json and histograms.csv (default: JSON to stdout)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen", help="generate synthetic scenarios")
    p.add_argument("--template", required=True, choices=TEMPLATES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=_positive_int, default=1)
    p.add_argument("--steps", type=int, default=91)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ExpressionError, ScenarioError, OSError, ValueError, KeyError) as exc:
        _warn(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
