"""File-to-file pipeline commands plus the survey capture endpoint.

Every stage reads artifacts from disk and writes artifacts to disk, so any
stage can be re-run, inspected, or replaced on its own.  Exit codes: 0 on
success, 1 when inputs fail validation, 2 when files cannot be read or
written.
"""
from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from .config import ConfigError, DEVICE_SETTINGS, PipelineConfig
from .features import (
    FeatureError,
    WindowSpec,
    build_feature_matrix,
    read_feature_matrix,
    write_feature_matrix,
)
from .ingest import (
    IngestError,
    parse_dataset,
    write_ingest_manifest,
)
from .models import ModelError, ModelSpec, run_experiment, write_report, read_report
from .report import ReportError, render_ranking_figure, render_report_figures, render_summary
from .selection import (
    ContextFilterRules,
    DiscretizationSpec,
    SelectionError,
    context_filter,
    mrmr_rank,
    read_ranking,
    write_ranking,
    write_ranking_tsv,
)
from .survey_server import make_server
from .synth import AsymmetryParams, SynthError, generate_schedule, synthesize_paired_dataset
from .timeline import TimelineError, build_labeled_timeline, read_timeline_file, write_timeline_file

_VALIDATION_ERRORS = (ConfigError, IngestError, TimelineError, FeatureError,
                      SelectionError, ModelError, SynthError, ReportError,
                      ValueError)


class _Parser(argparse.ArgumentParser):
    """argparse that reports flag problems through the exit-code contract
    instead of sys.exit(2)."""

    def error(self, message: str) -> None:
        raise ConfigError(message)


def _parse_window(text: str) -> int:
    m = re.fullmatch(r"(\d+)\s*m?", text.strip())
    if not m:
        raise ConfigError(f"--window expects minutes like '10m', got {text!r}")
    return int(m.group(1))


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return PipelineConfig.from_file(args.config)
    return PipelineConfig()


def _pick(flag_value, config_value):
    return config_value if flag_value is None else flag_value


# ---------------------------------------------------------------------------
# Subcommands


def cmd_ingest(args) -> int:
    cfg = _load_config(args)
    root = Path(_pick(args.input, cfg.input_dir))
    out = Path(_pick(args.output, Path(cfg.output_dir) / "timeline.json"))
    series, entries = parse_dataset(root, cfg.vocab)
    timeline = build_labeled_timeline(
        series, entries,
        dominant_hand=_pick(args.dominant_hand, cfg.dominant_hand),
        device_setting=_pick(args.device_setting, cfg.device_setting),
        vocab=cfg.vocab,
        max_interpolation_gap_s=_pick(args.max_gap, cfg.max_interpolation_gap_s),
        utc_offset_hours=_pick(args.utc_offset, cfg.utc_offset_hours),
    )
    write_timeline_file(timeline, out)
    manifest = out.with_name(out.stem + "_manifest.txt")
    write_ingest_manifest(series, entries, manifest)
    n = len(timeline.location_codes)
    print(f"timeline: {n} seconds ({n / 3600:.1f} h) -> {out}")
    print(f"manifest: {manifest}")
    return 0


def cmd_featurize(args) -> int:
    cfg = _load_config(args)
    timeline_path = Path(_pick(args.timeline, Path(cfg.output_dir) / "timeline.json"))
    out = Path(_pick(args.output, Path(cfg.output_dir) / "features.csv"))
    minutes = _parse_window(args.window) if args.window else cfg.window_minutes
    spec = WindowSpec(
        length_minutes=minutes,
        min_valid_fraction=_pick(args.min_valid_fraction, cfg.min_valid_fraction),
        allow_custom_length=args.allow_custom_window or cfg.allow_custom_window,
    )
    timeline = read_timeline_file(timeline_path)
    matrix = build_feature_matrix(timeline, spec,
                                  peak_prominence=cfg.peak_prominence_bpm,
                                  peak_min_separation=cfg.peak_min_separation_s)
    write_feature_matrix(matrix, out)
    print(f"features: {len(matrix)} rows x {len(matrix.feature_names)} features "
          f"({minutes}-minute windows) -> {out}")
    return 0


def cmd_rank(args) -> int:
    cfg = _load_config(args)
    features_path = Path(_pick(args.features, Path(cfg.output_dir) / "features.csv"))
    out = Path(_pick(args.output, Path(cfg.output_dir) / "ranking.csv"))
    scheme = _pick(args.scheme, cfg.mrmr_scheme)
    top = _pick(args.top, cfg.mrmr_top_k)
    matrix = read_feature_matrix(features_path)
    ranking = mrmr_rank(matrix, scheme=scheme,
                        spec=DiscretizationSpec(bins=cfg.discretization_bins,
                                                strategy=cfg.discretization_strategy))
    write_ranking(ranking, out)
    write_ranking_tsv(ranking, out.with_suffix(".tsv"))
    marked_path = out.with_suffix(".txt")
    width = max(len(name) for name, _ in ranking.entries)
    lines = [f"{i:>4}  {name:<{width}}  {score:<22.17g}{'  *' if i <= top else ''}"
             for i, (name, score) in enumerate(ranking.entries, start=1)]
    marked = "\n".join([f"MRMR ranking (scheme {scheme}, top {top} marked *)"] + lines) + "\n"
    marked_path.write_text(marked, encoding="utf-8")
    if args.figure:
        render_ranking_figure(ranking, out.with_suffix(".png"), top_k=top)
    sys.stdout.write(marked)
    print(f"ranking: {len(ranking.entries)} features -> {out}")
    return 0


def cmd_filter(args) -> int:
    cfg = _load_config(args)
    features_path = Path(_pick(args.features, Path(cfg.output_dir) / "features.csv"))
    out = Path(_pick(args.output, Path(cfg.output_dir) / "features_filtered.csv"))
    rules = ContextFilterRules(
        excluded_activities=frozenset(args.exclude_activity or cfg.excluded_activities),
        require_nonzero=frozenset(args.require_nonzero or cfg.require_nonzero),
        activity_whitelist=frozenset(args.whitelist_activity or cfg.activity_whitelist),
    )
    matrix = read_feature_matrix(features_path)
    kept = context_filter(matrix, rules)
    write_feature_matrix(kept, out)
    print(f"filter: kept {len(kept)} of {len(matrix)} rows -> {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    features_path = Path(_pick(args.features, Path(cfg.output_dir) / "features.csv"))
    out_dir = Path(_pick(args.output_dir, cfg.output_dir))
    kinds = tuple(args.model) if args.model else cfg.models
    cv = _pick(args.cv, cfg.cv_folds)
    test = _pick(args.test, cfg.test_fraction)
    seed = _pick(args.seed, cfg.seed)
    matrix = read_feature_matrix(features_path)
    if args.top_features:
        ranking = read_ranking(args.ranking) if args.ranking else mrmr_rank(
            matrix, scheme=cfg.mrmr_scheme,
            spec=DiscretizationSpec(bins=cfg.discretization_bins,
                                    strategy=cfg.discretization_strategy))
        matrix = matrix.select_features(ranking.top(args.top_features))
    out_dir.mkdir(parents=True, exist_ok=True)
    for kind in kinds:
        report = run_experiment(matrix, ModelSpec(kind, seed=seed), k=cv,
                                test_fraction=test, seed=seed)
        path = out_dir / f"report_{kind}.json"
        write_report(report, path)
        if args.figures:
            render_report_figures(report, out_dir, stem=f"report_{kind}")
        print(f"train: {kind} cv_accuracy {report.cv_accuracy:.4f} "
              f"test_accuracy {report.test_accuracy:.4f} -> {path}")
    return 0


def cmd_synth(args) -> int:
    if args.symmetric:
        params = AsymmetryParams.symmetric()
    else:
        params = AsymmetryParams(
            hr_peak_rate_boost=args.peak_rate_boost,
            hr_noise_boost=args.noise_boost,
            step_undercount_factor=args.step_undercount,
        )
    schedule = generate_schedule(days=args.days, seed=args.schedule_seed)
    result = synthesize_paired_dataset(schedule, params, seed=args.seed,
                                       out_dir=args.out,
                                       dominant_hand=args.dominant_hand)
    print(f"synth: {args.days} days, dominant hand {result.dominant_hand} -> {result.root}")
    print(f"ground truth: {result.ground_truth}")
    return 0


def cmd_report(args) -> int:
    report_paths = []
    for spec in args.reports:
        path = Path(spec)
        if path.is_dir():
            report_paths.extend(sorted(path.glob("report_*.json")))
        else:
            report_paths.append(path)
    if not report_paths:
        raise ReportError(f"no report files found under {', '.join(args.reports)}")
    reports = [read_report(p) for p in report_paths]
    ranking = read_ranking(args.ranking) if args.ranking else None
    written = render_summary(reports, args.output, ranking=ranking, top_k=args.top)
    sys.stdout.write((Path(args.output) / "summary.txt").read_text(encoding="utf-8"))
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_serve_survey(args) -> int:
    cfg = _load_config(args)
    host = "0.0.0.0" if args.public else args.host
    server = make_server(host, args.port, args.log, vocab=cfg.vocab)
    bound = server.server_address
    print(f"survey endpoint on http://{bound[0]}:{bound[1]} "
          f"(POST /entries, GET /entries/recent, GET /vocab)")
    print(f"context log: {args.log}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> _Parser:
    parser = _Parser(prog="whichwrist",
                     description="Wrist-side prediction pipeline and tools")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="pipeline configuration JSON file")

    p = sub.add_parser("ingest", help="parse raw exports into a labeled 1 Hz timeline")
    add_config(p)
    p.add_argument("--input", help="dataset root (left/ right/ context_log.csv)")
    p.add_argument("--output", help="timeline file to write")
    p.add_argument("--dominant-hand", choices=("left", "right"))
    p.add_argument("--device-setting", choices=DEVICE_SETTINGS)
    p.add_argument("--max-gap", type=int, help="max interpolation gap in seconds")
    p.add_argument("--utc-offset", type=float, help="hours offset for time-of-day labels")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("featurize", help="window the timeline into the feature matrix")
    add_config(p)
    p.add_argument("--timeline", help="timeline file from ingest")
    p.add_argument("--output", help="feature CSV to write")
    p.add_argument("--window", help="window length in minutes, e.g. 10m")
    p.add_argument("--min-valid-fraction", type=float)
    p.add_argument("--allow-custom-window", action="store_true")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("rank", help="rank features by minimum-redundancy maximum-relevance")
    add_config(p)
    p.add_argument("--features", help="feature CSV")
    p.add_argument("--output", help="ranking CSV to write (.tsv/.txt variants alongside)")
    p.add_argument("--scheme", choices=("miq", "mid"))
    p.add_argument("--top", type=int, help="how many leading features to mark")
    p.add_argument("--figure", action="store_true", help="also render a bar chart")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("filter", help="drop windows by context rules")
    add_config(p)
    p.add_argument("--features", help="feature CSV")
    p.add_argument("--output", help="filtered feature CSV to write")
    p.add_argument("--exclude-activity", action="append")
    p.add_argument("--require-nonzero", action="append")
    p.add_argument("--whitelist-activity", action="append")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("train", help="cross-validate and holdout-test classifiers")
    add_config(p)
    p.add_argument("--features", help="feature CSV")
    p.add_argument("--output-dir", help="directory for report files")
    p.add_argument("--model", action="append", help="model kind (repeatable)")
    p.add_argument("--cv", type=int, help="cross-validation folds")
    p.add_argument("--test", type=float, help="holdout fraction")
    p.add_argument("--seed", type=int)
    p.add_argument("--top-features", type=int,
                   help="train on the leading K features of the ranking")
    p.add_argument("--ranking", help="ranking CSV to take --top-features from")
    p.add_argument("--figures", action="store_true", help="also render confusion figures")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synth", help="generate a paired two-hand dataset")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--schedule-seed", type=int, default=7)
    p.add_argument("--out", required=True, help="dataset directory to create")
    p.add_argument("--dominant-hand", choices=("left", "right"), default="right")
    p.add_argument("--peak-rate-boost", type=float, default=0.5)
    p.add_argument("--noise-boost", type=float, default=1.0)
    p.add_argument("--step-undercount", type=float, default=0.9)
    p.add_argument("--symmetric", action="store_true",
                   help="zero asymmetry; overrides the three boost flags")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="render summary text and figures from report files")
    p.add_argument("--reports", nargs="+", required=True,
                   help="report JSON files or directories holding report_*.json")
    p.add_argument("--ranking", help="ranking CSV for the bar chart")
    p.add_argument("--output", required=True, help="directory for rendered output")
    p.add_argument("--top", type=int, help="highlight the leading K ranking bars")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve-survey", help="serve the context-capture HTTP endpoint")
    add_config(p)
    p.add_argument("--log", required=True, help="context log CSV to append to")
    p.add_argument("--host", default="127.0.0.1",
                   help="bind address (default localhost only)")
    p.add_argument("--port", type=int, default=8766)
    p.add_argument("--public", action="store_true",
                   help="bind every interface instead of localhost")
    p.set_defaults(func=cmd_serve_survey)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        # domain wrappers around file failures keep the original OSError as
        # their cause; those are I/O failures, not validation ones
        return 2 if isinstance(exc.__cause__, OSError) else 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
