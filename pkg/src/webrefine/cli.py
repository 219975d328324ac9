"""Command-line entry point.

Subcommands: ingest, filter, dedup-fuzzy, dedup-exact, run, report,
lsh-curve. Exit codes: 0 success, 2 config error, 3 input error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import exact, fuzzy, pipeline, report
from .errors import (
    BadMagic,
    ChainBroken,
    ConfigError,
    GzipError,
    MalformedRecord,
    Truncated,
    TruncatedRecord,
    WebrefineError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3

_INPUT_ERRORS = (
    FileNotFoundError,
    BadMagic,
    TruncatedRecord,
    GzipError,
    MalformedRecord,
    Truncated,
    ChainBroken,
)


def _add_config_arg(parser):
    parser.add_argument("--config", help="JSON config file; flags override its keys")
    parser.add_argument("--input", nargs="+", help="input files or globs")
    parser.add_argument("--output-dir", help="output directory")
    parser.add_argument("--part", type=int, help="part index to process")
    parser.add_argument("--parts", type=int, help="total number of parts")
    parser.add_argument("--registry", help="kept-URL registry file")
    parser.add_argument("--workers", type=int, help="worker process count")
    parser.add_argument("--seed", type=int, help="base random seed")
    parser.add_argument("--figures", action="store_true", default=None,
                        help="render stage figures next to the stats output")


def _build_config(args, stage_subset=None) -> pipeline.PipelineConfig:
    data = {}
    if args.config:
        data = pipeline.PipelineConfig.load(args.config).__dict__.copy()
        data["stages"] = list(data["stages"])
    for key in ("input", "output_dir", "part", "parts", "registry", "workers", "seed", "figures"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    for key, attr in (
        ("blocklist_dir", "blocklist_dir"),
        ("block_categories", "block_categories"),
        ("wordlists_dir", "wordlists_dir"),
        ("hq_exclusions", "hq_exclusions"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            data.setdefault("url", {})[key] = value
    for key, attr in (
        ("min_match", "min_match"),
        ("strategy", "strategy"),
        ("drop_partial_threshold", "drop_partial_threshold"),
        ("min_remaining_chars", "min_remaining_chars"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            data.setdefault("exact", {})[key] = value
    if stage_subset is not None:
        data["stages"] = [s for s in pipeline.STAGE_ORDER if s in stage_subset]
    return pipeline.PipelineConfig.load(data)


def _cmd_run(args) -> int:
    config = _build_config(args)
    result = pipeline.run_part(config)
    print(f"wrote {result.records_written} records to {result.output_path}")
    print(report.render_table(result.stats), end="")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    config = _build_config(args, stage_subset=())
    result = pipeline.run_part(config)
    print(f"ingested {result.records_written} candidates to {result.output_path}")
    return EXIT_OK


def _cmd_filter(args) -> int:
    subset = (
        "url_filter", "url_dedup", "extract", "lang_id",
        "repetition", "quality", "line_corrections",
    )
    config = _build_config(args, stage_subset=subset)
    result = pipeline.run_part(config)
    print(f"kept {result.records_written} of {result.candidates} documents")
    print(report.render_table(result.stats), end="")
    return EXIT_OK


def _cmd_dedup_fuzzy(args) -> int:
    config = _build_config(args, stage_subset=("fuzzy_dedup",))
    result = pipeline.run_part(config)
    print(f"kept {result.records_written} of {result.candidates} documents")
    return EXIT_OK


def _cmd_dedup_exact(args) -> int:
    config = _build_config(args, stage_subset=("exact_dedup",))
    result = pipeline.run_part(config)
    print(f"kept {result.records_written} of {result.candidates} documents")
    return EXIT_OK


def _cmd_report(args) -> int:
    text = Path(args.stats).read_text("utf-8")
    stats, _, _ = report.parse_tsv_report(text)
    if args.format == "tsv":
        print(report.to_tsv(stats), end="")
    else:
        print(report.render_table(stats), end="")
    if args.figures_dir:
        out = Path(args.figures_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.save_stage_figure(stats, out / "stages.png")
        print(f"figure written to {out / 'stages.png'}")
    return EXIT_OK


def _cmd_lsh_curve(args) -> int:
    points = args.similarities or [0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 0.95, 1.0]
    print(f"{'similarity':>10} {'P(detect)':>10}")
    for s in points:
        print(f"{s:>10.3f} {fuzzy.match_probability(s, args.b, args.r):>10.4f}")
    if args.figure:
        report.save_lsh_curve_figure(args.b, args.r, Path(args.figure), points)
        print(f"figure written to {args.figure}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="webrefine", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, helptext in (
        ("run", _cmd_run, "run every configured stage for one part"),
        ("ingest", _cmd_ingest, "WARC to candidate records, no filtering"),
        ("filter", _cmd_filter, "URL, extraction, language, and quality gates"),
        ("dedup-fuzzy", _cmd_dedup_fuzzy, "MinHash-LSH near-duplicate removal"),
        ("dedup-exact", _cmd_dedup_exact, "suffix-array exact-substring removal"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_config_arg(p)
        p.set_defaults(fn=fn)
        if name == "filter":
            p.add_argument("--blocklist-dir")
            p.add_argument("--block-categories", nargs="+")
            p.add_argument("--wordlists-dir")
            p.add_argument("--hq-exclusions", nargs="+")
        if name == "dedup-exact":
            p.add_argument("--min-match", type=int, dest="min_match")
            p.add_argument("--strategy", choices=exact.STRATEGIES)
            p.add_argument("--drop-partial-threshold", type=float, dest="drop_partial_threshold")
            p.add_argument("--min-remaining-chars", type=int, dest="min_remaining_chars")

    p = sub.add_parser("report", help="render a stats report")
    p.add_argument("--stats", required=True, help="stats.tsv produced by a run")
    p.add_argument("--format", choices=("human", "tsv"), default="human")
    p.add_argument("--figures-dir", help="also render figures into this directory")
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("lsh-curve", help="print the LSH detection-probability table")
    p.add_argument("--b", type=int, default=20, help="hashes per bucket")
    p.add_argument("--r", type=int, default=450, help="bucket count")
    p.add_argument("--similarities", type=float, nargs="+")
    p.add_argument("--figure", help="write the S-curve figure to this file")
    p.set_defaults(fn=_cmd_lsh_curve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except WebrefineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
