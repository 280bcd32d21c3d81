"""
Command-line entry point.

Subcommands::

    citeskew synth    --out corpus.jsonl [--config synth.toml] [--seed N]
    citeskew ingest   --records c.jsonl --scheme scheme.csv
    citeskew analyze  --records c.jsonl --scheme scheme.csv --out outdir/
    citeskew shares   --cuts 50,90 < values.txt
    citeskew report   --matrix outdir/matrix.json --out report.csv

``analyze`` also reads a TOML file (``--config``) whose keys are the long
flag names with dashes replaced by underscores; flags given on the command
line win over the file.

Exit status:

    0  success
    1  unexpected failure
    2  missing input file
    3  schema violation (malformed record, duplicate id, bad scheme or config)
    4  degenerate analysis that produced no rows
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import replace
from typing import Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .corpus import DEFAULT_HORIZON, FieldScheme, IngestConfig, IngestError, filter_articles, ingest_records
from .inequality import CutSpec, DegenerateDistributionError, percentile_shares
from .linking import link_references, parse_window

log = logging.getLogger("citeskew")

EXIT_OK, EXIT_FAILURE, EXIT_MISSING, EXIT_SCHEMA, EXIT_EMPTY = 0, 1, 2, 3, 4
OUTCOME_ALIASES = {"raw": "times_cited", "times_cited": "times_cited", "mncs": "mncs"}
ALL_FICS = "all_refs,linked_refs,authors,pages,jif"


class SchemaError(ValueError):
    """Input or configuration that does not follow its documented format."""


class EmptyAnalysis(RuntimeError):
    pass


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _require(path: str, what: str) -> str:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _load_scheme(path: str) -> FieldScheme:
    try:
        return FieldScheme.load(_require(path, "scheme"))
    except ValueError as e:
        raise SchemaError(f"scheme {path}: {e}") from e


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    from .synth import SynthConfig, write_corpus

    try:
        cfg = SynthConfig.load(_require(args.config, "config")) if args.config else SynthConfig()
        overrides = {k: v for k, v in (("seed", args.seed), ("n_records", args.n_records)) if v is not None}
        cfg = replace(cfg, **overrides)
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise SchemaError(f"synth config: {e}") from e
    t = time.perf_counter()
    ledger = write_corpus(cfg, args.out, args.ledger)
    log.info("wrote %d records and %d planted links in %.1fs", len(ledger.record_ids),
             ledger.n_links, time.perf_counter() - t)
    return EXIT_OK


def _ingest(args):
    scheme = _load_scheme(args.scheme)
    _require(args.records, "records")
    conf = IngestConfig(horizon_year=args.horizon, on_malformed=args.on_malformed, workers=args.workers)
    return ingest_records(args.records, scheme, conf)


def cmd_ingest(args) -> int:
    snap = _ingest(args)
    sys.stdout.write(snap.stats.to_json() + "\n")
    return EXIT_OK


def cmd_analyze(args) -> int:
    from .analysis import FicKind, analyze, density_profile, emit_report

    try:
        window = parse_window(args.window)
        density_window = None if args.density_window == "none" else parse_window(args.density_window)
        cuts = CutSpec.parse(args.cuts)
        fics = [FicKind.parse(f) for f in _csv_list(args.fic)]
        outcomes = []
        for o in _csv_list(args.outcome):
            if o not in OUTCOME_ALIASES:
                raise ValueError(f"unknown outcome {o!r}; choose from raw, mncs")
            outcomes.append(OUTCOME_ALIASES[o])
        years = {int(y) for y in _csv_list(args.years)} if args.years else None
    except ValueError as e:
        raise SchemaError(str(e)) from e

    timings = {}
    t0 = t = time.perf_counter()
    snap = _ingest(args)
    timings["ingest"] = time.perf_counter() - t
    n_ingested = len(snap)
    snap = filter_articles(snap, years if years is not None else set(snap.pub_year.tolist()))
    t = time.perf_counter()
    index = link_references(snap, horizon_year=args.horizon)
    timings["link"] = time.perf_counter() - t
    t = time.perf_counter()
    matrix = analyze(snap, index, window, cuts, fics, outcomes, source=args.source)
    if density_window is not None:
        matrix.extend(density_profile(snap, index, None, density_window, cuts))
    timings["analyze"] = time.perf_counter() - t
    for notice in matrix.notices:
        log.info("%s", notice)
    if not matrix.rows:
        raise EmptyAnalysis("analysis produced no rows")

    os.makedirs(args.out, exist_ok=True)
    t = time.perf_counter()
    written = emit_report(matrix, os.path.join(args.out, "report.csv"))
    matrix.save(os.path.join(args.out, "matrix.json"))
    written.append("matrix.json")
    if args.export_links:
        index.export_links(os.path.join(args.out, "links.csv"))
        written.append("links.csv")
    timings["report"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t0

    settings = {k: getattr(args, k) for k in sorted(ANALYZE_KEYS) if k != "workers"}
    stats = index.stats.as_dict()
    manifest = {
        "inputs": {
            "records": {"path": args.records, "sha256": _sha256(args.records)},
            "scheme": {"path": args.scheme, "sha256": _sha256(args.scheme)},
        },
        "config": settings,
        "config_sha256": hashlib.sha256(json.dumps(settings, sort_keys=True).encode()).hexdigest(),
        "counts": {
            "records_ingested": n_ingested,
            "records_analyzed": len(snap),
            "rejects": dict(sorted(snap.stats.rejects.items())),
            "matrix_rows": len(matrix.rows),
            "report_lines": sum(len(r.breakdown.shares) for r in matrix.rows),
            "notices": len(matrix.notices),
        },
        "links": {
            **stats,
            "sum_linked_refs": int(index.linked_ref_count.sum()),
            "sum_inbound": int(index.inbound_total.sum()),
        },
        "outputs": [os.path.basename(p) for p in written],
        "workers": args.workers,
        "timings_s": {k: round(v, 3) for k, v in timings.items()},
    }
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    log.info("%d rows written to %s in %.1fs", len(matrix.rows), args.out, timings["total"])
    return EXIT_OK


def cmd_shares(args) -> int:
    try:
        cuts = CutSpec.parse(args.cuts)
        values = np.array([float(tok) for tok in sys.stdin.read().split()], dtype=np.float64)
    except ValueError as e:
        raise SchemaError(str(e)) from e
    if values.size == 0:
        raise EmptyAnalysis("no values on standard input")
    try:
        b = percentile_shares(values, cuts)
    except DegenerateDistributionError as e:
        raise EmptyAnalysis(str(e)) from e
    except ValueError as e:
        raise SchemaError(str(e)) from e
    for label, share in zip(b.labels, b.shares):
        print(f"{label}\t{share:.{args.digits}f}")
    print(f"gini\t{b.gini:.{args.digits}f}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .analysis import AnalysisMatrix, emit_report

    try:
        matrix = AnalysisMatrix.load(_require(args.matrix, "matrix"))
    except (ValueError, KeyError) as e:
        raise SchemaError(f"matrix {args.matrix}: {e}") from e
    if not matrix.rows:
        raise EmptyAnalysis("matrix has no rows")
    emit_report(matrix, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

ANALYZE_KEYS = {"records", "scheme", "years", "window", "density_window", "cuts", "fic", "outcome",
                "source", "horizon", "on_malformed", "workers", "out", "export_links"}


def _ingest_flags(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--records", required=required, help="JSON-lines corpus")
    p.add_argument("--scheme", required=required, help="CSV mapping subject category to discipline")
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON, help="last citing year in the data")
    p.add_argument("--on-malformed", choices=("skip", "fail"), default="skip",
                   help="skip and count malformed lines, or stop at the first one")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="parser processes; results do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="citeskew", description="Citation-impact inequality breakdowns.",
                                     formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus with its ledger", formatter_class=fmt)
    p.add_argument("--config", default=None, help="TOML generator config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--n-records", type=int, default=None, help="override the config record count")
    p.add_argument("--out", required=True, help="output JSON-lines path")
    p.add_argument("--ledger", default=None, help="prefix for ledger sidecars (default: from --out)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate a corpus and print ingestion statistics", formatter_class=fmt)
    _ingest_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", help="run the full pipeline and write the report", formatter_class=fmt)
    p.add_argument("--config", default=None, help="TOML file with defaults for the flags below")
    _ingest_flags(p, required=False)
    p.add_argument("--years", default=None, help="comma-separated publication years (default: all)")
    p.add_argument("--window", default=f"open:{DEFAULT_HORIZON}", help="citation window, fixed:K, fixed:A-B or open:YYYY")
    p.add_argument("--density-window", default="fixed:3", help="window for pooled density rows, or none")
    p.add_argument("--cuts", default="50,90", help="percentile cut points")
    p.add_argument("--fic", default=ALL_FICS, help="covariates used as rankings")
    p.add_argument("--outcome", default="raw,mncs", help="outcomes ranked by each covariate")
    p.add_argument("--source", choices=("auto", "links", "supplied"), default="auto",
                   help="citation counts from supplied histograms, from links, or supplied when present")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--export-links", action="store_true",
                   help="also write links.csv (citing_id,cited_id,citing_year)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("shares", help="percentile shares and Gini of numbers on stdin", formatter_class=fmt)
    p.add_argument("--cuts", default="50,90", help="percentile cut points")
    p.add_argument("--digits", type=int, default=6, help="decimal places printed")
    p.set_defaults(func=cmd_shares)

    p = sub.add_parser("report", help="re-emit the report CSV from a saved matrix", formatter_class=fmt)
    p.add_argument("--matrix", required=True, help="matrix.json written by analyze")
    p.add_argument("--out", required=True, help="report CSV path or directory")
    p.set_defaults(func=cmd_report)
    return parser


def _parse(parser: argparse.ArgumentParser, argv: Sequence[str] | None) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.command != "analyze":
        return args
    if args.config:
        with open(_require(args.config, "config"), "rb") as fh:
            try:
                conf = tomllib.load(fh)
            except tomllib.TOMLDecodeError as e:
                raise SchemaError(f"config {args.config}: {e}") from e
        unknown = set(conf) - ANALYZE_KEYS
        if unknown:
            raise SchemaError(f"config {args.config}: unknown keys {sorted(unknown)}")
        conf = {k: ",".join(map(str, v)) if isinstance(v, list) else v for k, v in conf.items()}
        sub = parser._subparsers._group_actions[0].choices["analyze"]
        sub.set_defaults(**conf)
        args = parser.parse_args(argv)
    for key in ("records", "scheme", "out"):
        if getattr(args, key) is None:
            parser.error(f"analyze: --{key} is required (flag or config key)")
    return args


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2),
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        return args.func(args)
    except FileNotFoundError as e:
        print(f"citeskew: {e}", file=sys.stderr)
        return EXIT_MISSING
    except (SchemaError, IngestError) as e:
        print(f"citeskew: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except EmptyAnalysis as e:
        print(f"citeskew: {e}", file=sys.stderr)
        return EXIT_EMPTY


if __name__ == "__main__":
    sys.exit(main())
