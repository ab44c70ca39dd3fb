"""Command-line driver.

    ifsketch gen        --d 64 --eps 1/4 --seed 2 --out run/
    ifsketch sketch     --out run/ [--sketch exact|sampling] [--sketch-eps 1/32]
    ifsketch decode     --out run/
    ifsketch experiment --d 256 --eps 1 --trials 100 --n 288 --out run/
    ifsketch report     --out run/ [--csv report.csv]

Every subcommand reads and writes fixed file names inside ``--out``:
``instance.ifdb``, ``instance.manifest``, ``sketch.ifsk``,
``decoded.manifest``, ``records.jsonl``, ``report.csv``, ``summary.json``.

Exit codes: 0 success, 1 decode did not recover the instance,
2 configuration error, 3 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .dataset import read_db, write_db
from .errors import DecodeAmbiguous, FormatError, ParamError
from .experiment import (
    SKETCH_KINDS,
    ExperimentConfig,
    build_sketch,
    decode_instance,
    format_fraction,
    make_instance,
    parse_fraction,
    read_jsonl,
    run_experiment,
    summarize,
    write_csv,
    write_jsonl,
)
from .lowerbound import entropy_bits
from .manifest import Manifest, read_manifest, write_manifest
from .sketch import read_sketch, write_sketch

log = logging.getLogger("ifsketch")

EXIT_OK, EXIT_DECODE, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

DB_FILE = "instance.ifdb"
MANIFEST_FILE = "instance.manifest"
SKETCH_FILE = "sketch.ifsk"
DECODED_FILE = "decoded.manifest"
RECORDS_FILE = "records.jsonl"
REPORT_FILE = "report.csv"
SUMMARY_FILE = "summary.json"


def _fraction_arg(text: str) -> Fraction:
    try:
        return parse_fraction(text)
    except ParamError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _shared(p: argparse.ArgumentParser, *, instance: bool = False, sketching: bool = False) -> None:
    p.add_argument("--out", type=Path, default=Path("."), help="working directory")
    if instance:
        p.add_argument("--d", type=int, required=True, help="column count")
        p.add_argument("--eps", type=_fraction_arg, required=True, help="instance epsilon as p/q")
        p.add_argument("--seed", type=int, default=0)
        rows = p.add_mutually_exclusive_group()
        rows.add_argument("--rows-per-block", type=int, default=None)
        rows.add_argument("--n", type=int, default=None, help="total rows (multiple of 1/eps)")
    if sketching:
        p.add_argument("--sketch", choices=SKETCH_KINDS, default="exact")
        p.add_argument("--sketch-eps", type=_fraction_arg, default=None,
                       help="sketch epsilon as p/q (default: instance eps / 8)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ifsketch",
        description="Itemset-frequency-indicator sketches and permutation-encoding hard instances.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a hard instance (database + manifest)")
    _shared(gen, instance=True)

    sk = sub.add_parser("sketch", help="build a sketch of the instance database")
    _shared(sk, sketching=True)
    sk.add_argument("--seed", type=int, default=0, help="sampling seed")

    dec = sub.add_parser("decode", help="recover the permutations from the sketch alone")
    _shared(dec)

    exp = sub.add_parser("experiment", help="run seeded encode/decode trials")
    _shared(exp, instance=True, sketching=True)
    exp.add_argument("--trials", type=int, default=1)
    exp.add_argument("--jobs", type=int, default=1, help="worker processes")

    rep = sub.add_parser("report", help="render trial records as CSV")
    _shared(rep)
    rep.add_argument("--csv", type=Path, default=None, help="write here instead of stdout")
    return parser


def _config(args, **extra) -> ExperimentConfig:
    return ExperimentConfig(
        d=args.d,
        epsilon=args.eps,
        seed=args.seed,
        rows_per_block=args.rows_per_block,
        n=args.n,
        **extra,
    )


def cmd_gen(args) -> int:
    config = _config(args)
    inst = make_instance(config, config.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    write_db(inst.db, args.out / DB_FILE)
    write_manifest(Manifest.of(inst), args.out / MANIFEST_FILE)
    print(
        f"d={inst.d} eps={format_fraction(inst.epsilon)} K={inst.K} m={inst.m} "
        f"n={inst.n} permutations={inst.K ** 2} -> {args.out}"
    )
    return EXIT_OK


def cmd_sketch(args) -> int:
    manifest = read_manifest(args.out / MANIFEST_FILE)
    db = read_db(args.out / DB_FILE)
    sketch_eps = args.sketch_eps if args.sketch_eps is not None else manifest.epsilon / 8
    blob = build_sketch(args.sketch, db, sketch_eps, args.seed)
    write_sketch(blob, args.out / SKETCH_FILE)
    print(f"{blob.kind.name} sketch eps={format_fraction(sketch_eps)} size_bits={blob.size_bits}")
    return EXIT_OK


def cmd_decode(args) -> int:
    manifest = read_manifest(args.out / MANIFEST_FILE)
    blob = read_sketch(args.out / SKETCH_FILE)
    if blob.params.d != manifest.d:
        raise FormatError(f"sketch has d={blob.params.d}, manifest has d={manifest.d}")
    stats: dict = {}
    try:
        perms = decode_instance(blob, manifest.d, manifest.epsilon, stats)
    except DecodeAmbiguous as exc:
        print(f"decode failed: {exc}")
        return EXIT_DECODE
    decoded = manifest.with_perms(perms)
    write_manifest(decoded, args.out / DECODED_FILE)
    ok = decoded.perms == manifest.perms
    print(
        f"queries={stats['queries']} recovered={'yes' if ok else 'no'} "
        f"sketch_bits={blob.size_bits} entropy_bits={entropy_bits(manifest.d, manifest.epsilon):.3f}"
    )
    return EXIT_OK if ok else EXIT_DECODE


def cmd_experiment(args) -> int:
    config = _config(
        args,
        trials=args.trials,
        sketch=args.sketch,
        sketch_epsilon=args.sketch_eps,
        jobs=args.jobs,
    )
    log.info("running %d trials: %s", config.trials, config)
    records = run_experiment(config)
    summary = summarize(records)
    summary.update(
        d=config.d,
        eps=format_fraction(config.epsilon),
        sketch=config.sketch,
        sketch_eps=format_fraction(config.sketch_epsilon),
        rows_per_block=config.block_rows,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / RECORDS_FILE, "w") as fh:
        write_jsonl(records, fh)
    with open(args.out / REPORT_FILE, "w", newline="") as fh:
        write_csv(records, fh)
    (args.out / SUMMARY_FILE).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for key in sorted(summary):
        print(f"{key}: {summary[key]}")
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.out / RECORDS_FILE) as fh:
        records = read_jsonl(fh)
    if args.csv is None:
        write_csv(records, sys.stdout)
    else:
        with open(args.csv, "w", newline="") as fh:
            write_csv(records, fh)
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "sketch": cmd_sketch,
    "decode": cmd_decode,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ParamError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
