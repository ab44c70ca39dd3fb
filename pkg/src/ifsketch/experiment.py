"""Seeded encode -> audit -> sketch -> decode trials and their CSV report.

Trial ``t`` uses seed ``config.seed + t`` for the permutations, the rows and
(for the sampling sketch) the row sample, so any trial can be replayed alone.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from typing import IO, Iterable, Optional, Union

from .errors import DecodeAmbiguous, ParamError
from .lowerbound import (
    ConstInstance,
    GeneralInstance,
    decode_const,
    decode_general,
    default_rows_per_block,
    entropy_bits,
    gen_const_instance,
    gen_general_instance,
    general_layout,
    random_permutations,
    verify_gap,
)
from .sketch import SketchBlob, SketchParams, build_exact_pairs, build_sampling

CSV_HEADER = ("trial", "seed", "gap_pass", "decode_ok", "sketch_bits", "entropy_bits", "queries", "ms")
SKETCH_KINDS = ("exact", "sampling")


def parse_fraction(text: str) -> Fraction:
    """Parse ``p/q`` (or a bare integer); decimals are rejected."""
    text = text.strip()
    num, sep, den = text.partition("/")
    if not num.isdigit() or (sep and not den.isdigit()):
        raise ParamError(f"expected an exact fraction p/q, got {text!r}")
    if sep and int(den) == 0:
        raise ParamError(f"zero denominator in {text!r}")
    return Fraction(int(num), int(den) if sep else 1)


def format_fraction(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated run parameters.

    ``epsilon == 1`` selects the single-permutation constant layout (m = d/2);
    the sketch parameter then defaults to 1/8.  ``n`` may replace
    ``rows_per_block`` and must be a multiple of K.
    """

    d: int
    epsilon: Fraction
    seed: int = 0
    trials: int = 1
    rows_per_block: Optional[int] = None
    n: Optional[int] = None
    sketch: str = "exact"
    sketch_epsilon: Optional[Fraction] = None
    jobs: int = 1

    def __post_init__(self):
        if isinstance(self.epsilon, float):
            raise ParamError("epsilon must be exact")
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        K, _ = general_layout(self.d, self.epsilon)
        if self.trials < 1:
            raise ParamError(f"trials must be >= 1, got {self.trials}")
        if self.sketch not in SKETCH_KINDS:
            raise ParamError(f"sketch must be one of {SKETCH_KINDS}, got {self.sketch!r}")
        if self.rows_per_block is not None and self.n is not None:
            raise ParamError("give rows_per_block or n, not both")
        if self.n is not None and (self.n < 1 or self.n % K):
            raise ParamError(f"n={self.n} must be a positive multiple of K={K}")
        if self.rows_per_block is not None and self.rows_per_block < 1:
            raise ParamError("rows_per_block must be >= 1")
        if self.sketch_epsilon is None:
            object.__setattr__(self, "sketch_epsilon", self.epsilon / 8)
        else:
            object.__setattr__(self, "sketch_epsilon", Fraction(self.sketch_epsilon))
        if not 0 < self.sketch_epsilon <= 1:
            raise ParamError(f"sketch epsilon must lie in (0, 1], got {self.sketch_epsilon}")
        if self.jobs < 1:
            raise ParamError("jobs must be >= 1")

    @property
    def K(self) -> int:
        return general_layout(self.d, self.epsilon)[0]

    @property
    def m(self) -> int:
        return general_layout(self.d, self.epsilon)[1]

    @property
    def block_rows(self) -> int:
        if self.rows_per_block is not None:
            return self.rows_per_block
        if self.n is not None:
            return self.n // self.K
        return default_rows_per_block(self.d)


@dataclass
class TrialRecord:
    trial: int
    seed: int
    gap_pass: bool
    decode_ok: bool
    sketch_size_bits: int
    entropy_bits: float
    queries_issued: int
    wall_time: float
    detail: str = ""

    def csv_row(self) -> list[str]:
        return [
            str(self.trial),
            str(self.seed),
            "true" if self.gap_pass else "false",
            "true" if self.decode_ok else "false",
            str(self.sketch_size_bits),
            f"{self.entropy_bits:.6f}",
            str(self.queries_issued),
            f"{self.wall_time * 1000:.3f}",
        ]


Instance = Union[ConstInstance, GeneralInstance]


def make_instance(config: ExperimentConfig, seed: int) -> Instance:
    K, m = config.K, config.m
    perms = random_permutations(K, m, seed)
    if K == 1:
        return gen_const_instance(config.d, perms[0][0], config.block_rows, seed)
    return gen_general_instance(config.d, config.epsilon, perms, config.block_rows, seed)


def build_sketch(
    kind: str, db, sketch_epsilon: Fraction, seed: int
) -> SketchBlob:
    params = SketchParams(sketch_epsilon, 2, db.d)
    if kind == "sampling":
        return build_sampling(db, params, seed)
    return build_exact_pairs(db, params)


def decode_instance(blob: SketchBlob, d: int, epsilon: Fraction, stats: Optional[dict] = None):
    """Decode into a K x K permutation matrix (1 x 1 for the constant layout)."""
    if epsilon == 1:
        return ((decode_const(blob, d, stats=stats),),)
    return decode_general(blob, d, epsilon, stats=stats)


def run_trial(config: ExperimentConfig, trial: int) -> TrialRecord:
    seed = config.seed + trial
    start = time.perf_counter()
    inst = make_instance(config, seed)
    report = verify_gap(inst)
    blob = build_sketch(config.sketch, inst.db, config.sketch_epsilon, seed)
    decode_ok = False
    queries = 0
    detail = ""
    if report.passed:
        stats: dict = {}
        try:
            decoded = decode_instance(blob, config.d, config.epsilon, stats)
            decode_ok = decoded == inst.perms
            if not decode_ok:
                detail = "decoded permutations differ"
        except DecodeAmbiguous as exc:
            detail = str(exc)
        queries = stats.get("queries", 0)
    else:
        detail = f"gap failed: {len(report.violations)} violations"
    return TrialRecord(
        trial=trial,
        seed=seed,
        gap_pass=report.passed,
        decode_ok=decode_ok,
        sketch_size_bits=blob.size_bits,
        entropy_bits=entropy_bits(config.d, config.epsilon),
        queries_issued=queries,
        wall_time=time.perf_counter() - start,
        detail=detail,
    )


def _run_one(args: tuple[ExperimentConfig, int]) -> TrialRecord:
    return run_trial(*args)


def run_experiment(config: ExperimentConfig) -> list[TrialRecord]:
    """All trials, in trial order even when run in parallel."""
    work = [(config, t) for t in range(config.trials)]
    if config.jobs == 1:
        return [_run_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=config.jobs) as pool:
        return list(pool.map(_run_one, work))


def summarize(records: list[TrialRecord]) -> dict:
    total = len(records)
    gap_passed = [r for r in records if r.gap_pass]
    recovered = [r for r in gap_passed if r.decode_ok]
    return {
        "trials": total,
        "gap_pass_rate": len(gap_passed) / total if total else 0.0,
        "recovery_rate": len([r for r in records if r.decode_ok]) / total if total else 0.0,
        "conditional_recovery_rate": len(recovered) / len(gap_passed) if gap_passed else 0.0,
        "mean_sketch_bits": sum(r.sketch_size_bits for r in records) / total if total else 0.0,
        "entropy_bits": records[0].entropy_bits if records else 0.0,
        "size_at_least_entropy": all(
            r.sketch_size_bits >= r.entropy_bits for r in gap_passed
        ),
    }


def write_csv(records: Iterable[TrialRecord], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(r.csv_row())


def write_jsonl(records: Iterable[TrialRecord], fh: IO[str]) -> None:
    for r in records:
        fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")


def read_jsonl(fh: IO[str]) -> list[TrialRecord]:
    names = {f.name for f in fields(TrialRecord)}
    out = []
    for line in fh:
        if line.strip():
            raw = json.loads(line)
            out.append(TrialRecord(**{k: v for k, v in raw.items() if k in names}))
    return out
