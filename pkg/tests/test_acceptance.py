"""Exit criteria for the encode/decode pipeline.

Run alone with ``pytest tests/test_acceptance.py -v``; the terminal summary
prints one PASS/FAIL line per criterion.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import pytest

from ifsketch.cli import main
from ifsketch.dataset import Database, db_to_bytes, frequency, read_db
from ifsketch.errors import DecodeAmbiguous
from ifsketch.experiment import ExperimentConfig, make_instance
from ifsketch.lowerbound import (
    decode_const,
    decode_general,
    empirical_co_occurrence_rate,
    entropy_bits,
    gen_const_instance,
    gen_general_instance,
    log2_factorial_exact,
    matched_violations,
    random_permutations,
    theoretical_co_occurrence_probability,
    verify_gap,
)
from ifsketch.sketch import IndicatorAnswer, SketchParams, build_exact_pairs, build_sampling

TRIALS = 100


@dataclass
class Outcome:
    seed: int
    inst: object
    gap_pass: bool
    unmatched_pairs: int
    decode_ok: bool
    sketch_bits: int


def _pipeline(config: ExperimentConfig, sketch_eps: Fraction, decode) -> list[Outcome]:
    out = []
    for t in range(TRIALS):
        seed = config.seed + t
        inst = make_instance(config, seed)
        report = verify_gap(inst)
        blob = build_exact_pairs(inst.db, SketchParams(sketch_eps, 2, config.d))
        ok = False
        if report.passed:
            try:
                ok = decode(blob) == inst.perms
            except DecodeAmbiguous:
                ok = False
        out.append(Outcome(seed, inst, report.passed, report.unmatched_pairs, ok, blob.size_bits))
    return out


@pytest.fixture(scope="module")
def single_runs():
    config = ExperimentConfig(256, 1, n=288)
    return _pipeline(config, Fraction(1, 8), lambda b: ((decode_const(b, 256),),))


@pytest.fixture(scope="module")
def block_runs():
    config = ExperimentConfig(64, Fraction(1, 4), rows_per_block=200)
    return _pipeline(config, Fraction(1, 32), lambda b: decode_general(b, 64, Fraction(1, 4)))


def test_c1_single_permutation_pipeline(single_runs, criterion):
    passed = [o for o in single_runs if o.gap_pass]
    recovered = [o for o in passed if o.decode_ok]
    pairs_ok = all(o.unmatched_pairs == 2 * math.comb(128, 2) + 128 * 127 for o in single_runs)
    ok = len(passed) >= 99 and len(recovered) == len(passed) and pairs_ok
    criterion(
        "C1 single-permutation pipeline d=256 eps=1/8 n=288",
        ok,
        f"gap pass {len(passed)}/{TRIALS} (need >=99), recovered {len(recovered)}/{len(passed)}",
    )
    assert pairs_ok
    assert len(passed) >= 99
    assert len(recovered) == len(passed)


def test_c2_block_pipeline(block_runs, criterion):
    passed = [o for o in block_runs if o.gap_pass]
    recovered = [o for o in passed if o.decode_ok]
    ok = len(passed) >= 95 and len(recovered) == len(passed)
    criterion(
        "C2 block pipeline d=64 eps=1/4 rpb=200",
        ok,
        f"gap pass {len(passed)}/{TRIALS} (need >=95), recovered all 16 perms {len(recovered)}/{len(passed)}",
    )
    assert all(len(o.inst.perms) * len(o.inst.perms[0]) == 16 for o in block_runs)
    assert len(passed) >= 95
    assert len(recovered) == len(passed)


def test_c3_structural_zero(single_runs, block_runs, criterion):
    checked = 0
    violations = 0
    for o in single_runs + block_runs:
        inst = o.inst
        checked += inst.n * inst.K * inst.K * inst.m
        violations += matched_violations(inst)
    criterion("C3 structural zero", violations == 0, f"{violations} violations in {checked} row x matched-pair checks")
    assert violations == 0


def test_c4_co_occurrence_rate(criterion):
    pi = random_permutations(1, 16, 4)[0][0]
    i = 5
    j = (pi[i] + 1) % 16
    rate = empirical_co_occurrence_rate(pi, i, j, 100_000, seed=4)
    ok = 0.24 <= rate <= 0.26 and theoretical_co_occurrence_probability() == Fraction(1, 4)
    criterion("C4 co-occurrence rate m=16", ok, f"empirical {rate:.5f} in [0.24, 0.26], theory 1/4")
    assert ok


def test_c5_oracle_equivalence(criterion):
    eps = Fraction(1, 4)
    params = SketchParams(eps, 2, 16)
    exact_mismatches = 0
    sampling_bad_builds = 0
    for seed in range(50):
        rng = np.random.default_rng(500 + seed)
        n = int(rng.integers(1, 257))
        db = Database(rng.random((n, 16)) < rng.uniform(0.2, 0.8))
        exact = build_exact_pairs(db, params)
        sampled = build_sampling(db, params, seed=seed)
        bad = False
        for t in itertools.combinations(range(16), 2):
            f = frequency(db, t)
            want = IndicatorAnswer.YES if f > eps / 2 else IndicatorAnswer.NO
            exact_mismatches += exact.query(t) is not want
            got = sampled.query(t)
            if (f >= eps and got is IndicatorAnswer.NO) or (f <= eps / 2 and got is IndicatorAnswer.YES):
                bad = True
        sampling_bad_builds += bad
    ok = exact_mismatches == 0 and sampling_bad_builds / 50 <= 0.25
    criterion(
        "C5 oracle equivalence d=16",
        ok,
        f"exact mismatches {exact_mismatches}/6000, sampling promise violations in {sampling_bad_builds}/50 builds (<= 25%)",
    )
    assert exact_mismatches == 0
    assert sampling_bad_builds / 50 <= 0.25


def test_c6_entropy_accounting(block_runs, criterion):
    small = abs(entropy_bits(16, Fraction(1, 2)) - 4 * log2_factorial_exact(4)) <= 1e-9
    factorials = all(abs(entropy_bits(2 * m, 1) - log2_factorial_exact(m)) <= 1e-9 for m in range(1, 21))
    block_entropy = entropy_bits(64, Fraction(1, 4))
    near = abs(block_entropy - 244.8) < 0.05
    passing = [o for o in block_runs if o.gap_pass]
    sizes = all(o.sketch_bits == math.comb(64, 2) == 2016 for o in block_runs)
    dominates = all(o.sketch_bits >= block_entropy for o in passing)
    ok = small and factorials and near and sizes and dominates
    criterion(
        "C6 entropy accounting",
        ok,
        f"entropy(64,1/4)={block_entropy:.3f} bits, sketch 2016 bits >= entropy on {len(passing)} passing trials",
    )
    assert small and factorials and near and sizes and dominates


def test_c7_k1_reduction(criterion):
    ok = True
    for d in (4, 8, 16):
        for seed in range(5):
            pi = random_permutations(1, d // 2, seed)[0][0]
            const = gen_const_instance(d, pi, 48, seed)
            general = gen_general_instance(d, 1, [[pi]], 48, seed)
            ok &= db_to_bytes(const.db) == db_to_bytes(general.db)
            blob = build_exact_pairs(const.db, SketchParams(Fraction(1, 8), 2, d))
            try:
                ok &= decode_general(blob, d, 1) == ((decode_const(blob, d),),)
            except DecodeAmbiguous as exc:
                # both decoders must fail identically
                with pytest.raises(DecodeAmbiguous) as other:
                    decode_general(blob, d, 1)
                ok &= other.value.where[-1] == exc.where[-1]
    criterion("C7 K=1 reduction d in {4,8,16}", ok, "byte-identical databases, identical decodes")
    assert ok


def test_c8_determinism_and_formats(tmp_path, capsys, criterion):
    outs = []
    for sub in ("a", "b"):
        d = tmp_path / sub
        assert main(["gen", "--d", "64", "--eps", "1/4", "--seed", "2", "--out", str(d)]) == 0
        outs.append(((d / "instance.ifdb").read_bytes(), (d / "instance.manifest").read_bytes()))
    same = outs[0] == outs[1]
    rng = np.random.default_rng(8)
    round_trips = 0
    for _ in range(1000):
        n, d = int(rng.integers(1, 65)), int(rng.integers(2, 130))
        db = Database(rng.integers(0, 2, size=(n, d)))
        round_trips += read_db(db_to_bytes(db)) == db
    ok = same and round_trips == 1000
    criterion("C8 determinism and formats", ok, f"gen byte-identical={same}, IFDB round-trips {round_trips}/1000")
    assert ok
