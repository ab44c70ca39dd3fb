"""Permutation-encoding hard instances for itemset-frequency indicators.

Column layout (0-indexed).  The left half ``[0, d/2)`` is split into K
blocks of m columns, block k covering ``[k*m, (k+1)*m)``.  The right half
``[d/2, d)`` is split the same way into K target blocks.  A row generated
for block k and subset S of ``[0, m)`` has

* left bit ``k*m + j`` set iff ``j in S``, every other left block zero;
* right bit ``d/2 + l*m + j`` set iff ``perms[k][l].inverse[j] not in S``.

So the pair ``(k*m + i, d/2 + l*m + j)`` can only co-occur in a block-k row
with ``i in S`` and ``perms[k][l].inverse[j] not in S``.  When
``j == perms[k][l][i]`` that is impossible; otherwise it happens with
probability 1/4 per row.  An indicator sketch therefore answers NO exactly
on the matched pairs, and the permutations can be read back from it.

K = 1 is the constant-epsilon layout (m = d/2, one permutation).  The
1-indexed block offsets ``(k-1)m + i`` and ``d/2 + (l-1)m + j`` become
``k*m + i`` and ``d/2 + l*m + j`` here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .dataset import Database, Itemset, pair_counts
from .errors import DecodeAmbiguous, DimensionError, ParamError
from .sketch import IndicatorAnswer, IndicatorOracle

__all__ = [
    "DEFAULT_ROW_CONSTANT",
    "ConstInstance",
    "GapReport",
    "GeneralInstance",
    "Permutation",
    "const_instance_from_subsets",
    "decode_const",
    "decode_general",
    "default_rows_per_block",
    "empirical_co_occurrence_rate",
    "entropy_bits",
    "gen_const_instance",
    "gen_general_instance",
    "general_layout",
    "log2_factorial_exact",
    "make_row_const",
    "make_row_general",
    "matched_violations",
    "random_permutations",
    "theoretical_co_occurrence_probability",
    "verify_gap",
]

DEFAULT_ROW_CONSTANT = 48

Oracle = Union[IndicatorOracle, Callable[[Itemset], IndicatorAnswer]]


@dataclass(frozen=True)
class Permutation:
    """A bijection on ``range(m)``; ``self[i]`` is the image of i."""

    mapping: tuple[int, ...]
    inverse: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mapping = tuple(int(v) for v in self.mapping)
        m = len(mapping)
        if sorted(mapping) != list(range(m)):
            raise DimensionError(f"not a permutation of range({m}): {list(mapping)}")
        inv = [0] * m
        for i, v in enumerate(mapping):
            inv[v] = i
        object.__setattr__(self, "mapping", mapping)
        object.__setattr__(self, "inverse", tuple(inv))

    @classmethod
    def identity(cls, m: int) -> "Permutation":
        return cls(tuple(range(m)))

    @classmethod
    def random(cls, m: int, rng: np.random.Generator) -> "Permutation":
        return cls(tuple(int(v) for v in rng.permutation(m)))

    @property
    def m(self) -> int:
        return len(self.mapping)

    def __len__(self) -> int:
        return len(self.mapping)

    def __getitem__(self, i: int) -> int:
        return self.mapping[i]

    def __iter__(self):
        return iter(self.mapping)


PermMatrix = tuple[tuple[Permutation, ...], ...]


# -- seeding ---------------------------------------------------------------
# Row streams and permutation streams are children of one SeedSequence so a
# block's rows never depend on how many blocks the instance has.

def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, block)))


def _perm_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))


def _draw_subsets(rng: np.random.Generator, rows: int, m: int) -> np.ndarray:
    """rows x m membership masks, one fair coin per element."""
    return rng.integers(0, 2, size=(rows, m), dtype=np.uint8).astype(bool)


def random_permutations(K: int, m: int, seed: int) -> PermMatrix:
    """K x K uniformly random permutations on ``range(m)``."""
    rng = _perm_rng(seed)
    return tuple(tuple(Permutation.random(m, rng) for _ in range(K)) for _ in range(K))


# -- parameters ------------------------------------------------------------

def _as_fraction(value) -> Fraction:
    if isinstance(value, float):
        raise ParamError(f"epsilon must be exact, got float {value}")
    return Fraction(value)


def general_layout(d: int, epsilon) -> tuple[int, int]:
    """Return ``(K, m)`` for the block layout, rejecting non-integral values."""
    eps = _as_fraction(epsilon)
    if not 0 < eps <= 1:
        raise ParamError(f"epsilon must lie in (0, 1], got {eps}")
    if eps.numerator != 1:
        raise ParamError(f"1/epsilon must be an integer, got epsilon={eps}")
    K = eps.denominator
    m_exact = eps * d / 2
    if m_exact.denominator != 1 or m_exact < 1:
        raise ParamError(
            f"epsilon*d/2 = {m_exact} must be a positive integer (d={d}, epsilon={eps})"
        )
    return K, int(m_exact)


def default_rows_per_block(d: int, c_n: float = DEFAULT_ROW_CONSTANT) -> int:
    """ceil(c_n * ln(max(d, 3))) rows per block.

    With c_n = 48, P[Binomial(r, 1/4) < r/8] <= exp(-r/32) union-bounded over
    d^2 decoder pairs stays under 1/100 for every d >= 3.
    """
    return math.ceil(c_n * math.log(max(d, 3)))


# -- row construction --------------------------------------------------------

def _subset_mask(s: Iterable[int], m: int) -> np.ndarray:
    mask = np.zeros(m, dtype=bool)
    for j in s:
        if not 0 <= j < m:
            raise DimensionError(f"subset element {j} outside range({m})")
        mask[j] = True
    return mask


def _block_rows(masks: np.ndarray, block: int, perms_k: Sequence[Permutation]) -> np.ndarray:
    """Vectorised rows for block ``block`` from an (r x m) mask matrix."""
    r, m = masks.shape
    K = len(perms_k)
    half = K * m
    out = np.zeros((r, 2 * half), dtype=bool)
    out[:, block * m:(block + 1) * m] = masks
    for l, pi in enumerate(perms_k):
        out[:, half + l * m: half + (l + 1) * m] = ~masks[:, list(pi.inverse)]
    return out


def make_row_const(s: Iterable[int], pi: Permutation) -> np.ndarray:
    """The width-2m row for subset ``s``: ``s`` on the left, ``pi(complement)`` on the right."""
    m = pi.m
    mask = _subset_mask(s, m)
    row = np.zeros(2 * m, dtype=bool)
    row[:m] = mask
    for i in range(m):
        if not mask[i]:
            row[m + pi[i]] = True
    return row


def make_row_general(k: int, s: Iterable[int], perms_k: Sequence[Permutation]) -> np.ndarray:
    K = len(perms_k)
    if not 0 <= k < K:
        raise DimensionError(f"block {k} outside range({K})")
    m = perms_k[0].m
    if any(p.m != m for p in perms_k):
        raise DimensionError("permutations in a block row must share one size")
    mask = _subset_mask(s, m)
    half = K * m
    row = np.zeros(2 * half, dtype=bool)
    row[k * m:(k + 1) * m] = mask
    for l, pi in enumerate(perms_k):
        for i in range(m):
            if not mask[i]:
                row[half + l * m + pi[i]] = True
    return row


# -- instances ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConstInstance:
    d: int
    m: int
    pi: Permutation
    n: int
    seed: Optional[int]
    db: Database

    @property
    def K(self) -> int:
        return 1

    @property
    def epsilon(self) -> Fraction:
        return Fraction(1)

    @property
    def perms(self) -> PermMatrix:
        return ((self.pi,),)

    @property
    def rows_per_block(self) -> int:
        return self.n


@dataclass(frozen=True, eq=False)
class GeneralInstance:
    d: int
    epsilon: Fraction
    K: int
    m: int
    perms: PermMatrix
    n: int
    rows_per_block: int
    seed: Optional[int]
    db: Database


Instance = Union[ConstInstance, GeneralInstance]


def _check_const(d: int, pi: Permutation) -> int:
    if d < 2 or d % 2:
        raise DimensionError(f"d must be even and >= 2, got {d}")
    if pi.m != d // 2:
        raise DimensionError(f"permutation has size {pi.m}, expected d/2 = {d // 2}")
    return d // 2


def gen_const_instance(d: int, pi: Permutation, n: int, seed: int) -> ConstInstance:
    m = _check_const(d, pi)
    if n < 1:
        raise ParamError(f"n must be >= 1, got {n}")
    masks = _draw_subsets(_block_rng(seed, 0), n, m)
    db = Database(_block_rows(masks, 0, (pi,)))
    return ConstInstance(d, m, pi, n, seed, db)


def const_instance_from_subsets(
    d: int, pi: Permutation, subsets: Sequence[Iterable[int]]
) -> ConstInstance:
    """Deterministic instance with one row per listed subset."""
    m = _check_const(d, pi)
    if not subsets:
        raise ParamError("need at least one subset")
    db = Database([make_row_const(s, pi) for s in subsets])
    return ConstInstance(d, m, pi, len(subsets), None, db)


def _normalise_perms(perms, K: int, m: int) -> PermMatrix:
    rows = [list(r) for r in perms]
    if len(rows) != K or any(len(r) != K for r in rows):
        raise ParamError(f"expected a {K}x{K} permutation matrix")
    out = []
    for r in rows:
        row = []
        for p in r:
            p = p if isinstance(p, Permutation) else Permutation(tuple(p))
            if p.m != m:
                raise ParamError(f"permutation of size {p.m}, expected m={m}")
            row.append(p)
        out.append(tuple(row))
    return tuple(out)


def gen_general_instance(
    d: int,
    epsilon,
    perms,
    rows_per_block: int,
    seed: int,
) -> GeneralInstance:
    """Rows ordered by block: block 0's rows first, then block 1, ..."""
    eps = _as_fraction(epsilon)
    K, m = general_layout(d, eps)
    perms = _normalise_perms(perms, K, m)
    if rows_per_block < 1:
        raise ParamError(f"rows_per_block must be >= 1, got {rows_per_block}")
    blocks = [
        _block_rows(_draw_subsets(_block_rng(seed, k), rows_per_block, m), k, perms[k])
        for k in range(K)
    ]
    db = Database(np.vstack(blocks))
    return GeneralInstance(d, eps, K, m, perms, K * rows_per_block, rows_per_block, seed, db)


# -- decoding ----------------------------------------------------------------

class _Counted:
    def __init__(self, oracle: Oracle):
        self._ask = oracle.query if hasattr(oracle, "query") else oracle
        self.calls = 0

    def __call__(self, t: Itemset) -> IndicatorAnswer:
        self.calls += 1
        return self._ask(t)


def _decode_block(ask: _Counted, left0: int, right0: int, m: int, where: tuple) -> Permutation:
    if m == 1:
        return Permutation((0,))
    image = []
    for i in range(m):
        hits = tuple(
            j for j in range(m)
            if ask(Itemset((left0 + i, right0 + j))) is IndicatorAnswer.NO
        )
        if len(hits) != 1:
            raise DecodeAmbiguous(*where, i, candidates=hits)
        image.append(hits[0])
    if len(set(image)) != m:
        seen: dict[int, int] = {}
        for i, j in enumerate(image):
            if j in seen:
                raise DecodeAmbiguous(*where, i, candidates=(j,))
            seen[j] = i
    return Permutation(tuple(image))


def decode_const(query: Oracle, d: int, *, stats: Optional[dict] = None) -> Permutation:
    """Recover the hidden permutation from NO answers on pairs ``{i, m + j}``.

    Pass a dict as ``stats`` to receive ``stats["queries"]``.
    """
    if d < 2 or d % 2:
        raise DimensionError(f"d must be even and >= 2, got {d}")
    m = d // 2
    ask = _Counted(query)
    try:
        return _decode_block(ask, 0, m, m, ())
    finally:
        if stats is not None:
            stats["queries"] = ask.calls


def decode_general(
    query: Oracle, d: int, epsilon, *, stats: Optional[dict] = None
) -> PermMatrix:
    K, m = general_layout(d, epsilon)
    half = d // 2
    ask = _Counted(query)
    try:
        return tuple(
            tuple(_decode_block(ask, k * m, half + l * m, m, (k, l)) for l in range(K))
            for k in range(K)
        )
    finally:
        if stats is not None:
            stats["queries"] = ask.calls


# -- gap audit -----------------------------------------------------------------

@dataclass
class GapReport:
    matched_max_frequency: Fraction
    unmatched_min_frequency: Optional[Fraction]
    threshold: Fraction
    passed: bool
    violations: list[tuple[Itemset, Fraction]] = field(default_factory=list)
    matched_pairs: int = 0
    unmatched_pairs: int = 0


def _matched_pairs(inst: Instance) -> list[tuple[int, int]]:
    half = inst.d // 2
    m = inst.m
    return [
        (k * m + i, half + l * m + inst.perms[k][l][i])
        for k in range(inst.K)
        for l in range(inst.K)
        for i in range(m)
    ]


def _audit_mask(inst: Instance) -> np.ndarray:
    """Upper-triangular mask of the pairs whose frequency the audit covers.

    The constant layout audits every column pair (within-half pairs included);
    the block layout audits the K^2 m^2 cross pairs the decoder queries.
    """
    d = inst.d
    mask = np.zeros((d, d), dtype=bool)
    if isinstance(inst, ConstInstance):
        mask[np.triu_indices(d, k=1)] = True
        return mask
    half, m = d // 2, inst.m
    for k in range(inst.K):
        for l in range(inst.K):
            mask[k * m:(k + 1) * m, half + l * m: half + (l + 1) * m] = True
    return mask


def verify_gap(inst: Instance) -> GapReport:
    """Audit matched pairs (must be exactly 0) against unmatched ones (>= threshold).

    The threshold is epsilon/8 of all n rows, which is 1/8 for the constant layout.
    """
    n = inst.n
    threshold = Fraction(inst.epsilon) / 8
    counts = pair_counts(inst.db)
    audit = _audit_mask(inst)
    matched = np.zeros_like(audit)
    for a, b in _matched_pairs(inst):
        matched[a, b] = True
    unmatched = audit & ~matched

    violations: list[tuple[Itemset, Fraction]] = []
    m_counts = counts[matched]
    matched_max = int(m_counts.max()) if m_counts.size else 0
    for a, b in zip(*np.nonzero(matched & (counts > 0))):
        violations.append((Itemset((a, b)), Fraction(int(counts[a, b]), n)))

    u_counts = counts[unmatched]
    unmatched_min = Fraction(int(u_counts.min()), n) if u_counts.size else None
    # count/n >= p/q  <=>  q*count >= p*n
    low = unmatched & (threshold.denominator * counts < threshold.numerator * n)
    for a, b in zip(*np.nonzero(low)):
        violations.append((Itemset((a, b)), Fraction(int(counts[a, b]), n)))

    passed = matched_max == 0 and not low.any()
    return GapReport(
        matched_max_frequency=Fraction(matched_max, n),
        unmatched_min_frequency=unmatched_min,
        threshold=threshold,
        passed=passed,
        violations=violations,
        matched_pairs=int(matched.sum()),
        unmatched_pairs=int(unmatched.sum()),
    )


def matched_violations(inst: Instance) -> int:
    """Row-by-row count of (row, matched pair) co-occurrences; always 0 for valid instances."""
    bits = inst.db.bits
    left = np.array([a for a, _ in _matched_pairs(inst)])
    right = np.array([b for _, b in _matched_pairs(inst)])
    return int(np.count_nonzero(bits[:, left] & bits[:, right]))


# -- information content -----------------------------------------------------

def log2_factorial_exact(m: int) -> float:
    """log2(m!) from the exact big integer, correctly rounded to ~1 ulp."""
    x = math.factorial(m)
    shift = max(x.bit_length() - 64, 0)
    return shift + math.log2(x >> shift)


def entropy_bits(d: int, epsilon) -> float:
    """Bits needed to name the encoded permutations: (1/eps^2) * log2((eps*d/2)!)."""
    eps = _as_fraction(epsilon)
    if not 0 < eps <= 1:
        raise ParamError(f"epsilon must lie in (0, 1], got {eps}")
    m_exact = eps * d / 2
    if m_exact.denominator != 1 or m_exact < 1:
        raise ParamError(f"epsilon*d/2 = {m_exact} must be a positive integer")
    m = int(m_exact)
    per_perm = math.fsum(math.log2(i) for i in range(2, m + 1))
    return float(1 / eps**2) * per_perm


def theoretical_co_occurrence_probability() -> Fraction:
    """Per-row chance that an unmatched pair co-occurs: P[i in S] * P[pi^-1(j) not in S]."""
    return Fraction(1, 4)


def empirical_co_occurrence_rate(
    pi: Permutation, i: int, j: int, samples: int, seed: int
) -> float:
    """Fraction of ``samples`` random rows in which the pair ``(i, m + j)`` co-occurs."""
    m = pi.m
    masks = _draw_subsets(np.random.default_rng(seed), samples, m)
    rows = _block_rows(masks, 0, (pi,))
    return float(np.count_nonzero(rows[:, i] & rows[:, m + j])) / samples
