"""Itemset-frequency-indicator sketches.

A sketch built at parameter ``epsilon`` must answer YES for every itemset
with frequency >= epsilon and NO for every itemset with frequency
<= epsilon/2.  Frequencies strictly between the two are unconstrained.

Two reference sketches are provided:

* ``SAMPLING``: rows sampled uniformly with replacement, thresholded at
  3*epsilon/4 on the sample.  Correct whenever every empirical frequency
  lands within epsilon/4 of the truth, which the sample size makes happen
  with probability at least ``1 - build_failure_budget``.
* ``EXACT_PAIRS``: one bit per column pair, set iff the pair frequency
  exceeds epsilon/2.  Deterministic and always correct, k = 2 only.

Serialized layout (all integers little-endian)::

    b"IFSK" | version:u8 = 1 | kind:u8 | eps_num:u64 | eps_den:u64
            | k:u8 | d:u64 | size_bits:u64 | payload
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import BinaryIO, Iterable, Protocol, Union

import numpy as np

from .dataset import Database, Itemset, pair_counts
from .errors import (
    ArityMismatch,
    FormatError,
    IndexOutOfRange,
    ParamError,
    UnsupportedArity,
    WrongKind,
)

__all__ = [
    "DEFAULT_SAMPLING_CONSTANT",
    "IndicatorAnswer",
    "IndicatorOracle",
    "SketchBlob",
    "SketchKind",
    "SketchParams",
    "build_exact_pairs",
    "build_sampling",
    "pair_index",
    "query",
    "query_exact",
    "query_sampling",
    "read_sketch",
    "sample_size",
    "sketch_size_bits",
    "write_sketch",
]

SKETCH_MAGIC = b"IFSK"
SKETCH_VERSION = 1
_HEADER = struct.Struct("<4sBBQQBQQ")

DEFAULT_SAMPLING_CONSTANT = 48


class IndicatorAnswer(enum.Enum):
    YES = "YES"
    NO = "NO"

    def __bool__(self) -> bool:
        return self is IndicatorAnswer.YES


class SketchKind(enum.IntEnum):
    SAMPLING = 0
    EXACT_PAIRS = 1


class IndicatorOracle(Protocol):
    def query(self, t: Iterable[int]) -> IndicatorAnswer: ...


def _as_fraction(value) -> Fraction:
    if isinstance(value, float):
        raise ParamError(f"epsilon must be exact (int, Fraction or 'p/q'), got float {value}")
    return Fraction(value)


@dataclass(frozen=True)
class SketchParams:
    epsilon: Fraction
    k: int
    d: int
    build_failure_budget: Fraction = Fraction(1, 4)

    def __post_init__(self):
        object.__setattr__(self, "epsilon", _as_fraction(self.epsilon))
        object.__setattr__(
            self, "build_failure_budget", _as_fraction(self.build_failure_budget)
        )
        if not 0 < self.epsilon <= 1:
            raise ParamError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.k < 1:
            raise ParamError(f"k must be >= 1, got {self.k}")
        if self.d < 2:
            raise ParamError(f"d must be >= 2, got {self.d}")
        if not 0 < self.build_failure_budget < 1:
            raise ParamError("build_failure_budget must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class SketchBlob:
    kind: SketchKind
    params: SketchParams
    payload: bytes = field(repr=False)
    size_bits: int

    def __post_init__(self):
        if self.size_bits > 8 * len(self.payload):
            raise FormatError(
                f"size_bits={self.size_bits} exceeds payload of {len(self.payload)} bytes"
            )

    def __eq__(self, other) -> bool:
        if not isinstance(other, SketchBlob):
            return NotImplemented
        return to_bytes(self) == to_bytes(other)

    def __hash__(self) -> int:
        return hash(to_bytes(self))

    @cached_property
    def _samples(self) -> np.ndarray:
        d = self.params.d
        stride = (d + 7) // 8
        packed = np.frombuffer(self.payload, dtype=np.uint8).reshape(-1, stride)
        rows = np.unpackbits(packed, axis=1, count=d, bitorder="little").astype(bool)
        rows.setflags(write=False)
        return rows

    @cached_property
    def _pair_bits(self) -> np.ndarray:
        packed = np.frombuffer(self.payload, dtype=np.uint8)
        bits = np.unpackbits(packed, count=self.size_bits, bitorder="little").astype(bool)
        bits.setflags(write=False)
        return bits

    def query(self, t: Iterable[int]) -> IndicatorAnswer:
        return query(self, t)


def sample_size(params: SketchParams, c_s: float = DEFAULT_SAMPLING_CONSTANT) -> int:
    """Rows drawn by the sampling sketch: ceil((c_s/eps) * ln(d^k / budget))."""
    eps = params.epsilon
    log_term = params.k * math.log(params.d) - math.log(params.build_failure_budget)
    return math.ceil(c_s * eps.denominator / eps.numerator * log_term)


def build_sampling(
    db: Database,
    params: SketchParams,
    seed: int,
    c_s: float = DEFAULT_SAMPLING_CONSTANT,
) -> SketchBlob:
    if params.d != db.d:
        raise ParamError(f"params.d={params.d} but database has d={db.d}")
    s = sample_size(params, c_s)
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, db.n, size=s)
    payload = db.packed[picks].tobytes()
    return SketchBlob(SketchKind.SAMPLING, params, payload, s * db.d)


def pair_index(a: int, b: int, d: int) -> int:
    """Position of pair ``a < b`` in row-major upper-triangular order."""
    return a * (2 * d - a - 1) // 2 + (b - a - 1)


def build_exact_pairs(db: Database, params: SketchParams) -> SketchBlob:
    if params.k != 2:
        raise UnsupportedArity(f"exact-pairs sketch needs k=2, got k={params.k}")
    if params.d != db.d:
        raise ParamError(f"params.d={params.d} but database has d={db.d}")
    d = db.d
    counts = pair_counts(db)
    rows, cols = np.triu_indices(d, k=1)
    eps = params.epsilon
    # count/n > p/(2q)  <=>  2q*count > p*n
    bits = 2 * eps.denominator * counts[rows, cols] > eps.numerator * db.n
    payload = np.packbits(bits, bitorder="little").tobytes()
    return SketchBlob(SketchKind.EXACT_PAIRS, params, payload, d * (d - 1) // 2)


def _checked_itemset(blob: SketchBlob, t: Iterable[int], kind: SketchKind) -> Itemset:
    if blob.kind is not kind:
        raise WrongKind(f"expected a {kind.name} sketch, got {blob.kind.name}")
    t = Itemset(t)
    if len(t) != blob.params.k:
        raise ArityMismatch(f"sketch answers k={blob.params.k}, got itemset of size {len(t)}")
    if t and t[-1] >= blob.params.d:
        raise IndexOutOfRange(f"itemset {list(t)} out of range for d={blob.params.d}")
    return t


def query_sampling(blob: SketchBlob, t: Iterable[int]) -> IndicatorAnswer:
    t = _checked_itemset(blob, t, SketchKind.SAMPLING)
    sample = blob._samples
    s = sample.shape[0]
    hits = int(np.count_nonzero(np.logical_and.reduce(sample[:, list(t)], axis=1)))
    eps = blob.params.epsilon
    # hits/s >= 3p/(4q)
    if 4 * eps.denominator * hits >= 3 * eps.numerator * s:
        return IndicatorAnswer.YES
    return IndicatorAnswer.NO


def query_exact(blob: SketchBlob, t: Iterable[int]) -> IndicatorAnswer:
    a, b = _checked_itemset(blob, t, SketchKind.EXACT_PAIRS)
    if blob._pair_bits[pair_index(a, b, blob.params.d)]:
        return IndicatorAnswer.YES
    return IndicatorAnswer.NO


def query(blob: SketchBlob, t: Iterable[int]) -> IndicatorAnswer:
    if blob.kind is SketchKind.SAMPLING:
        return query_sampling(blob, t)
    return query_exact(blob, t)


def sketch_size_bits(blob: SketchBlob) -> int:
    return blob.size_bits


def to_bytes(blob: SketchBlob) -> bytes:
    p = blob.params
    if p.k > 0xFF:
        raise FormatError(f"k={p.k} does not fit the u8 field")
    header = _HEADER.pack(
        SKETCH_MAGIC,
        SKETCH_VERSION,
        int(blob.kind),
        p.epsilon.numerator,
        p.epsilon.denominator,
        p.k,
        p.d,
        blob.size_bits,
    )
    return header + blob.payload


def write_sketch(blob: SketchBlob, destination: Union[str, Path, BinaryIO]) -> None:
    data = to_bytes(blob)
    if isinstance(destination, (str, Path)):
        Path(destination).write_bytes(data)
    else:
        destination.write(data)


def read_sketch(source: Union[str, Path, BinaryIO, bytes]) -> SketchBlob:
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    else:
        data = source.read()
    if len(data) < _HEADER.size:
        raise FormatError("truncated IFSK header")
    magic, version, kind, num, den, k, d, size_bits = _HEADER.unpack_from(data)
    if magic != SKETCH_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != SKETCH_VERSION:
        raise FormatError(f"unsupported IFSK version {version}")
    try:
        kind = SketchKind(kind)
    except ValueError:
        raise FormatError(f"unknown sketch kind {kind}") from None
    if den == 0:
        raise FormatError("epsilon denominator is zero")
    try:
        params = SketchParams(Fraction(num, den), k, d)
    except ParamError as exc:
        raise FormatError(str(exc)) from exc
    payload = data[_HEADER.size:]
    if kind is SketchKind.SAMPLING:
        stride = (d + 7) // 8
        if len(payload) % stride or size_bits != (len(payload) // stride) * d:
            raise FormatError("sampling payload does not match size_bits")
    elif len(payload) != (size_bits + 7) // 8 or size_bits != d * (d - 1) // 2:
        raise FormatError("exact-pairs payload does not match d")
    return SketchBlob(kind, params, payload, size_bits)
