"""Bit-matrix transaction databases and exact itemset frequencies.

Columns are 0-indexed. On disk a database is::

    b"IFDB" | version:u8 = 1 | n:u64le | d:u64le | n rows of ceil(d/8) bytes

Each row is bit-packed least-significant-bit first, so column 0 is bit 0 of
the first byte of the row, and any padding bits in the last byte are zero.
"""

from __future__ import annotations

import io
import struct
from fractions import Fraction
from functools import cached_property, total_ordering
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence, Union

import numpy as np

from .errors import FormatError, IndexOutOfRange, ParamError

__all__ = [
    "DB_MAGIC",
    "DB_VERSION",
    "Database",
    "Frequency",
    "Itemset",
    "db_to_bytes",
    "frequency",
    "pair_counts",
    "read_db",
    "write_db",
]

DB_MAGIC = b"IFDB"
DB_VERSION = 1
_HEADER = struct.Struct("<4sBQQ")


class Itemset(tuple):
    """A sorted tuple of distinct column indices.

    ``Itemset([3, 1])`` normalises to ``(1, 3)``; repeated indices raise.
    """

    def __new__(cls, items: Iterable[int] = ()):
        if isinstance(items, Itemset):
            return items
        values = sorted(int(i) for i in items)
        if any(v < 0 for v in values):
            raise IndexOutOfRange(f"negative column index in {values}")
        if any(a == b for a, b in zip(values, values[1:])):
            raise ParamError(f"itemset indices must be distinct: {values}")
        return super().__new__(cls, values)

    @property
    def k(self) -> int:
        return len(self)

    def __repr__(self) -> str:
        return f"Itemset({list(self)})"


@total_ordering
class Frequency:
    """Exact row fraction ``count / n``.

    Comparisons against ints, Fractions and other Frequencies are done by
    integer cross-multiplication; floats are refused.
    """

    __slots__ = ("numerator", "denominator")

    def __init__(self, numerator: int, denominator: int):
        if denominator < 1 or not 0 <= numerator <= denominator:
            raise ParamError(f"invalid frequency {numerator}/{denominator}")
        self.numerator = int(numerator)
        self.denominator = int(denominator)

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def _pair(self, other) -> tuple[int, int]:
        if isinstance(other, Frequency):
            return other.numerator, other.denominator
        if isinstance(other, (int, Fraction)):
            f = Fraction(other)
            return f.numerator, f.denominator
        return NotImplemented

    def __eq__(self, other) -> bool:
        pair = self._pair(other)
        if pair is NotImplemented:
            return NotImplemented
        p, q = pair
        return self.numerator * q == p * self.denominator

    def __lt__(self, other) -> bool:
        pair = self._pair(other)
        if pair is NotImplemented:
            return NotImplemented
        p, q = pair
        return self.numerator * q < p * self.denominator

    def __hash__(self) -> int:
        return hash(self.value)

    def __float__(self) -> float:
        return self.numerator / self.denominator

    def __repr__(self) -> str:
        return f"Frequency({self.numerator}/{self.denominator})"


class Database:
    """Immutable n x d bit matrix; row i, column j is ``bits[i, j]``."""

    def __init__(self, bits: Union[np.ndarray, Sequence[Sequence[int]]]):
        arr = np.array(bits, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise ParamError(f"database must be 2-D, got shape {arr.shape}")
        n, d = arr.shape
        if n < 1 or d < 2:
            raise ParamError(f"need n >= 1 and d >= 2, got n={n}, d={d}")
        arr.setflags(write=False)
        self._bits = arr

    @classmethod
    def from_strings(cls, rows: Iterable[str]) -> "Database":
        """Build from strings like ``"110"``; the leftmost character is column 0."""
        rows = list(rows)
        widths = {len(r) for r in rows}
        if len(widths) > 1:
            raise ParamError(f"rows have differing widths {sorted(widths)}")
        return cls([[c == "1" for c in r] for r in rows])

    @classmethod
    def from_packed(cls, packed: np.ndarray, d: int) -> "Database":
        bits = np.unpackbits(packed, axis=1, count=d, bitorder="little")
        return cls(bits)

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def n(self) -> int:
        return self._bits.shape[0]

    @property
    def d(self) -> int:
        return self._bits.shape[1]

    @cached_property
    def packed(self) -> np.ndarray:
        out = np.packbits(self._bits, axis=1, bitorder="little")
        out.setflags(write=False)
        return out

    @cached_property
    def _columns_int(self) -> np.ndarray:
        return self._bits.astype(np.int64)

    def row_string(self, i: int) -> str:
        return "".join("1" if b else "0" for b in self._bits[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Database):
            return NotImplemented
        return self._bits.shape == other._bits.shape and bool(
            np.array_equal(self._bits, other._bits)
        )

    def __hash__(self) -> int:
        return hash((self._bits.shape, self.packed.tobytes()))

    def __repr__(self) -> str:
        return f"Database(n={self.n}, d={self.d})"


def _check_indices(t: Itemset, d: int) -> None:
    if t and t[-1] >= d:
        raise IndexOutOfRange(f"itemset {list(t)} out of range for d={d}")


def frequency(db: Database, t: Iterable[int]) -> Frequency:
    """Fraction of rows of ``db`` containing every column in ``t``."""
    t = Itemset(t)
    _check_indices(t, db.d)
    if not t:
        return Frequency(db.n, db.n)
    hit = np.logical_and.reduce(db.bits[:, list(t)], axis=1)
    return Frequency(int(np.count_nonzero(hit)), db.n)


def pair_counts(db: Database) -> np.ndarray:
    """d x d matrix of co-occurrence counts; the diagonal holds column counts."""
    x = db._columns_int
    return x.T @ x


def _as_bytes_out(destination) -> tuple[BinaryIO, bool]:
    if isinstance(destination, (str, Path)):
        return open(destination, "wb"), True
    return destination, False


def write_db(db: Database, destination: Union[str, Path, BinaryIO]) -> None:
    fh, owned = _as_bytes_out(destination)
    try:
        fh.write(_HEADER.pack(DB_MAGIC, DB_VERSION, db.n, db.d))
        fh.write(db.packed.tobytes())
    finally:
        if owned:
            fh.close()


def db_to_bytes(db: Database) -> bytes:
    buf = io.BytesIO()
    write_db(db, buf)
    return buf.getvalue()


def read_db(source: Union[str, Path, BinaryIO, bytes]) -> Database:
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    else:
        data = source.read()
    if len(data) < _HEADER.size:
        raise FormatError("truncated IFDB header")
    magic, version, n, d = _HEADER.unpack_from(data)
    if magic != DB_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != DB_VERSION:
        raise FormatError(f"unsupported IFDB version {version}")
    if n < 1 or d < 2:
        raise FormatError(f"invalid dimensions n={n}, d={d}")
    stride = (d + 7) // 8
    payload = data[_HEADER.size:]
    if len(payload) != n * stride:
        raise FormatError(
            f"payload is {len(payload)} bytes, expected {n * stride} for n={n}, d={d}"
        )
    packed = np.frombuffer(payload, dtype=np.uint8).reshape(n, stride)
    if d % 8:
        pad_mask = np.uint8((0xFF << (d % 8)) & 0xFF)
        if np.any(packed[:, -1] & pad_mask):
            raise FormatError("nonzero padding bits in row payload")
    return Database.from_packed(packed, d)
