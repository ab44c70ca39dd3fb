"""Plain-text manifest recording how a hard instance was generated.

Example::

    ifsketch-manifest 1
    d 64
    eps 1/4
    K 4
    m 8
    n 800
    rows_per_block 200
    seed 2
    perm 0 0: 3 0 7 1 2 6 5 4
    ...

There is one ``perm k l:`` line per permutation, in row-major (k, l) order.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

from .errors import FormatError
from .lowerbound import Instance, Permutation, PermMatrix

MANIFEST_TAG = "ifsketch-manifest"
MANIFEST_VERSION = 1

_SCALARS = ("d", "eps", "K", "m", "n", "rows_per_block", "seed")


@dataclass(frozen=True)
class Manifest:
    d: int
    epsilon: Fraction
    K: int
    m: int
    n: int
    rows_per_block: int
    seed: Optional[int]
    perms: PermMatrix

    @classmethod
    def of(cls, inst: Instance) -> "Manifest":
        return cls(
            inst.d, Fraction(inst.epsilon), inst.K, inst.m, inst.n,
            inst.rows_per_block, inst.seed, inst.perms,
        )

    def with_perms(self, perms: PermMatrix) -> "Manifest":
        return Manifest(
            self.d, self.epsilon, self.K, self.m, self.n,
            self.rows_per_block, self.seed, perms,
        )

    def dumps(self) -> str:
        eps = self.epsilon
        lines = [
            f"{MANIFEST_TAG} {MANIFEST_VERSION}",
            f"d {self.d}",
            f"eps {eps.numerator}/{eps.denominator}",
            f"K {self.K}",
            f"m {self.m}",
            f"n {self.n}",
            f"rows_per_block {self.rows_per_block}",
            f"seed {'none' if self.seed is None else self.seed}",
        ]
        for k, row in enumerate(self.perms):
            for l, pi in enumerate(row):
                lines.append(f"perm {k} {l}: " + " ".join(map(str, pi.mapping)))
        return "\n".join(lines) + "\n"


def loads(text: str) -> Manifest:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split() != [MANIFEST_TAG, str(MANIFEST_VERSION)]:
        raise FormatError("missing or unsupported manifest header")
    fields: dict[str, str] = {}
    perm_lines: dict[tuple[int, int], Permutation] = {}
    for ln in lines[1:]:
        if ln.startswith("perm "):
            head, _, body = ln.partition(":")
            try:
                _, k, l = head.split()
                perm_lines[int(k), int(l)] = Permutation(tuple(int(v) for v in body.split()))
            except ValueError as exc:
                raise FormatError(f"bad permutation line {ln!r}: {exc}") from exc
            continue
        key, _, value = ln.partition(" ")
        if key not in _SCALARS:
            raise FormatError(f"unknown manifest field {key!r}")
        fields[key] = value.strip()
    missing = [k for k in _SCALARS if k not in fields]
    if missing:
        raise FormatError(f"manifest is missing {missing}")
    try:
        num, den = fields["eps"].split("/")
        eps = Fraction(int(num), int(den))
        K, m = int(fields["K"]), int(fields["m"])
        seed = None if fields["seed"] == "none" else int(fields["seed"])
        ints = {k: int(fields[k]) for k in ("d", "n", "rows_per_block")}
    except (ValueError, ZeroDivisionError) as exc:
        raise FormatError(f"bad manifest scalar: {exc}") from exc
    if set(perm_lines) != {(k, l) for k in range(K) for l in range(K)}:
        raise FormatError(f"expected {K * K} permutation lines, got {len(perm_lines)}")
    if any(p.m != m for p in perm_lines.values()):
        raise FormatError(f"permutation sizes differ from m={m}")
    perms = tuple(tuple(perm_lines[k, l] for l in range(K)) for k in range(K))
    return Manifest(ints["d"], eps, K, m, ints["n"], ints["rows_per_block"], seed, perms)


def write_manifest(manifest: Manifest, path: Union[str, Path]) -> None:
    Path(path).write_text(manifest.dumps(), encoding="ascii")


def read_manifest(path: Union[str, Path]) -> Manifest:
    return loads(Path(path).read_text(encoding="ascii"))
