"""Permutations in one-line form, cycle decomposition and predicates.

Storage is 0-based; everything a user sees (``sigma``, ``str()``, parsing,
cycles) is 1-based.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from derange.combinatorics import CycleType

MAX_N = 1 << 24


class PermutationError(ValueError):
    pass


class Permutation:
    """Immutable bijection of {1..n}."""

    __slots__ = ("_p",)

    def __init__(self, labels: Iterable[int]):
        p = tuple(int(x) - 1 for x in labels)
        _validate(p)
        self._p = p

    @classmethod
    def from_zero_based(cls, values: Sequence[int]) -> "Permutation":
        p = tuple(int(x) for x in values)
        _validate(p)
        obj = cls.__new__(cls)
        obj._p = p
        return obj

    @classmethod
    def parse(cls, text: str) -> "Permutation":
        """Parse ``"2 3 4 1"``. Commas are accepted as separators too."""
        fields = text.replace(",", " ").split()
        try:
            labels = [int(f) for f in fields]
        except ValueError as exc:
            raise PermutationError(f"non-integer label in {text!r}") from exc
        return cls(labels)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls.from_zero_based(range(n))

    @classmethod
    def cyclic(cls, n: int) -> "Permutation":
        """``2 3 ... n 1``."""
        return cls.from_zero_based([(i + 1) % n for i in range(n)])

    @classmethod
    def paired_involution(cls, n: int) -> "Permutation":
        """``2 1 4 3 ... n n-1``, i.e. (1 2)(3 4)...(n-1 n)."""
        if n % 2:
            raise PermutationError("a fixed-point-free involution needs even n")
        return cls.from_zero_based([i ^ 1 for i in range(n)])

    @property
    def n(self) -> int:
        return len(self._p)

    @property
    def sigma(self) -> tuple[int, ...]:
        return tuple(x + 1 for x in self._p)

    @property
    def zero_based(self) -> tuple[int, ...]:
        return self._p

    def to_array(self) -> np.ndarray:
        return np.array(self._p, dtype=np.int32)

    def __call__(self, i: int) -> int:
        return self._p[i - 1] + 1

    def __len__(self):
        return len(self._p)

    def __eq__(self, other):
        return isinstance(other, Permutation) and self._p == other._p

    def __hash__(self):
        return hash(self._p)

    def __str__(self):
        return " ".join(str(x + 1) for x in self._p)

    def __repr__(self):
        return f"Permutation('{self}')"


def _validate(p: tuple[int, ...]) -> None:
    n = len(p)
    if n > MAX_N:
        raise PermutationError(f"n = {n} exceeds the supported maximum {MAX_N}")
    if sorted(p) == list(range(n)):
        return
    seen = Counter(p)
    dup = sorted(x + 1 for x, c in seen.items() if c > 1)
    out = sorted(x + 1 for x in seen if not 0 <= x < n)
    missing = sorted(x + 1 for x in range(n) if x not in seen)
    parts = []
    if out:
        parts.append(f"label(s) out of range 1..{n}: {out}")
    if dup:
        parts.append(f"duplicated label(s): {dup}")
    if missing:
        parts.append(f"missing label(s): {missing}")
    raise PermutationError("not a bijection; " + "; ".join(parts))


@dataclass(frozen=True)
class CycleDecomposition:
    cycles: tuple[tuple[int, ...], ...]  # 1-based, each starting at its smallest index

    @property
    def k(self) -> int:
        return len(self.cycles)

    @property
    def type(self) -> CycleType:
        lengths = Counter(len(c) for c in self.cycles)
        top = max(lengths, default=0)
        return CycleType(tuple(lengths.get(j, 0) for j in range(1, top + 1)))


def decompose(p: Permutation) -> CycleDecomposition:
    z = p.zero_based
    seen = bytearray(len(z))
    cycles = []
    for start in range(len(z)):
        if seen[start]:
            continue
        cyc = []
        x = start
        while not seen[x]:
            seen[x] = 1
            cyc.append(x + 1)
            x = z[x]
        cycles.append(tuple(cyc))
    return CycleDecomposition(tuple(cycles))


def from_cycles(n: int, cycles: Iterable[Sequence[int]]) -> Permutation:
    """Multiply disjoint 1-based cycles back into one-line form."""
    z = list(range(n))
    for cyc in cycles:
        for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
            z[a - 1] = b - 1
    return Permutation.from_zero_based(z)


def is_derangement(p: Permutation) -> bool:
    return all(x != i for i, x in enumerate(p.zero_based))


def is_fixed_point_free_involution(p: Permutation) -> bool:
    z = p.zero_based
    return all(x != i and z[x] == i for i, x in enumerate(z))


def compose(p: Permutation, q: Permutation) -> Permutation:
    """``r(i) = p(q(i))``."""
    if p.n != q.n:
        raise PermutationError(f"length mismatch: {p.n} vs {q.n}")
    pz = p.zero_based
    return Permutation.from_zero_based([pz[x] for x in q.zero_based])


def transposition(n: int, a: int, b: int) -> Permutation:
    """The transposition (a b) on n labels, 1-based."""
    z = list(range(n))
    z[a - 1], z[b - 1] = z[b - 1], z[a - 1]
    return Permutation.from_zero_based(z)
