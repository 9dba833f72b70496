"""Exact counting for derangements and their cycle structure.

All counts are Python ints. Probabilities are correctly rounded ratios of
exact counts (``int / int`` true division rounds once, so there is no
overflow even where ``d_n`` has thousands of digits).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np


class ConsistencyError(RuntimeError):
    """Two independent exact routes disagreed."""


@dataclass(frozen=True)
class CycleType:
    """``a[k-1]`` is the number of k-cycles; trailing zeros may be omitted."""

    a: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(int(x) for x in self.a))
        if any(x < 0 for x in self.a):
            raise ValueError(f"cycle type entries must be nonnegative: {self.a}")

    @property
    def n(self) -> int:
        return sum(k * ak for k, ak in enumerate(self.a, start=1))

    @property
    def cycles(self) -> int:
        return sum(self.a)

    @property
    def is_derangement_type(self) -> bool:
        return not self.a or self.a[0] == 0

    def trimmed(self) -> "CycleType":
        a = list(self.a)
        while a and a[-1] == 0:
            a.pop()
        return CycleType(tuple(a))


@dataclass(frozen=True)
class CycleCountDistribution:
    """Exact law of the number of cycles of a uniform n-derangement.

    ``nu[k-1]`` is the probability of exactly k cycles, k = 1..n//2.
    """

    n: int
    nu: np.ndarray
    counts: tuple[int, ...]
    total: int

    def prob(self, k: int) -> float:
        if 1 <= k <= self.n // 2:
            return float(self.nu[k - 1])
        return 0.0

    def padded(self) -> np.ndarray:
        """``nu`` indexed directly by k (entry 0 is zero)."""
        return np.concatenate(([0.0], self.nu))


def _check_nonneg(**kw):
    for name, v in kw.items():
        if v < 0:
            raise ValueError(f"{name} must be >= 0, got {v}")


def rencontres(n: int) -> int:
    """Number of derangements of n labels."""
    _check_nonneg(n=n)
    return _rencontres_upto(n)[n]


@lru_cache(maxsize=None)
def _rencontres_upto(n: int) -> tuple[int, ...]:
    d = [1, 0]
    for m in range(1, n):
        d.append(m * (d[m] + d[m - 1]))
    return tuple(d[: n + 1])


class _Triangle:
    """Row-wise memo of a lower-triangular integer table, grown on demand."""

    def __init__(self, first_row, step):
        self.rows = [first_row]
        self._step = step

    def row(self, n: int) -> list[int]:
        while len(self.rows) <= n:
            m = len(self.rows) - 1
            self.rows.append(self._step(m, self.rows))
        return self.rows[n]


def _stirling_step(n, rows):
    # [n+1 k] = n [n k] + [n k-1]
    prev = rows[n]
    new = [0] * (n + 2)
    for k in range(1, n + 2):
        new[k] = (n * prev[k] if k <= n else 0) + prev[k - 1]
    return new


def _dnk_step(n, rows):
    # d_{n+1}^(k) = n (d_n^(k) + d_{n-1}^(k-1)), rows hold k = 0..(n+1)//2
    cur = rows[n]
    prev = rows[n - 1] if n >= 1 else []
    width = (n + 1) // 2 + 1
    new = [0] * width
    for k in range(1, width):
        a = cur[k] if k < len(cur) else 0
        b = prev[k - 1] if 0 <= k - 1 < len(prev) else 0
        new[k] = n * (a + b)
    return new


_STIRLING = _Triangle([1], _stirling_step)
_DNK = _Triangle([1], _dnk_step)


def stirling_first_unsigned(n: int, k: int) -> int:
    """Number of n-permutations with exactly k cycles."""
    _check_nonneg(n=n, k=k)
    if k > n:
        return 0
    return _STIRLING.row(n)[k]


def dnk_recursion(n: int, k: int) -> int:
    """Number of n-derangements with k cycles, by the two-term recursion."""
    _check_nonneg(n=n, k=k)
    row = _DNK.row(n)
    return row[k] if k < len(row) else 0


def dnk_inclusion_exclusion(n: int, k: int) -> int:
    """Number of n-derangements with k cycles, by inclusion-exclusion on fixed points."""
    _check_nonneg(n=n, k=k)
    if k > n // 2:
        return 0
    total = 0
    for j in range(k + 1):
        term = math.comb(n, j) * stirling_first_unsigned(n - j, k - j)
        total += -term if j & 1 else term
    if total < 0:
        raise ConsistencyError(f"negative inclusion-exclusion sum for n={n}, k={k}")
    return total


def dnk_row(n: int) -> list[int]:
    """``[d_n^(1), ..., d_n^(n//2)]`` checked against both routes and d_n."""
    rec = [dnk_recursion(n, k) for k in range(1, n // 2 + 1)]
    inc = [dnk_inclusion_exclusion(n, k) for k in range(1, n // 2 + 1)]
    if rec != inc:
        bad = next(k for k, (x, y) in enumerate(zip(rec, inc), start=1) if x != y)
        raise ConsistencyError(f"d_{n}^({bad}) differs between recursion and inclusion-exclusion")
    if sum(rec) != rencontres(n):
        raise ConsistencyError(f"sum over k of d_{n}^(k) != d_{n}")
    return rec


def cycle_count_distribution(n: int) -> CycleCountDistribution:
    if n < 2:
        raise ValueError("need n >= 2")
    counts = dnk_row(n)
    total = rencontres(n)
    nu = np.array([c / total for c in counts], dtype=np.float64)
    return CycleCountDistribution(n=n, nu=nu, counts=tuple(counts), total=total)


def cauchy_count(t: CycleType | tuple | list, n: int | None = None) -> int:
    """Number of permutations of the given cycle type."""
    if not isinstance(t, CycleType):
        t = CycleType(tuple(t))
    size = t.n
    if n is not None and size != n:
        raise ValueError(f"cycle type {t.a} covers {size} labels, not {n}")
    denom = 1
    for k, ak in enumerate(t.a, start=1):
        denom *= k**ak * math.factorial(ak)
    count, rem = divmod(math.factorial(size), denom)
    assert rem == 0
    return count


def _require_even(n):
    if n % 2 or n < 2:
        raise ValueError(f"perfect matchings need an even n >= 2, got {n}")


def perfect_matching_count(n: int) -> int:
    _require_even(n)
    return math.factorial(n) // (2 ** (n // 2) * math.factorial(n // 2))


def perfect_matching_probability(n: int, mode: str = "exact") -> float:
    """Probability that a uniform n-derangement is a fixed-point-free involution."""
    _require_even(n)
    if n < 4:
        raise ValueError("need n >= 4")
    if mode == "exact":
        return perfect_matching_count(n) / rencontres(n)
    if mode == "asymptotic":
        return math.e / math.sqrt(math.pi * n) * math.exp(0.5 * n * (1.0 - math.log(n)))
    raise ValueError(f"unknown mode {mode!r}")


def harmonic(m: int) -> Fraction:
    return sum((Fraction(1, i) for i in range(1, m + 1)), Fraction(0))


def double_factorial_odd(n: int) -> int:
    """(n-1)(n-3)...3.1 for even n."""
    return math.prod(range(n - 1, 0, -2))


def cycle_count_moments(n: int) -> tuple[float, float]:
    """Exact mean and standard deviation of the cycle count of a uniform n-derangement.

    Uses the recursion on ``D_n(x) = sum_k d_n^(k) x^k`` and its first two
    derivatives at x = 1, so no Stirling table is needed and large n
    (tens of thousands) stays cheap.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    # value, first and second derivative at x=1 for D_{m-1}, D_m
    a0, b0, c0 = 1, 0, 0  # D_0 = 1
    a1, b1, c1 = 0, 0, 0  # D_1 = 0
    for m in range(1, n):
        # D_{m+1} = m D_m + m x D_{m-1}
        a2 = m * (a1 + a0)
        b2 = m * (b1 + a0 + b0)
        c2 = m * (c1 + 2 * b0 + c0)
        a0, b0, c0, a1, b1, c1 = a1, b1, c1, a2, b2, c2
    mean = b1 / a1
    var = (c1 * a1 + b1 * a1 - b1 * b1) / (a1 * a1)
    return mean, math.sqrt(var)


def normal_approximation_params(n: int) -> dict:
    """Log-normal-law parameters next to the exact cycle-count moments."""
    if n < 2:
        raise ValueError("need n >= 2")
    mean, sd = cycle_count_moments(n)
    log_n = math.log(n)
    return {
        "approx_mean": log_n,
        "approx_sd": math.sqrt(log_n),
        "exact_mean": mean,
        "exact_sd": sd,
    }


def completion_table(n_max: int) -> np.ndarray:
    """``T[m, r]``: ways to place m values in m slots when r slots forbid their own label.

    Used to rank derangements lexicographically; fits int64 up to n_max = 20.
    """
    if n_max > 20:
        raise ValueError("completion counts overflow int64 beyond n = 20")
    table = np.zeros((n_max + 1, n_max + 1), dtype=np.int64)
    for m in range(n_max + 1):
        for r in range(m + 1):
            table[m, r] = sum(
                (-1) ** j * math.comb(r, j) * math.factorial(m - j) for j in range(r + 1)
            )
    return table
