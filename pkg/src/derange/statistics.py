"""Empirical cycle-count measures, distances and the sampling experiments.

Experiments take a master ``seed`` and a worker count rather than a
generator: each worker draws from its own derived stream (see
:mod:`derange.farm`), which makes results reproducible for a given
``(seed, workers)`` pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc

from derange import farm
from derange._backend import kernels
from derange.combinatorics import (
    CycleCountDistribution,
    completion_table,
    cycle_count_distribution,
    rencontres,
)
from derange.permutation import Permutation, decompose, is_derangement
from derange.rng import derive_stream
from derange.samplers import batch_task, resolve_mix

DEFAULT_EPSILON = 0.5 / math.e


# -- measures ---------------------------------------------------------------

@dataclass
class EmpiricalMeasure:
    """Histogram of cycle counts; ``counts[k-1]`` is the number of k-cycle samples."""

    n: int
    counts: np.ndarray = None
    total: int = 0

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(self.n // 2, dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if len(self.counts) != self.n // 2:
                raise ValueError("counts must have n//2 entries")
            self.total = int(self.counts.sum())

    @classmethod
    def from_cycle_counts(cls, n: int, ks) -> "EmpiricalMeasure":
        ks = np.asarray(ks)
        if ks.size and (ks.min() < 1 or ks.max() > n // 2):
            raise ValueError("cycle count outside 1..n//2; not a derangement sample")
        hist = np.bincount(ks, minlength=n // 2 + 1)[1:]
        return cls(n, hist)

    def probs(self) -> np.ndarray:
        if self.total == 0:
            raise ValueError("empty measure")
        return self.counts / self.total

    def __iadd__(self, other: "EmpiricalMeasure"):
        if other.n != self.n:
            raise ValueError("length mismatch")
        self.counts = self.counts + other.counts
        self.total += other.total
        return self


def accumulate(m: EmpiricalMeasure, p: Permutation) -> EmpiricalMeasure:
    """Add one derangement to the measure (in place) and return it."""
    if p.n != m.n:
        raise ValueError(f"permutation has n={p.n}, measure has n={m.n}")
    if not is_derangement(p):
        raise ValueError(f"{p} is not a derangement")
    m.counts[decompose(p).k - 1] += 1
    m.total += 1
    return m


def total_variation(p, q) -> float:
    """Half the L1 distance between two probability vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("support mismatch")
    return 0.5 * float(np.abs(p - q).sum())


def tv_distance(m: EmpiricalMeasure, nu: CycleCountDistribution) -> float:
    if m.n != nu.n:
        raise ValueError(f"measure has n={m.n}, distribution has n={nu.n}")
    if m.total < 1:
        raise ValueError("total variation of an empty measure is undefined")
    return total_variation(m.probs(), nu.nu)


def chi_square_gof(m: EmpiricalMeasure, nu: CycleCountDistribution) -> tuple[float, int, float]:
    """Pearson chi-square of observed cycle counts against ``total * nu``.

    Bins are merged from the high-k tail down until every expected count is
    at least 5. Returns ``(statistic, dof, p_value)``.
    """
    if m.total < 1:
        raise ValueError("empty measure")
    if m.n != nu.n:
        raise ValueError("support mismatch")
    expected = m.total * nu.nu
    observed = m.counts.astype(np.float64)
    bins_e, bins_o = [], []
    acc_e = acc_o = 0.0
    for k in range(len(expected) - 1, -1, -1):
        acc_e += expected[k]
        acc_o += observed[k]
        if acc_e >= 5.0:
            bins_e.append(acc_e)
            bins_o.append(acc_o)
            acc_e = acc_o = 0.0
    if acc_e > 0 or acc_o > 0:
        if bins_e:
            bins_e[-1] += acc_e
            bins_o[-1] += acc_o
        else:
            bins_e.append(acc_e)
            bins_o.append(acc_o)
    if len(bins_e) < 2:
        raise ValueError("fewer than two bins after merging; sample too small")
    e = np.array(bins_e)
    o = np.array(bins_o)
    stat = float(((o - e) ** 2 / e).sum())
    dof = len(e) - 1
    # chi-square survival function via the regularized upper incomplete gamma
    p = float(gammaincc(dof / 2.0, stat / 2.0))
    return stat, dof, p


# -- cycle-count sampling ---------------------------------------------------

def sample_measure(
    algorithm: str,
    n: int,
    count: int,
    seed: int,
    workers: int = 1,
    mix=None,
    *,
    tag: int | None = None,
    checkpoint=None,
) -> tuple[EmpiricalMeasure, int]:
    """Cycle-count histogram of ``count`` samples; also returns total attempts."""
    task = batch_task(algorithm, n, mix)
    width = n // 2 + 1

    def hist(state, m):
        perms, attempts = task(state, m)
        h = np.bincount(kernels.cycle_counts(perms), minlength=width + 1)[: width + 1]
        h[width] = attempts
        return h.astype(np.int64)

    key = {"algorithm": algorithm, "n": n, "mix": None if mix is None else resolve_mix(mix, n)}
    out = farm.run(hist, count, seed, workers, tag=tag, checkpoint=checkpoint, key=key)
    return EmpiricalMeasure(n, out[1:width]), int(out[width])


# -- mixing time ------------------------------------------------------------

@dataclass
class MixingResult:
    n: int
    epsilon: float
    t_mix: int | None  # None when max_t was reached first
    trajectory: np.ndarray
    runs: int
    mode: str = "time_average"

    @property
    def mixed(self) -> bool:
        return self.t_mix is not None


def first_crossing(trajectory, epsilon: float) -> int | None:
    below = np.flatnonzero(np.asarray(trajectory) < epsilon)
    return int(below[0]) if below.size else None


def mixing_counts(n: int, runs: int, max_t: int, seed: int, workers: int = 1) -> np.ndarray:
    """Pooled per-step cycle-count histogram, shape ``(max_t + 1, n//2 + 1)``."""

    def task(state, m):
        return kernels.mixing_ensemble(state, n, m, max_t)

    return farm.run(task, runs, seed, workers, chunk=4096)


def mixing_time(
    n: int,
    epsilon: float = DEFAULT_EPSILON,
    runs: int = 10**5,
    max_t: int | None = None,
    seed: int = 0,
    workers: int = 1,
    mode: str = "time_average",
) -> MixingResult:
    """First step at which the walk from a cyclic start is within ``epsilon`` of the exact law.

    ``mode="time_average"`` (default): every run keeps its own running
    histogram of the cycle counts seen at steps 1..t; the distance of that
    histogram from the exact law is averaged over runs. This is the
    estimator that reproduces the reference mixing times.

    ``mode="ensemble"``: the distance, at each fixed t, of the cycle-count
    distribution pooled across runs. It converges several times faster.
    """
    if n < 4:
        raise ValueError("need n >= 4")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if runs < 1:
        raise ValueError("need at least one run")
    if max_t is None:
        max_t = 2 * n
    nu = cycle_count_distribution(n).padded()
    if mode == "ensemble":
        counts = mixing_counts(n, runs, max_t, seed, workers)
        probs = counts[:, 1:] / runs
        traj = 0.5 * np.abs(probs - nu[1:]).sum(axis=1)
    elif mode == "time_average":

        def task(state, m):
            return kernels.mixing_time_average(state, n, m, max_t, nu)

        traj = farm.run(task, runs, seed, workers, chunk=1024) / runs
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return MixingResult(n, epsilon, first_crossing(traj, epsilon), traj, runs, mode)


@dataclass(frozen=True)
class FitResult:
    a: float
    c: float
    residual: float


def mixing_law(n, a: float, c: float):
    """``c * n**a * log(n**2)``."""
    n = np.asarray(n, dtype=np.float64)
    return c * n**a * 2.0 * np.log(n)


def fit_mixing_law(points) -> FitResult:
    """Least-squares fit of ``t = c n^a log(n^2)`` in the log domain.

    Two points with distinct n determine the model exactly; more are fitted.
    """
    pts = [(float(n), float(t)) for n, t in points]
    if any(n < 4 for n, _ in pts) or any(t <= 0 for _, t in pts):
        raise ValueError("fit needs n >= 4 and positive t_mix")
    ns = np.array([n for n, _ in pts])
    if len(np.unique(ns)) < 2:
        raise ValueError("degenerate design: need at least two distinct n")
    ts = np.array([t for _, t in pts])
    y = np.log(ts) - np.log(2.0 * np.log(ns))
    design = np.column_stack([np.ones_like(ns), np.log(ns)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = float(np.sum((design @ coef - y) ** 2))
    log_c, a = coef
    return FitResult(a=float(a), c=float(math.exp(log_c)), residual=resid)


def sqrt_n_log_n2(n: int) -> float:
    return math.sqrt(n) * 2.0 * math.log(n)


def exponent_with_unit_c(n: int, t_mix: float) -> float:
    """``a`` solving ``t_mix = n^a log(n^2)``."""
    return math.log(t_mix / (2.0 * math.log(n))) / math.log(n)


# -- SIS failure ------------------------------------------------------------

def refined_failure_bound(n: int) -> float:
    """Independence approximation to the SIS failure probability.

    ``(1/(n-1)) * prod_{i=1}^{n-1} [1 + 1/((n-2)(n-i))]^-1``. Not a true
    upper bound at small n (it gives 1/6 at n = 3, the exact rate is 1/4).
    """
    if n < 3:
        raise ValueError("need n >= 3")
    log_prod = -sum(math.log1p(1.0 / ((n - 2) * (n - i))) for i in range(1, n))
    return math.exp(log_prod) / (n - 1)


@dataclass(frozen=True)
class FailureReport:
    n: int
    samples: int
    failures: int
    rate: float
    stderr: float
    bound_1_over_n: float
    bound_refined: float | None


def failure_experiment(n_list, samples: int, seed: int, workers: int = 1) -> list[FailureReport]:
    if samples < 1:
        raise ValueError("need at least one sample")
    reports = []
    for idx, n in enumerate(n_list):
        if n < 2:
            raise ValueError("SIS needs n >= 2")

        def task(state, m, n=n):
            return kernels.sis_fail_count(state, n, m)

        failures = int(farm.run(task, samples, seed, workers, tag=idx, chunk=1 << 18))
        rate = failures / samples
        reports.append(
            FailureReport(
                n=n,
                samples=samples,
                failures=failures,
                rate=rate,
                stderr=math.sqrt(rate * (1.0 - rate) / samples),
                bound_1_over_n=1.0 / n,
                bound_refined=refined_failure_bound(n) if n >= 3 else None,
            )
        )
    return reports


# -- uniformity over D_n ----------------------------------------------------

UNIFORMITY_RANGE = (4, 11)


@dataclass
class UniformityResult:
    n: int
    multiplier: int
    sampler: str
    occurrences: np.ndarray  # indexed by lexicographic rank in D_n
    mean: float
    sd: float
    histogram: list[tuple[int, int]] = field(default_factory=list)  # (bin start, derangements)

    @property
    def full_coverage(self) -> bool:
        return bool((self.occurrences > 0).all())


def occurrence_histogram(occurrences: np.ndarray, width: int = 5) -> list[tuple[int, int]]:
    bins = np.bincount(occurrences // width)
    return [(i * width, int(c)) for i, c in enumerate(bins) if c]


def uniformity_experiment(
    n: int, multiplier: int, sampler: str, seed: int, workers: int = 1, mix=None
) -> UniformityResult:
    """Draw ``multiplier * d_n`` derangements and count how often each one appears."""
    lo, hi = UNIFORMITY_RANGE
    if not lo <= n <= hi:
        raise ValueError(f"uniformity experiment supports {lo} <= n <= {hi}")
    d_n = rencontres(n)
    table = completion_table(n)
    task = batch_task(sampler, n, mix)

    def ranks(state, m):
        perms, _ = task(state, m)
        return kernels.rank_derangements(perms, table)

    def tally(acc, r):
        acc += np.bincount(r, minlength=d_n)
        return acc

    def tally_sparse(acc, r):
        np.add.at(acc, r, 1)
        return acc

    # dense bincount is cheaper while chunks are comparable to d_n
    occ = farm.run(
        ranks,
        multiplier * d_n,
        seed,
        workers,
        combine=tally if d_n <= 1 << 20 else tally_sparse,
        init=lambda: np.zeros(d_n, dtype=np.int64),
        chunk=1 << 18,
    )
    return UniformityResult(
        n=n,
        multiplier=multiplier,
        sampler=sampler,
        occurrences=occ,
        mean=float(occ.mean()),
        sd=float(occ.std()),
        histogram=occurrence_histogram(occ),
    )


def repeat_collision_check(n: int, samples: int, seed: int, algorithm: str = "s") -> int:
    """Number of draws that repeat an earlier draw (exact match of the one-line form)."""
    rng = derive_stream(seed, 0)
    task = batch_task(algorithm, n)
    state = rng.to_array()
    seen: set[bytes] = set()
    repeats = 0
    left = samples
    while left:
        m = min(left, 1 << 16)
        perms, _ = task(state, m)
        for row in perms:
            b = row.tobytes()
            if b in seen:
                repeats += 1
            else:
                seen.add(b)
        left -= m
    return repeats
