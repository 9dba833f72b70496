"""Random derangement generators.

Every sampler is a thin wrapper over a batch kernel (compiled when
available, see :mod:`derange._backend`), so a single draw and a batch of
draws from the same generator state give the same permutations.

Batch functions return 0-based ``int32`` arrays of shape ``(count, n)``;
single-draw functions return :class:`~derange.permutation.Permutation`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from derange._backend import kernels
from derange.permutation import (
    Permutation,
    decompose,
    is_derangement,
    is_fixed_point_free_involution,
)
from derange.rng import Xoshiro256Plus

ALGORITHMS = ("t", "s", "sattolo", "reject", "matching")


def _call(rng: Xoshiro256Plus, fn, *args):
    state = rng.to_array()
    out = fn(state, *args)
    rng.load_array(state)
    return out


def resolve_mix(mix, n: int) -> int:
    """Accept an int or one of ``"n"``, ``"2n"``, ``"nlogn"``."""
    if mix is None:
        return 2 * n
    if isinstance(mix, str):
        key = mix.strip().lower().replace("*", "").replace(" ", "")
        if key == "n":
            return n
        if key == "2n":
            return 2 * n
        if key in ("nlogn", "nln(n)", "nlog(n)"):
            return int(round(n * math.log(n)))
        try:
            mix = int(key)
        except ValueError:
            raise ValueError(f"unrecognised mix {mix!r}; use n, 2n, nlogn or an integer") from None
    mix = int(mix)
    if mix < 0:
        raise ValueError("mix must be >= 0")
    return mix


@dataclass(frozen=True)
class WalkConfig:
    """Restricted-transposition walk settings.

    ``initial`` is ``"cyclic"`` (2 3 ... n 1), ``"involution"`` (2 1 4 3 ...,
    which switches the walk to perfect-matching moves) or a derangement.
    ``mix`` counts attempted transpositions and defaults to 2n.
    """

    n: int
    mix: int | str | None = None
    initial: str | Permutation = "cyclic"

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("the restricted transposition walk needs n >= 4")
        object.__setattr__(self, "mix", resolve_mix(self.mix, self.n))
        if isinstance(self.initial, Permutation):
            if self.initial.n != self.n:
                raise ValueError("initial permutation has the wrong length")
            if not is_derangement(self.initial):
                raise ValueError("initial permutation must be a derangement")
        elif self.initial == "cyclic":
            if self.mix < math.ceil(self.n / 2):
                raise ValueError(
                    f"from a cyclic start mix must be >= ceil(n/2) = {math.ceil(self.n / 2)}"
                )
        elif self.initial == "involution":
            if self.n % 2:
                raise ValueError("involution start needs even n")
        else:
            raise ValueError(f"unknown initial state {self.initial!r}")

    @property
    def matching(self) -> bool:
        return isinstance(self.initial, str) and self.initial == "involution"

    def start(self) -> Permutation:
        if isinstance(self.initial, Permutation):
            return self.initial
        if self.initial == "cyclic":
            return Permutation.cyclic(self.n)
        return Permutation.paired_involution(self.n)


@dataclass(frozen=True)
class SisOutcome:
    result: Permutation | None
    draws: int

    @property
    def ok(self) -> bool:
        return self.result is not None


def restricted_swap(sigma: list[int], i: int, j: int, matching: bool = False) -> bool:
    """Apply one restricted transposition proposal in place (1-based labels and indices).

    The swap sigma_i <-> sigma_j happens only if sigma_i != j and sigma_j != i.
    In matching mode the partners are re-paired too, so an involution stays an
    involution. Returns whether the state changed.
    """
    a, b = sigma[i - 1], sigma[j - 1]
    if a == j or b == i or i == j:
        return False
    sigma[i - 1], sigma[j - 1] = b, a
    if matching:
        sigma[a - 1], sigma[b - 1] = j, i
    return True


# -- batch samplers ---------------------------------------------------------

def sattolo_samples(n: int, count: int, rng: Xoshiro256Plus) -> np.ndarray:
    if n < 2:
        raise ValueError("Sattolo's algorithm needs n >= 2")
    return _call(rng, kernels.sattolo_batch, n, count)


def walk_samples(cfg: WalkConfig, count: int, rng: Xoshiro256Plus) -> np.ndarray:
    return _call(rng, kernels.walk_batch, cfg.start().to_array(), cfg.mix, count, cfg.matching)


def walk_trace(cfg: WalkConfig, rng: Xoshiro256Plus) -> tuple[np.ndarray, np.ndarray]:
    """All ``mix + 1`` states of one walk and the incrementally tracked cycle counts."""
    start = cfg.start()
    return _call(rng, kernels.walk_trace, start.to_array(), cfg.mix, cfg.matching, decompose(start).k)


def sis_attempts(n: int, count: int, rng: Xoshiro256Plus):
    """``count`` single SIS attempts: ``(perms, ok, draws)``; failed rows end in -1."""
    if n < 2:
        raise ValueError("SIS needs n >= 2")
    return _call(rng, kernels.sis_batch, n, count)


def sis_failures(n: int, attempts: int, rng: Xoshiro256Plus) -> int:
    if n < 2:
        raise ValueError("SIS needs n >= 2")
    return int(_call(rng, kernels.sis_fail_count, n, attempts))


def sis_samples(n: int, count: int, rng: Xoshiro256Plus) -> tuple[np.ndarray, int]:
    """``count`` completed SIS derangements and the number of attempts it took."""
    if n < 2:
        raise ValueError("SIS needs n >= 2")
    done = []
    attempts = 0
    remaining = count
    while remaining:
        perms, ok, _ = _call(rng, kernels.sis_batch, n, remaining)
        attempts += remaining
        good = perms[ok.astype(bool)]
        done.append(good)
        remaining -= len(good)
    out = np.concatenate(done) if done else np.empty((0, n), dtype=np.int32)
    return out, attempts


def rejection_samples(n: int, count: int, rng: Xoshiro256Plus) -> tuple[np.ndarray, int]:
    if n < 2:
        raise ValueError("rejection sampling needs n >= 2")
    perms, attempts = _call(rng, kernels.reject_batch, n, count)
    return perms, int(attempts)


def batch_task(algorithm: str, n: int, mix=None) -> Callable[[np.ndarray, int], tuple[np.ndarray, int]]:
    """Kernel-level sampler ``f(state, count) -> (perms, attempts)`` for farms."""
    if algorithm in ("t", "matching"):
        if algorithm == "matching":
            cfg = WalkConfig(n, mix, "involution")
        else:
            cfg = WalkConfig(n, mix)
        init = cfg.start().to_array()

        def task(state, count):
            return kernels.walk_batch(state, init, cfg.mix, count, cfg.matching), count

    elif algorithm == "s":
        if n < 2:
            raise ValueError("SIS needs n >= 2")

        def task(state, count):
            out, attempts = [], 0
            remaining = count
            while remaining:
                perms, ok, _ = kernels.sis_batch(state, n, remaining)
                attempts += remaining
                good = perms[ok.astype(bool)]
                out.append(good)
                remaining -= len(good)
            return np.concatenate(out), attempts

    elif algorithm == "sattolo":
        if n < 2:
            raise ValueError("Sattolo's algorithm needs n >= 2")

        def task(state, count):
            return kernels.sattolo_batch(state, n, count), count

    elif algorithm == "reject":
        if n < 2:
            raise ValueError("rejection sampling needs n >= 2")

        def task(state, count):
            perms, attempts = kernels.reject_batch(state, n, count)
            return perms, int(attempts)

    else:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    return task


# -- single draws -----------------------------------------------------------

def sattolo(n: int, rng: Xoshiro256Plus) -> Permutation:
    """Uniform random cyclic permutation (one n-cycle)."""
    return Permutation.from_zero_based(sattolo_samples(n, 1, rng)[0])


def restricted_transposition_walk(cfg: WalkConfig, rng: Xoshiro256Plus) -> Permutation:
    return Permutation.from_zero_based(walk_samples(cfg, 1, rng)[0])


def perfect_matching_sampler(n: int, mix, rng: Xoshiro256Plus) -> Permutation:
    """Random perfect matching of K_n as a fixed-point-free involution."""
    if n % 2:
        raise ValueError("perfect matchings need even n")
    p = restricted_transposition_walk(WalkConfig(n, mix, "involution"), rng)
    if not is_fixed_point_free_involution(p):
        raise AssertionError(f"matching walk left the involution class: {p}")
    return p


def sis_derangement(n: int, rng: Xoshiro256Plus) -> SisOutcome:
    perms, ok, draws = sis_attempts(n, 1, rng)
    result = Permutation.from_zero_based(perms[0]) if ok[0] else None
    return SisOutcome(result, int(draws[0]))


def sis_retry(n: int, rng: Xoshiro256Plus) -> tuple[Permutation, int]:
    """Repeat SIS until it completes; returns the derangement and the attempt count."""
    attempts = 0
    while True:
        attempts += 1
        outcome = sis_derangement(n, rng)
        if outcome.ok:
            return outcome.result, attempts


def rejection_sampler(n: int, rng: Xoshiro256Plus) -> Permutation:
    perms, _ = rejection_samples(n, 1, rng)
    return Permutation.from_zero_based(perms[0])
