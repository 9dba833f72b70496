"""xoshiro256+ generator with splitmix64 seeding and per-worker streams.

The generator is the reference algorithm by Blackman and Vigna; state is four
64-bit words. All integer draws go through :meth:`Xoshiro256Plus.next_index`,
which uses Lemire's multiply-and-reject method on the *high* bits of each
output word (the low bits of xoshiro256+ are weak) and is exactly uniform.

The compiled kernels in :mod:`derange._ckernels` carry an identical copy of
this arithmetic in ``_xoshiro.h``; the two must stay bit-for-bit equal.
"""
from __future__ import annotations

import os

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF

# splitmix64 constants (Steele, Lea & Flood)
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MUL1 = 0xBF58476D1CE4E5B9
MIX_MUL2 = 0x94D049BB133111EB
# separates worker ids from master seeds before hashing
WORKER_SALT = 0xD1B54A32D192ED03

TWO_POW_M53 = 2.0 ** -53


def mix64(z: int) -> int:
    """splitmix64 finalizer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_MUL1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MUL2) & MASK64
    return z ^ (z >> 31)


def splitmix64(seed: int):
    """Yield the splitmix64 output stream for ``seed``."""
    x = seed & MASK64
    while True:
        x = (x + GOLDEN_GAMMA) & MASK64
        yield mix64(x)


def expand_seed(master: int) -> list[int]:
    """Four nonzero state words from a 64-bit master seed.

    Words are consecutive splitmix64 outputs; a zero output is skipped.
    """
    words = []
    for w in splitmix64(master):
        if w:
            words.append(w)
            if len(words) == 4:
                return words
    raise AssertionError("unreachable")


def derive_seed(master: int, worker: int) -> int:
    """64-bit seed for stream ``worker`` under ``master``."""
    if worker < 0:
        raise ValueError("worker index must be >= 0")
    return mix64(mix64(master & MASK64) ^ mix64((worker ^ WORKER_SALT) + GOLDEN_GAMMA))


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256Plus:
    """xoshiro256+ state. ``seed`` is kept for provenance only."""

    __slots__ = ("s", "seed")

    def __init__(self, state, seed: int | None = None):
        s = [int(w) & MASK64 for w in state]
        if len(s) != 4:
            raise ValueError("xoshiro256+ needs exactly four state words")
        if not any(s):
            raise ValueError("xoshiro256+ state must not be all zero")
        self.s = s
        self.seed = seed

    def __repr__(self):
        words = ", ".join(f"0x{w:016x}" for w in self.s)
        return f"Xoshiro256Plus([{words}], seed={self.seed})"

    def __eq__(self, other):
        return isinstance(other, Xoshiro256Plus) and self.s == other.s

    def copy(self) -> "Xoshiro256Plus":
        return Xoshiro256Plus(self.s, self.seed)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (s0 + s3) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def next_unit_open(self) -> float:
        """Uniform deviate in the open interval (0, 1)."""
        while True:
            x = self.next_u64() >> 11
            if x:
                return x * TWO_POW_M53

    def next_below(self, n: int) -> int:
        """Uniform integer in ``0..n-1`` (Lemire, exact)."""
        if n < 1:
            raise ValueError("n must be >= 1")
        m = self.next_u64() * n
        low = m & MASK64
        if low < n:
            threshold = ((1 << 64) - n) % n
            while low < threshold:
                m = self.next_u64() * n
                low = m & MASK64
        return m >> 64

    def next_index(self, n: int) -> int:
        """Uniform label in ``1..n``."""
        return self.next_below(n) + 1

    # interop with the batch kernels, which mutate a uint64[4] array in place
    def to_array(self) -> np.ndarray:
        return np.array(self.s, dtype=np.uint64)

    def load_array(self, arr: np.ndarray) -> None:
        self.s = [int(w) for w in arr]


def seed_from(master: int) -> Xoshiro256Plus:
    master &= MASK64
    return Xoshiro256Plus(expand_seed(master), seed=master)


def next_u64(state: Xoshiro256Plus) -> int:
    return state.next_u64()


def next_unit_open(state: Xoshiro256Plus) -> float:
    return state.next_unit_open()


def next_index(state: Xoshiro256Plus, n: int) -> int:
    return state.next_index(n)


def derive_stream(master: int, worker: int) -> Xoshiro256Plus:
    """Independent, reproducible stream for one worker of a farm."""
    rng = seed_from(derive_seed(master, worker))
    rng.seed = master & MASK64
    return rng


def entropy_seed() -> int:
    """Fresh master seed from the OS. Only the CLI should call this."""
    return int.from_bytes(os.urandom(8), "little")
