"""Pure-Python batch kernels.

Reference implementation of every hot loop; :mod:`derange._ckernels` mirrors
these signatures and must consume the generator identically so both backends
produce the same samples from the same state.

Conventions shared by both backends:

* ``state`` is a ``uint64[4]`` array, advanced in place.
* permutations are 0-based ``int32`` rows (``perm[i] = sigma(i+1) - 1``).
"""
import numpy as np

from derange.rng import Xoshiro256Plus


def _stream(state):
    return Xoshiro256Plus(state)


def _store(state, rng):
    state[:] = np.array(rng.s, dtype=np.uint64)


def u64_block(state, count):
    rng = _stream(state)
    out = np.array([rng.next_u64() for _ in range(count)], dtype=np.uint64)
    _store(state, rng)
    return out


def below_block(state, n, count):
    rng = _stream(state)
    out = np.array([rng.next_below(n) for _ in range(count)], dtype=np.int64)
    _store(state, rng)
    return out


def unit_block(state, count):
    rng = _stream(state)
    out = np.array([rng.next_unit_open() for _ in range(count)], dtype=np.float64)
    _store(state, rng)
    return out


def sattolo_batch(state, n, count):
    rng = _stream(state)
    below = rng.next_below
    out = np.empty((count, n), dtype=np.int32)
    for row in range(count):
        p = list(range(n))
        for i in range(n - 1, 0, -1):
            j = below(i)
            p[i], p[j] = p[j], p[i]
        out[row] = p
    _store(state, rng)
    return out


def _same_cycle(sigma, i, j):
    # walk both cycles in lockstep; cost is O(min of the two arcs)
    a = sigma[i]
    b = sigma[j]
    while True:
        if a == j or b == i:
            return True
        if a == i or b == j:
            return False
        a = sigma[a]
        b = sigma[b]


def _walk_step(sigma, i, j, matching):
    """One restricted transposition attempt on ``sigma`` (0-based).

    Returns +1/-1 for an accepted swap that split/joined cycles, 0 otherwise.
    In matching mode the move is the switch ``{i,a},{j,b} -> {i,b},{j,a}``
    and the cycle count never changes.
    """
    a = sigma[i]
    b = sigma[j]
    if a == j or b == i or i == j:
        return 0
    if matching:
        sigma[i] = b
        sigma[j] = a
        sigma[a] = j
        sigma[b] = i
        return 0
    delta = 1 if _same_cycle(sigma, i, j) else -1
    sigma[i] = b
    sigma[j] = a
    return delta


def walk_batch(state, init, mix, count, matching):
    rng = _stream(state)
    below = rng.next_below
    n = len(init)
    base = [int(v) for v in init]
    out = np.empty((count, n), dtype=np.int32)
    for row in range(count):
        sigma = list(base)
        for _ in range(mix):
            i = below(n)
            j = below(n)
            a = sigma[i]
            b = sigma[j]
            if a != j and b != i and i != j:
                sigma[i] = b
                sigma[j] = a
                if matching:
                    sigma[a] = j
                    sigma[b] = i
        out[row] = sigma
    _store(state, rng)
    return out


def walk_trace(state, init, mix, matching, k0):
    """Every intermediate state of one walk plus its incrementally kept cycle count."""
    rng = _stream(state)
    n = len(init)
    sigma = [int(v) for v in init]
    states = np.empty((mix + 1, n), dtype=np.int32)
    kcounts = np.empty(mix + 1, dtype=np.int32)
    k = k0
    states[0] = sigma
    kcounts[0] = k
    for t in range(1, mix + 1):
        i = rng.next_below(n)
        j = rng.next_below(n)
        k += _walk_step(sigma, i, j, matching)
        states[t] = sigma
        kcounts[t] = k
    _store(state, rng)
    return states, kcounts


def sis_batch(state, n, count):
    """``count`` single attempts. Failed rows have ``ok == 0`` and last entry -1."""
    rng = _stream(state)
    below = rng.next_below
    perms = np.empty((count, n), dtype=np.int32)
    ok = np.ones(count, dtype=np.uint8)
    draws = np.zeros(count, dtype=np.int64)
    for row in range(count):
        pool = list(range(n))
        size = n
        sigma = [0] * n
        used = 0
        for i in range(n):
            if size == 1 and pool[0] == i:
                sigma[i] = -1
                ok[row] = 0
                break
            while True:
                idx = below(size)
                used += 1
                v = pool[idx]
                if v != i:
                    break
            sigma[i] = v
            size -= 1
            pool[idx] = pool[size]
        perms[row] = sigma
        draws[row] = used
    _store(state, rng)
    return perms, ok, draws


def sis_fail_count(state, n, attempts):
    rng = _stream(state)
    below = rng.next_below
    failures = 0
    for _ in range(attempts):
        pool = list(range(n))
        size = n
        for i in range(n):
            if size == 1 and pool[0] == i:
                failures += 1
                break
            while True:
                idx = below(size)
                if pool[idx] != i:
                    break
            size -= 1
            pool[idx] = pool[size]
    _store(state, rng)
    return failures


def reject_batch(state, n, count):
    """Fisher-Yates until a derangement appears; returns (perms, total attempts)."""
    rng = _stream(state)
    below = rng.next_below
    out = np.empty((count, n), dtype=np.int32)
    attempts = 0
    for row in range(count):
        while True:
            attempts += 1
            p = list(range(n))
            for i in range(n - 1, 0, -1):
                j = below(i + 1)
                p[i], p[j] = p[j], p[i]
            if all(p[i] != i for i in range(n)):
                break
        out[row] = p
    _store(state, rng)
    return out, attempts


def cycle_counts(perms):
    perms = np.asarray(perms)
    count, n = perms.shape
    out = np.empty(count, dtype=np.int32)
    for row in range(count):
        p = perms[row].tolist()
        seen = [False] * n
        k = 0
        for start in range(n):
            if not seen[start]:
                k += 1
                x = start
                while not seen[x]:
                    seen[x] = True
                    x = p[x]
        out[row] = k
    return out


def mixing_ensemble(state, n, runs, max_t):
    """Pooled cycle-count histogram at every step of ``runs`` walks from the cyclic state.

    Row ``t`` of the result holds, for each k, how many runs sat in a k-cycle
    derangement after ``t`` attempted transpositions.
    """
    rng = _stream(state)
    below = rng.next_below
    counts = np.zeros((max_t + 1, n // 2 + 1), dtype=np.int64)
    table = [[0] * (n // 2 + 1) for _ in range(max_t + 1)]
    for _ in range(runs):
        sigma = [(i + 1) % n for i in range(n)]
        k = 1
        table[0][1] += 1
        for t in range(1, max_t + 1):
            i = below(n)
            j = below(n)
            k += _walk_step(sigma, i, j, False)
            table[t][k] += 1
    counts[:] = table
    _store(state, rng)
    return counts


def mixing_time_average(state, n, runs, max_t, nu):
    """Sum over runs of the TV distance of each run's time-averaged measure.

    Bins above the largest cycle count a run has visited are empty, so their
    contribution is the precomputed tail mass of ``nu``.
    """
    rng = _stream(state)
    below = rng.next_below
    half = n // 2
    nu = [float(x) for x in nu]
    tail = [0.0] * (half + 2)
    for kk in range(half, 0, -1):
        tail[kk] = tail[kk + 1] + nu[kk]
    d0 = 0.5 * (abs(1.0 - nu[1]) + tail[2])
    traj = [0.0] * (max_t + 1)
    for _ in range(runs):
        sigma = [(i + 1) % n for i in range(n)]
        k = 1
        kmax = 1
        hist = [0] * (half + 1)
        traj[0] += d0
        for t in range(1, max_t + 1):
            i = below(n)
            j = below(n)
            k += _walk_step(sigma, i, j, False)
            hist[k] += 1
            if k > kmax:
                kmax = k
            inv = 1.0 / t
            d = tail[kmax + 1]
            for kk in range(1, kmax + 1):
                d += abs(hist[kk] * inv - nu[kk])
            traj[t] += 0.5 * d
    _store(state, rng)
    return np.array(traj, dtype=np.float64)


def rank_derangements(perms, table):
    """Lexicographic rank of each derangement row within D_n.

    ``table[m, r]`` must hold the number of ways to fill ``m`` positions with
    ``m`` values when ``r`` positions still have their own label available.
    """
    perms = np.asarray(perms)
    count, n = perms.shape
    out = np.empty(count, dtype=np.int64)
    for row in range(count):
        p = perms[row].tolist()
        used = [False] * n
        rank = 0
        for i in range(n):
            m = n - i - 1
            # later positions whose own label is still available
            free_after = sum(1 for q in range(i + 1, n) if not used[q])
            target = p[i]
            for v in range(target):
                if used[v] or v == i:
                    continue
                rank += int(table[m, free_after - 1]) if v > i else int(table[m, free_after])
            used[target] = True
        out[row] = rank
    return out
