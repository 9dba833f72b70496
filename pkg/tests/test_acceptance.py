"""Acceptance criteria 1-11 at their stated sizes and tolerances.

Each ``criterion_N`` returns ``(passed, detail)``; the pytest wrappers assert
on it and record one PASS/FAIL line per criterion, printed at the end of the
session. Run the file directly to get the same lines without pytest:

    python tests/test_acceptance.py
"""
import contextlib
import io
import itertools
import math
import os
import sys
import time
from functools import lru_cache

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))
import oracles  # noqa: E402
from derange.cli import main as cli_main, read_table  # noqa: E402
from derange.combinatorics import (  # noqa: E402
    cauchy_count,
    cycle_count_distribution,
    dnk_inclusion_exclusion,
    dnk_recursion,
    double_factorial_odd,
    harmonic,
    perfect_matching_count,
    rencontres,
)
from derange.permutation import Permutation, decompose, is_derangement, is_fixed_point_free_involution  # noqa: E402
from derange.rng import Xoshiro256Plus, derive_stream, seed_from  # noqa: E402
from derange.samplers import WalkConfig, restricted_swap, sis_attempts, walk_samples  # noqa: E402
from derange.statistics import (  # noqa: E402
    DEFAULT_EPSILON,
    failure_experiment,
    fit_mixing_law,
    mixing_time,
    total_variation,
    uniformity_experiment,
)

SEED = 20240601
Z = 5.0

# reference exact cycle-count proportions, n = 64, at printed precision
EXACT_N64 = [
    "0.042473", "0.157677", "0.258772", "0.253301", "0.167635", "0.080400", "0.029200",
    "0.008274", "0.001869", "3.417e-4", "5.116e-5", "6.326e-6", "6.499e-7", "5.569e-8",
    "3.989e-9", "2.390e-10",
]
# reference (n, t_mix) pairs from 10^6-run trajectories
TMIX_TABLE = [(64, 67), (128, 112), (192, 150), (256, 184), (320, 216), (384, 245), (448, 274), (512, 301)]


def _printed(x, ref):
    if "e" in ref:
        mant, exp = ref.split("e")
        return f"{x * 10 ** -int(exp):.{len(mant.split('.')[1])}f}e{exp}"
    return f"{x:.6f}"


def _cli(argv):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli_main(argv)
    return code, buf.getvalue()


# -- criteria -----------------------------------------------------------------

def criterion_1():
    t0 = time.perf_counter()
    bad = []
    for n in range(2, 10):
        d, by_k, by_type, inv = oracles.census(n)
        if rencontres(n) != d:
            bad.append(f"d_{n}")
        for k in range(1, n + 1):
            if dnk_recursion(n, k) != by_k.get(k, 0):
                bad.append(f"d_{n}^({k})")
        for t, c in by_type.items():
            if cauchy_count(t, n) != c:
                bad.append(f"cauchy{t}")
        if n % 2 == 0 and perfect_matching_count(n) != inv:
            bad.append(f"pm_{n}")
    dt = time.perf_counter() - t0
    return not bad and dt < 60, f"census n=2..9, mismatches={bad or 0}, {dt:.1f}s"


def criterion_2():
    t0 = time.perf_counter()
    bad = []
    for n in range(0, 129):
        for k in range(0, n + 1):
            if dnk_inclusion_exclusion(n, k) != dnk_recursion(n, k):
                bad.append((n, k))
        if sum(dnk_recursion(n, k) for k in range(n + 1)) != rencontres(n):
            bad.append((n, "sum"))
    for n in range(4, 65):
        if dnk_recursion(n, 2) != math.factorial(n - 1) * (harmonic(n - 2) - 1):
            bad.append((n, "H"))
    dt = time.perf_counter() - t0
    return not bad and dt < 60, f"n<=128 both routes, sums, two-cycle identity n<=64, mismatches={bad or 0}, {dt:.1f}s"


def criterion_3():
    code, out = _cli(["exact", "--n", "64"])
    _, rows, _ = read_table(io.StringIO(out))
    got = [_printed(float(r[2]), ref) for r, ref in zip(rows, EXACT_N64)]
    wrong = [k + 1 for k, (g, ref) in enumerate(zip(got, EXACT_N64)) if g != ref]
    return code == 0 and not wrong, f"16 printed values, wrong k={wrong or 'none'}"


@lru_cache(maxsize=None)
def _table1():
    code, out = _cli(["table1", "--n", "64", "--count", str(10**7), "--mix-list", "n,2n",
                      "--seed", str(SEED)])
    assert code == 0
    return read_table(io.StringIO(out))


def criterion_4():
    header, rows, meta = _table1()
    col = {name: i for i, name in enumerate(header)}
    pvals = rows[-1]
    p_t2n = float(pvals[col["t_2n"]])
    p_s = float(pvals[col["s"]])
    count = 10**7
    exact1 = float(rows[0][col["exact"]])
    emp1 = float(rows[0][col["t_n"]])
    sigma = math.sqrt(exact1 * (1 - exact1) / count)
    excess = (emp1 - exact1) / sigma
    ok = p_t2n > 1e-3 and p_s > 1e-3 and excess > 3
    return ok, (f"chi2 p: T(2n)={p_t2n:.3g}, S={p_s:.3g}; T(n) k=1 {emp1:.6f} vs {exact1:.6f} "
                f"({excess:+.1f} sigma); S ratio={float(meta['s_completed_ratio']):.6f}")


def criterion_5():
    # the n = 64 rate and the n = 3 rate at 10^6 samples; the 1/n clause at 10^7,
    # since at n = 128 the true gap below 1/n is only a few 10^6-sample sigmas
    by_n = {r.n: r for r in failure_experiment([3, 64], 10**6, SEED)}
    big = {r.n: r for r in failure_experiment([8, 16, 32, 64, 128], 10**7, SEED + 1)}
    ok64 = abs(by_n[64].rate - 0.01453) <= 0.0006
    below = {n: r.rate + Z * r.stderr < 1 / n for n, r in big.items()}
    ok3 = abs(by_n[3].rate - 0.25) <= 0.003
    rates = ", ".join(f"n={r.n}:{r.rate:.5f}" for r in big.values())
    return ok64 and all(below.values()) and ok3, (
        f"10^6: n=3 {by_n[3].rate:.5f}, n=64 {by_n[64].rate:.5f}; 10^7: {rates}; "
        f"rate+5sd < 1/n: {all(below.values())}")


def criterion_6():
    count = 10**6
    perms, ok, _ = sis_attempts(3, count, derive_stream(SEED, 6))
    good = ok.astype(bool)
    first = perms[:, 0]
    n312 = int(np.sum(good & (first == 2)))
    n231 = int(np.sum(good & (first == 1)))
    nfail = int(np.sum(~good))
    checks = []
    for obs, p in ((n312, 0.5), (n231, 0.25), (nfail, 0.25)):
        checks.append(abs(obs - count * p) < Z * math.sqrt(count * p * (1 - p)))
    return all(checks), f"312={n312 / count:.5f} 231={n231 / count:.5f} fail={nfail / count:.5f}"


@lru_cache(maxsize=None)
def _tmix(n, mode="time_average"):
    return mixing_time(n, DEFAULT_EPSILON, runs=10**5, seed=SEED + n, mode=mode)


def criterion_7():
    t64, t128 = _tmix(64).t_mix, _tmix(128).t_mix
    ok = t64 is not None and t128 is not None and 60 <= t64 <= 74 and 101 <= t128 <= 123
    ens = f"ensemble estimator: {_tmix(64, 'ensemble').t_mix}, {_tmix(128, 'ensemble').t_mix}"
    return ok, f"t_mix(64)={t64} [60,74], t_mix(128)={t128} [101,123]; {ens}"


def criterion_8():
    table = fit_mixing_law(TMIX_TABLE)
    desk_pts = [(n, _tmix(n).t_mix) for n in (64, 128, 192, 256)]
    if any(t is None for _, t in desk_pts):
        return False, f"unmixed run in {desk_pts}"
    desk = fit_mixing_law(desk_pts)
    ok = 0.525 <= table.a <= 0.529 and 0.89 <= table.c <= 0.91 and 0.45 <= desk.a <= 0.60
    return ok, (f"tabulated pairs a={table.a:.4f} c={table.c:.4f}; desk t_mix={[t for _, t in desk_pts]} "
                f"a={desk.a:.4f} c={desk.c:.3f}")


def criterion_9():
    perms = walk_samples(WalkConfig(16, None, "involution"), 10**6, derive_stream(SEED, 9))
    idx = np.arange(16)
    violations = int(np.sum(~(np.all(perms[np.arange(len(perms))[:, None], perms] == idx, axis=1)
                              & np.all(perms != idx, axis=1))))
    small = walk_samples(WalkConfig(4, None, "involution"), 10**6, derive_stream(SEED, 10))
    partner = small[:, 0]  # label matched with 1 identifies the matching
    counts = np.bincount(partner, minlength=4)[1:]
    sd = math.sqrt(10**6 * (1 / 3) * (2 / 3))
    uniform = bool(np.all(np.abs(counts - 10**6 / 3) < Z * sd)) and counts.sum() == 10**6
    ident = all(dnk_recursion(n, n // 2) == double_factorial_odd(n) for n in range(2, 129, 2))
    return violations == 0 and uniform and ident, (
        f"closure violations={violations}/10^6 (n=16); n=4 counts={counts.tolist()}; (n-1)!! identity={ident}")


def criterion_10():
    s = uniformity_experiment(8, 100, "s", SEED)
    r = uniformity_experiment(8, 100, "reject", SEED)
    ok = 31 <= s.sd <= 36 and s.full_coverage and len(s.occurrences) == 14833 and 9 <= r.sd <= 11
    return ok, f"S sd={s.sd:.2f} coverage={s.full_coverage}; reject sd={r.sd:.2f}"


GOLDEN_SEED42 = [0x15F414253E365229, 0x4F771F08F4211387, 0x100492BD8828891E, 0x4E743FCE495374AE,
                 0x0002D0BAE53F7541]


def criterion_11():
    failures = []
    # restricted swaps: closure in D_n and the split/join +-1 rule, every state and proposal
    for n in range(2, 8):
        for p in oracles.derangements(n):
            k = len(oracles.cycles_of(p))
            cycles = decompose(Permutation.from_zero_based(p)).cycles
            involution = all(p[p[i]] == i for i in range(n))
            for i, j in itertools.product(range(1, n + 1), repeat=2):
                sigma = [x + 1 for x in p]
                if restricted_swap(sigma, i, j):
                    q = Permutation(sigma)
                    if not is_derangement(q):
                        failures.append(("closure", p, i, j))
                    same = any(i in c and j in c for c in cycles)
                    if decompose(q).k != k + (1 if same else -1):
                        failures.append(("pm1", p, i, j))
                if involution:
                    tau = [x + 1 for x in p]
                    restricted_swap(tau, i, j, matching=True)
                    if not is_fixed_point_free_involution(Permutation(tau)):
                        failures.append(("matching", p, i, j))
    # total variation axioms on exact laws and random vectors
    rng = np.random.default_rng(0)
    laws = [cycle_count_distribution(n).nu for n in (20, 21)]
    vecs = [rng.dirichlet(np.ones(10)) for _ in range(30)] + laws
    for a, b, c in itertools.product(vecs, repeat=3):
        if a.shape != b.shape or b.shape != c.shape:
            continue
        d_ab, d_ba = total_variation(a, b), total_variation(b, a)
        if not (0 <= d_ab <= 1 and d_ab == d_ba and total_variation(a, a) == 0
                and total_variation(a, c) <= d_ab + total_variation(b, c) + 1e-12):
            failures.append("tv")
            break
    # generator golden vectors and determinism
    r = seed_from(42)
    if [r.next_u64() for _ in range(5)] != GOLDEN_SEED42:
        failures.append("golden")
    if [Xoshiro256Plus([1, 2, 3, 4]).next_u64()] != [5]:
        failures.append("reference")
    if oracles.xoshiro_plus(oracles.splitmix_outputs(7, 4), 1000) != [
            x for x in (lambda g: [g.next_u64() for _ in range(1000)])(seed_from(7))]:
        failures.append("recurrence")
    if derive_stream(5, 3) != derive_stream(5, 3) or len({derive_stream(5, w).next_u64() for w in range(1024)}) != 1024:
        failures.append("streams")
    return not failures, f"exhaustive n<=7 swap properties, TV axioms, generator vectors; failures={failures[:3] or 0}"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}


def _record(i):
    from conftest import CRITERIA_LINES

    t0 = time.perf_counter()
    ok, detail = CRITERIA[i]()
    line = f"criterion {i}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - t0:.1f}s) {detail}"
    CRITERIA_LINES.append(line)
    print(line)
    return ok, detail


@pytest.mark.parametrize("i", [1, 2, 3, 11])
def test_exact_criteria(i):
    ok, detail = _record(i)
    assert ok, detail


@pytest.mark.slow
@pytest.mark.parametrize("i", [4, 5, 6, 7, 8, 9, 10])
def test_statistical_criteria(i):
    ok, detail = _record(i)
    assert ok, detail


if __name__ == "__main__":
    results = []
    for i, fn in CRITERIA.items():
        t0 = time.perf_counter()
        ok, detail = fn()
        results.append(ok)
        print(f"criterion {i}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - t0:.1f}s) {detail}", flush=True)
    sys.exit(0 if all(results) else 1)
