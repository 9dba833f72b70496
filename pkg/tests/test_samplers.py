import itertools
import math

import numpy as np
import pytest

import oracles
from derange import _pykernels as py
from derange.permutation import Permutation, decompose, is_derangement, is_fixed_point_free_involution
from derange.rng import seed_from
from derange.samplers import (
    WalkConfig,
    batch_task,
    perfect_matching_sampler,
    rejection_sampler,
    rejection_samples,
    resolve_mix,
    restricted_transposition_walk,
    sattolo,
    sattolo_samples,
    sis_attempts,
    sis_derangement,
    sis_failures,
    sis_retry,
    sis_samples,
    walk_samples,
    walk_trace,
)


def chi2_uniform_ok(counts, z=5.0):
    """Every cell within z binomial sigmas of the uniform expectation."""
    counts = np.asarray(counts)
    total = counts.sum()
    p = 1 / len(counts)
    sd = math.sqrt(total * p * (1 - p))
    return np.all(np.abs(counts - total * p) < z * sd)


def test_resolve_mix():
    assert resolve_mix(None, 10) == 20
    assert resolve_mix("n", 10) == 10
    assert resolve_mix("2n", 10) == 20
    assert resolve_mix("nlogn", 64) == round(64 * math.log(64))
    assert resolve_mix("17", 10) == 17
    with pytest.raises(ValueError):
        resolve_mix(-1, 10)
    with pytest.raises(ValueError):
        resolve_mix("fast", 10)


def test_walk_config_validation():
    assert WalkConfig(8).mix == 16
    with pytest.raises(ValueError):
        WalkConfig(3)
    with pytest.raises(ValueError):
        WalkConfig(10, mix=4)  # below ceil(n/2) from the cyclic start
    with pytest.raises(ValueError):
        WalkConfig(5, initial="involution")
    with pytest.raises(ValueError):
        WalkConfig(4, initial=Permutation.identity(4))
    assert WalkConfig(4, mix=0, initial=Permutation.cyclic(4)).mix == 0
    assert WalkConfig(6, initial="involution").matching


def test_sattolo_is_single_cycle_and_uniform():
    r = seed_from(1)
    for _ in range(20):
        assert decompose(sattolo(9, r)).k == 1
    perms = sattolo_samples(4, 60000, seed_from(2))
    keys = [tuple(p) for p in perms]
    counts = np.array(list({k: keys.count(k) for k in set(keys)}.values()))
    assert len(counts) == math.factorial(3)
    assert chi2_uniform_ok(counts)


def test_walk_stays_in_derangements():
    cfg = WalkConfig(10, mix=40)
    perms = walk_samples(cfg, 2000, seed_from(3))
    assert all(np.all(p != np.arange(10)) for p in perms)
    assert sorted(perms[0].tolist()) == list(range(10))


def test_walk_trace_cycle_counts_match_decomposition():
    for seed in range(5):
        cfg = WalkConfig(12, mix=60)
        states, ks = walk_trace(cfg, seed_from(seed))
        for s, k in zip(states, ks):
            p = Permutation.from_zero_based(s)
            assert is_derangement(p)
            assert decompose(p).k == k


def test_walk_uniform_at_small_n():
    perms = walk_samples(WalkConfig(5, mix=60), 44 * 1500, seed_from(4))
    universe = oracles.derangements(5)
    counts = np.zeros(len(universe), dtype=int)
    index = {p: i for i, p in enumerate(universe)}
    for p in perms:
        counts[index[tuple(p)]] += 1
    assert chi2_uniform_ok(counts)


def test_single_draw_matches_batch():
    cfg = WalkConfig(8)
    a = restricted_transposition_walk(cfg, seed_from(5))
    b = walk_samples(cfg, 1, seed_from(5))[0]
    assert a.zero_based == tuple(b)


def test_sis_hand_example_and_failure_marker():
    perms, ok, draws = sis_attempts(3, 2000, seed_from(6))
    for p, good, d in zip(perms, ok, draws):
        if good:
            assert tuple(p) in {(1, 2, 0), (2, 0, 1)}
            assert d >= 2
        else:
            assert p[-1] == -1
    out = sis_derangement(2, seed_from(1))
    assert out.ok and str(out.result) == "2 1" and out.draws >= 1


def test_sis_n3_exact_probabilities():
    # three outcomes: 2 3 1, 3 1 2 and failure with probabilities 1/4, 1/2, 1/4
    count = 200000
    perms, ok, _ = sis_attempts(3, count, seed_from(7))
    keys = [tuple(p) if g else None for p, g in zip(perms.tolist(), ok)]
    obs = {
        "231": keys.count((1, 2, 0)),
        "312": keys.count((2, 0, 1)),
        "fail": keys.count(None),
    }
    for name, p in (("231", 0.25), ("312", 0.5), ("fail", 0.25)):
        sd = math.sqrt(count * p * (1 - p))
        assert abs(obs[name] - count * p) < 5 * sd, name


def test_sis_retry_and_failure_counter():
    p, attempts = sis_retry(6, seed_from(8))
    assert is_derangement(p) and attempts >= 1
    perms, attempts = sis_samples(6, 1000, seed_from(8))
    assert perms.shape == (1000, 6) and attempts >= 1000
    assert all(np.all(r != np.arange(6)) for r in perms)
    assert 0 < sis_failures(3, 4000, seed_from(9)) < 4000


def test_sis_failure_counter_matches_attempt_kernel():
    a = sis_failures(7, 5000, seed_from(10))
    _, ok, _ = sis_attempts(7, 5000, seed_from(10))
    assert a == int((ok == 0).sum())


def test_rejection_sampler_uniform():
    perms, attempts = rejection_samples(4, 9 * 4000, seed_from(11))
    assert attempts >= len(perms)
    universe = oracles.derangements(4)
    counts = [sum(1 for p in perms if tuple(p) == u) for u in universe]
    assert chi2_uniform_ok(counts)
    assert is_derangement(rejection_sampler(7, seed_from(1)))


@pytest.mark.parametrize("n", [4, 6, 8])
def test_matching_closure_every_mix(n):
    for mix in (0, 1, 2, 5, 3 * n):
        perms = walk_samples(WalkConfig(n, mix, "involution"), 300, seed_from(mix))
        for p in perms:
            assert is_fixed_point_free_involution(Permutation.from_zero_based(p))


def test_matching_uniform_at_n6():
    perms = walk_samples(WalkConfig(6, 30, "involution"), 15 * 3000, seed_from(12))
    keys = [tuple(p) for p in perms.tolist()]
    counts = [keys.count(k) for k in set(keys)]
    assert len(counts) == 15
    assert chi2_uniform_ok(counts)


def test_matching_sampler_wrapper():
    p = perfect_matching_sampler(10, None, seed_from(13))
    assert is_fixed_point_free_involution(p)
    with pytest.raises(ValueError):
        perfect_matching_sampler(7, None, seed_from(1))


def test_batch_task_contract():
    for alg in ("t", "s", "sattolo", "reject", "matching"):
        task = batch_task(alg, 8)
        perms, attempts = task(seed_from(1).to_array(), 50)
        assert perms.shape == (50, 8) and attempts >= 50
    with pytest.raises(ValueError):
        batch_task("quantum", 8)


def test_walk_kernel_swap_rule_matches_reference():
    # replay a kernel walk proposal by proposal with explicit draws
    n, mix = 9, 50
    init = np.array([(i + 1) % n for i in range(n)], dtype=np.int32)
    state = seed_from(14).to_array()
    out = py.walk_batch(state.copy(), init, mix, 1, False)[0]
    r = seed_from(14)
    sigma = [int(v) for v in init]
    for _ in range(mix):
        i, j = r.next_below(n), r.next_below(n)
        if sigma[i] != j and sigma[j] != i and i != j:
            sigma[i], sigma[j] = sigma[j], sigma[i]
    assert out.tolist() == sigma


def test_all_restricted_moves_reach_every_derangement():
    # irreducibility of the walk at n = 5 by breadth-first search over moves
    start = tuple((i + 1) % 5 for i in range(5))
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for p in frontier:
            for i, j in itertools.combinations(range(5), 2):
                if p[i] != j and p[j] != i:
                    q = list(p)
                    q[i], q[j] = q[j], q[i]
                    q = tuple(q)
                    if q not in seen:
                        seen.add(q)
                        nxt.append(q)
        frontier = nxt
    assert len(seen) == 44
