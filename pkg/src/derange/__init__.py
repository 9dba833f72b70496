"""Uniform random derangements: exact counts, samplers and mixing experiments."""
from derange._backend import BACKEND
from derange.combinatorics import (
    ConsistencyError,
    CycleCountDistribution,
    CycleType,
    cauchy_count,
    cycle_count_distribution,
    dnk_row,
    perfect_matching_count,
    rencontres,
    stirling_first_unsigned,
)
from derange.permutation import Permutation, PermutationError, decompose, is_derangement
from derange.rng import Xoshiro256Plus, derive_stream, seed_from
from derange.samplers import (
    WalkConfig,
    perfect_matching_sampler,
    rejection_sampler,
    restricted_transposition_walk,
    sattolo,
    sis_derangement,
    sis_retry,
)
from derange.statistics import (
    EmpiricalMeasure,
    chi_square_gof,
    fit_mixing_law,
    mixing_time,
    tv_distance,
)

__version__ = "0.1.0"

__all__ = [
    "Permutation",
    "PermutationError",
    "decompose",
    "is_derangement",
    "Xoshiro256Plus",
    "derive_stream",
    "seed_from",
    "BACKEND",
    "ConsistencyError",
    "CycleCountDistribution",
    "CycleType",
    "cauchy_count",
    "cycle_count_distribution",
    "dnk_row",
    "perfect_matching_count",
    "rencontres",
    "stirling_first_unsigned",
    "WalkConfig",
    "perfect_matching_sampler",
    "rejection_sampler",
    "restricted_transposition_walk",
    "sattolo",
    "sis_derangement",
    "sis_retry",
    "EmpiricalMeasure",
    "chi_square_gof",
    "fit_mixing_law",
    "mixing_time",
    "tv_distance",
]
