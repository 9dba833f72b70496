"""``derange`` command-line front end.

Every run writes a ``#`` preamble with the effective seed and resolved
configuration before any results. Tables are CSV by default (fixed header,
one record per row, ``repr`` floats so the output never depends on locale);
``--format lines`` gives whitespace-separated rows and ``--format json`` a
single document that also carries wall-clock timing.

Exit status: 0 on success, 1 on a usage error, 2 when an internal
consistency check fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time

import numpy as np

from derange import farm
from derange._backend import BACKEND
from derange.combinatorics import (
    ConsistencyError,
    cycle_count_distribution,
    dnk_row,
    normal_approximation_params,
    perfect_matching_count,
    perfect_matching_probability,
    rencontres,
)
from derange.rng import derive_stream, entropy_seed
from derange.samplers import ALGORITHMS, batch_task, resolve_mix
from derange.statistics import (
    DEFAULT_EPSILON,
    UNIFORMITY_RANGE,
    chi_square_gof,
    exponent_with_unit_c,
    failure_experiment,
    fit_mixing_law,
    mixing_time,
    repeat_collision_check,
    sample_measure,
    sqrt_n_log_n2,
    uniformity_experiment,
)

SEED_ENV = "DERANGE_SEED"
MIN_TABLE1_COUNT = 10**4
MIN_MIXING_RUNS = 10**3
MIN_FAILURE_SAMPLES = 10**4
EXACT_RANGE = (2, 1024)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _int_list(text: str) -> list[int]:
    """``"64,128"`` or ``"64:512:64"`` (inclusive)."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            if len(bits) not in (2, 3):
                raise argparse.ArgumentTypeError(f"bad range {part!r}")
            lo, hi, step = bits[0], bits[1], bits[2] if len(bits) == 3 else 1
            if step < 1:
                raise argparse.ArgumentTypeError("range step must be positive")
            out.extend(range(lo, hi + 1, step))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _mix_list(text: str) -> list[str]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("empty mix list")
    return items


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


class Report:
    """Collects one table plus metadata and renders it in the chosen format."""

    def __init__(self, command: str, config: dict, seed: int | None, seed_source: str | None):
        self.command = command
        self.config = config
        self.seed = seed
        self.seed_source = seed_source
        self.header: list[str] = []
        self.rows: list[list] = []
        self.meta: dict = {}
        self.extra: dict = {}
        self.started = time.perf_counter()

    def preamble(self) -> list[str]:
        lines = [f"# derange {self.command}"]
        if self.seed is not None:
            lines.append(f"# seed={self.seed} source={self.seed_source}")
        for k in sorted(self.config):
            lines.append(f"# {k}={_fmt(self.config[k])}")
        return lines

    def render(self, fmt: str) -> str:
        if fmt == "json":
            doc = {
                "command": self.command,
                "seed": self.seed,
                "seed_source": self.seed_source,
                "config": self.config,
                "columns": self.header,
                "rows": [[_json_value(v) for v in r] for r in self.rows],
                "meta": {k: _json_value(v) for k, v in self.meta.items()},
                "timing": {"wall_seconds": time.perf_counter() - self.started, "backend": BACKEND},
            }
            doc.update({k: _json_value(v) for k, v in self.extra.items()})
            return json.dumps(doc, indent=1) + "\n"
        buf = io.StringIO()
        buf.write("\n".join(self.preamble()) + "\n")
        if fmt == "csv":
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(self.header)
            w.writerows([_fmt(v) for v in r] for r in self.rows)
        else:
            buf.write(" ".join(self.header) + "\n")
            for r in self.rows:
                buf.write(" ".join(_fmt(v) for v in r) + "\n")
        for k, v in self.meta.items():
            buf.write(f"# {k}={_fmt(v)}\n")
        return buf.getvalue()


def _json_value(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    return v


def read_table(source) -> tuple[list[str], list[list[str]], dict]:
    """Parse CSV written by this tool: ``(header, rows, metadata)``.

    Comment lines of the form ``# key=value`` become metadata entries.
    """
    text = source.read() if hasattr(source, "read") else open(source).read()
    meta: dict = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            item = line[1:].strip()
            if "=" in item and " " not in item.split("=", 1)[0]:
                key, value = item.split("=", 1)
                meta[key] = value
            continue
        body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        return [], [], meta
    return rows[0], rows[1:], meta


# -- subcommands ------------------------------------------------------------

def cmd_exact(args) -> Report:
    n = args.n
    lo, hi = EXACT_RANGE
    if not lo <= n <= hi:
        raise UsageError(f"exact needs {lo} <= n <= {hi}")
    rep = Report("exact", {"n": n}, None, None)
    row = dnk_row(n)
    d_n = rencontres(n)
    if sum(row) != d_n:
        raise ConsistencyError("row sum differs from d_n")
    nu = cycle_count_distribution(n)
    rep.header = ["k", "d_nk", "nu"]
    rep.rows = [[k, row[k - 1], float(nu.nu[k - 1])] for k in range(1, n // 2 + 1)]
    rep.meta["d_n"] = d_n
    if n % 2 == 0:
        rep.meta["perfect_matchings"] = perfect_matching_count(n)
        if n >= 4:
            rep.meta["perfect_matching_probability"] = perfect_matching_probability(n)
    params = normal_approximation_params(n)
    for key in ("approx_mean", "approx_sd", "exact_mean", "exact_sd"):
        rep.meta[key] = params[key]
    return rep


def _write_samples(out, args, seed: int, fmt: str) -> tuple[int, int]:
    task = batch_task(args.algorithm, args.n, args.mix)
    completed = attempted = 0
    index = 0
    first = True
    for w, quota in enumerate(farm.quotas(args.count, args.workers)):
        state = derive_stream(seed, w).to_array()
        left = quota
        while left:
            m = min(left, 1 << 14)
            perms, attempts = task(state, m)
            completed += len(perms)
            attempted += attempts
            labels = perms + 1
            if fmt == "lines":
                out.write("\n".join(" ".join(map(str, r)) for r in labels.tolist()) + "\n")
            elif fmt == "csv":
                out.write(
                    "".join(f"{index + i},{' '.join(map(str, r))}\n" for i, r in enumerate(labels.tolist()))
                )
            else:
                for r in labels.tolist():
                    out.write(("" if first else ",\n") + json.dumps(r))
                    first = False
            index += len(perms)
            left -= m
    return completed, attempted


def cmd_sample(args, seed, source, out) -> None:
    if args.algorithm not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {args.algorithm!r}")
    if args.count < 0:
        raise UsageError("count must be >= 0")
    if args.algorithm in ("t", "matching") or args.mix is not None:
        args.mix = resolve_mix(args.mix, args.n)
    batch_task(args.algorithm, args.n, args.mix)  # validate before writing anything
    config = {"algorithm": args.algorithm, "n": args.n, "count": args.count, "workers": args.workers}
    if args.mix is not None:
        config["mix"] = args.mix
    rep = Report("sample", config, seed, source)
    started = time.perf_counter()
    if args.format == "json":
        out.write('{"command": "sample", "seed": %d, "seed_source": %s, "config": %s, "samples": [\n'
                  % (seed, json.dumps(source), json.dumps(config)))
    else:
        out.write("\n".join(rep.preamble()) + "\n")
        if args.format == "csv":
            out.write("sample,permutation\n")
    completed, attempted = _write_samples(out, args, seed, args.format)
    ratio = completed / attempted if attempted else float("nan")
    if args.format == "json":
        wall = time.perf_counter() - started
        meta = {"completed": completed, "attempted": attempted, "ratio": ratio}
        out.write("\n], \"meta\": %s, \"timing\": %s}\n" % (
            json.dumps(meta),
            json.dumps({"wall_seconds": wall, "seconds_per_sample": wall / max(completed, 1),
                        "backend": BACKEND}),
        ))
    else:
        out.write(f"# completed={completed} attempted={attempted} ratio={_fmt(ratio)}\n")


def cmd_table1(args, seed, source) -> Report:
    n = args.n
    if args.count < MIN_TABLE1_COUNT:
        raise UsageError(f"table1 needs count >= {MIN_TABLE1_COUNT}")
    if n < 4:
        raise UsageError("table1 needs n >= 4")
    mixes = [(tok, resolve_mix(tok, n)) for tok in args.mix_list]
    config = {"n": n, "count": args.count, "mix_list": ",".join(args.mix_list),
              "workers": args.workers}
    rep = Report("table1", config, seed, source)
    nu = cycle_count_distribution(n)
    columns, pvals = [], []
    for tag, (tok, mix) in enumerate(mixes):
        ck = f"{args.checkpoint}.t{tag}" if args.checkpoint else None
        m, _ = sample_measure("t", n, args.count, seed, args.workers, mix, tag=tag, checkpoint=ck)
        columns.append((f"t_{tok.replace(' ', '')}", m.probs()))
        pvals.append(chi_square_gof(m, nu)[2])
    ck = f"{args.checkpoint}.s" if args.checkpoint else None
    m, attempts = sample_measure("s", n, args.count, seed, args.workers, tag=len(mixes), checkpoint=ck)
    columns.append(("s", m.probs()))
    pvals.append(chi_square_gof(m, nu)[2])
    rep.header = ["k"] + [name for name, _ in columns] + ["exact"]
    for k in range(1, n // 2 + 1):
        rep.rows.append([k] + [float(p[k - 1]) for _, p in columns] + [float(nu.nu[k - 1])])
    rep.rows.append(["chi2_p"] + pvals + [None])
    rep.meta["s_completed_ratio"] = args.count / attempts
    rep.extra["columns_mix"] = {f"t_{tok}": mix for tok, mix in mixes}
    return rep


def cmd_mixing(args, seed, source) -> Report:
    if args.runs < MIN_MIXING_RUNS:
        raise UsageError(f"mixing needs runs >= {MIN_MIXING_RUNS}")
    if any(n < 4 for n in args.n_list):
        raise UsageError("mixing needs every n >= 4")
    eps = args.epsilon
    config = {"n_list": ",".join(map(str, args.n_list)), "runs": args.runs, "epsilon": eps,
              "mode": args.mode, "workers": args.workers,
              "max_t": "2n" if args.max_t is None else args.max_t}
    rep = Report("mixing", config, seed, source)
    rep.header = ["n", "t_mix", "mixed", "sqrt_n_log_n2", "a_unit_c"]
    trajectories = {}
    points = []
    for tag, n in enumerate(args.n_list):
        res = mixing_time(n, eps, args.runs, args.max_t, farm.job_seed(seed, tag), args.workers,
                          mode=args.mode)
        trajectories[n] = res.trajectory
        if res.mixed:
            points.append((n, res.t_mix))
            rep.rows.append([n, res.t_mix, True, sqrt_n_log_n2(n), exponent_with_unit_c(n, res.t_mix)])
        else:
            print(f"warning: n={n} did not mix within max_t={len(res.trajectory) - 1}", file=sys.stderr)
            rep.rows.append([n, None, False, sqrt_n_log_n2(n), None])
    if len({n for n, _ in points}) >= 2:
        fit = fit_mixing_law(points)
        rep.meta.update(fit_a=fit.a, fit_c=fit.c, fit_residual=fit.residual)
    if args.trajectories:
        _write_trajectories(args.trajectories, trajectories)
    if args.format == "json":
        rep.extra["trajectories"] = {str(n): t for n, t in trajectories.items()}
    return rep


def _write_trajectories(path, trajectories: dict) -> None:
    longest = max(len(t) for t in trajectories.values())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"d_tv_n{n}" for n in trajectories])
        for t in range(longest):
            w.writerow([t] + [_fmt(float(tr[t])) if t < len(tr) else "" for tr in trajectories.values()])


def cmd_failure(args, seed, source) -> Report:
    if args.count < MIN_FAILURE_SAMPLES:
        raise UsageError(f"failure needs count >= {MIN_FAILURE_SAMPLES}")
    if any(n < 2 for n in args.n_list):
        raise UsageError("failure needs every n >= 2")
    config = {"n_list": ",".join(map(str, args.n_list)), "count": args.count, "workers": args.workers}
    rep = Report("failure", config, seed, source)
    rep.header = ["n", "samples", "failures", "rate", "stderr", "inv_n", "refined_bound"]
    for r in failure_experiment(args.n_list, args.count, seed, args.workers):
        rep.rows.append([r.n, r.samples, r.failures, r.rate, r.stderr, r.bound_1_over_n, r.bound_refined])
    return rep


def cmd_uniformity(args, seed, source) -> Report:
    lo, hi = UNIFORMITY_RANGE
    if not lo <= args.n <= hi:
        raise UsageError(f"uniformity needs {lo} <= n <= {hi}")
    if args.multiplier < 1:
        raise UsageError("multiplier must be >= 1")
    config = {"n": args.n, "multiplier": args.multiplier, "algorithm": args.algorithm,
              "workers": args.workers}
    if args.algorithm in ("t", "matching"):
        config["mix"] = resolve_mix(args.mix, args.n)
    rep = Report("uniformity", config, seed, source)
    res = uniformity_experiment(args.n, args.multiplier, args.algorithm, seed, args.workers, args.mix)
    rep.header = ["bin_start", "bin_end", "derangements"]
    rep.rows = [[start, start + 4, c] for start, c in res.histogram]
    rep.meta.update(d_n=len(res.occurrences), mean=res.mean, sd=res.sd,
                    full_coverage=res.full_coverage, min=int(res.occurrences.min()),
                    max=int(res.occurrences.max()))
    return rep


def cmd_collisions(args, seed, source) -> Report:
    if args.n < 2:
        raise UsageError("collisions needs n >= 2")
    config = {"n": args.n, "count": args.count, "algorithm": args.algorithm}
    if args.algorithm in ("t", "matching"):
        config["mix"] = resolve_mix(args.mix, args.n)
    rep = Report("collisions", config, seed, source)
    repeats = repeat_collision_check(args.n, args.count, seed, args.algorithm)
    d = rencontres(args.n)
    # expected repeats for uniform draws: count minus expected number of distinct values
    expected = args.count - d * -math.expm1(args.count * math.log1p(-1.0 / d)) if d > 1 else args.count - 1
    rep.header = ["n", "samples", "repeats", "uniform_expected_repeats"]
    rep.rows = [[args.n, args.count, repeats, expected]]
    return rep


# -- wiring -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="derange", description="Random derangement samplers and experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seeded=True):
        sp.add_argument("--format", choices=("csv", "json", "lines"), default="csv")
        sp.add_argument("--output", "-o", help="write here instead of standard output")
        if seeded:
            sp.add_argument("--seed", type=_seed, help=f"64-bit master seed (else ${SEED_ENV}, else fresh entropy)")
            sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("exact", help="exact cycle-count distribution over D_n")
    sp.add_argument("--n", type=int, required=True)
    common(sp, seeded=False)

    sp = sub.add_parser("sample", help="emit random derangements")
    sp.add_argument("--algorithm", default="t", choices=ALGORITHMS)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--mix", help="walk length: integer, n, 2n or nlogn (default 2n)")
    common(sp)

    sp = sub.add_parser("table1", help="empirical vs exact cycle-count proportions")
    sp.add_argument("--n", type=int, default=64)
    sp.add_argument("--count", type=int, default=10**6)
    sp.add_argument("--mix-list", type=_mix_list, default=["n", "2n"])
    sp.add_argument("--checkpoint", help="checkpoint file prefix for resumable runs")
    common(sp)

    sp = sub.add_parser("mixing", help="mixing time of the walk from a cyclic start")
    sp.add_argument("--n-list", type=_int_list, default=[64, 128, 192, 256])
    sp.add_argument("--runs", type=int, default=10**5)
    sp.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    sp.add_argument("--max-t", type=int, default=None, help="steps to follow (default 2n)")
    sp.add_argument("--mode", choices=("time_average", "ensemble"), default="time_average")
    sp.add_argument("--trajectories", help="CSV path for the per-step distance curves")
    common(sp)

    sp = sub.add_parser("failure", help="SIS failure rate against 1/n and the refined bound")
    sp.add_argument("--n-list", type=_int_list, default=[8, 16, 32, 64, 128])
    sp.add_argument("--count", type=int, default=10**6)
    common(sp)

    sp = sub.add_parser("uniformity", help="occurrence counts of every derangement")
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--multiplier", type=int, default=100)
    sp.add_argument("--algorithm", default="s", choices=ALGORITHMS)
    sp.add_argument("--mix")
    common(sp)

    sp = sub.add_parser("collisions", help="count repeated draws")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--count", type=int, default=10**5)
    sp.add_argument("--algorithm", default="s", choices=ALGORITHMS)
    sp.add_argument("--mix")
    common(sp)
    return p


def resolve_seed(flag: int | None) -> tuple[int, str]:
    if flag is not None:
        return flag, "flag"
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return _seed(env), "env"
        except (ValueError, argparse.ArgumentTypeError):
            raise UsageError(f"{SEED_ENV} is not a 64-bit integer: {env!r}") from None
    return entropy_seed(), "entropy"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = None
    try:
        seed = source = None
        if args.command != "exact":
            if args.workers < 1:
                raise UsageError("workers must be >= 1")
            seed, source = resolve_seed(args.seed)
        out = open(args.output, "w", newline="") if args.output else sys.stdout
        if args.command == "sample":
            cmd_sample(args, seed, source, out)
        else:
            if args.command == "exact":
                rep = cmd_exact(args)
            else:
                handler = {
                    "table1": cmd_table1,
                    "mixing": cmd_mixing,
                    "failure": cmd_failure,
                    "uniformity": cmd_uniformity,
                    "collisions": cmd_collisions,
                }[args.command]
                rep = handler(args, seed, source)
            out.write(rep.render(args.format))
        out.flush()
    except ConsistencyError as exc:
        print(f"derange: consistency check failed: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ValueError) as exc:
        print(f"derange {args.command}: error: {exc}", file=sys.stderr)
        return 1
    finally:
        if out is not None and out is not sys.stdout:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
