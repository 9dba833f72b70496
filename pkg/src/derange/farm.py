"""Split a sampling job across workers with derived generator streams.

Worker ``w`` of a job draws ``total // workers`` items (the first
``total % workers`` workers take one extra) from ``derive_stream(seed, w)``.
Partial results are merged by addition, so the outcome depends only on
``(seed, workers)``, never on scheduling or chunking. The compiled kernels
release the GIL, so a thread pool gives real parallelism.

With a checkpoint path, progress (partial results plus generator states) is
written after every ``checkpoint_every`` items and a rerun with the same key
resumes from it.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable

import numpy as np

from derange.rng import derive_seed, derive_stream

DEFAULT_CHUNK = 1 << 16


def job_seed(seed: int, tag: int | None) -> int:
    """Seed for one of several independent jobs sharing a master seed."""
    return seed if tag is None else derive_seed(seed, (1 << 32) + tag)


def quotas(total: int, workers: int) -> list[int]:
    base, extra = divmod(total, workers)
    return [base + (w < extra) for w in range(workers)]


def _add(acc, part):
    return part if acc is None else acc + part


def _encode(x):
    if isinstance(x, np.ndarray):
        return {"dtype": str(x.dtype), "shape": list(x.shape), "data": x.ravel().tolist()}
    return x


def _decode(x):
    if isinstance(x, dict) and "dtype" in x:
        return np.array(x["data"], dtype=x["dtype"]).reshape(x["shape"])
    return x


def run(
    task: Callable[[np.ndarray, int], Any],
    total: int,
    seed: int,
    workers: int = 1,
    *,
    tag: int | None = None,
    chunk: int = DEFAULT_CHUNK,
    combine: Callable[[Any, Any], Any] = _add,
    init: Callable[[], Any] | None = None,
    checkpoint: str | os.PathLike | None = None,
    checkpoint_every: int = 10**7,
    key: dict | None = None,
):
    """Run ``task(state, m)`` over ``total`` items and merge the partial results."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    base = job_seed(seed, tag)
    streams = [derive_stream(base, w).to_array() for w in range(workers)]
    left = quotas(total, workers)
    accs = [init() if init else None for _ in range(workers)]

    ck_key = {"seed": seed, "workers": workers, "tag": tag, "total": total, **(key or {})}
    if checkpoint and os.path.exists(checkpoint):
        with open(checkpoint) as fh:
            saved = json.load(fh)
        if saved["key"] != json.loads(json.dumps(ck_key)):
            raise ValueError(f"checkpoint {checkpoint} belongs to a different run")
        streams = [np.array(s, dtype=np.uint64) for s in saved["states"]]
        left = saved["left"]
        accs = [_decode(a) for a in saved["accs"]]

    def work(w, budget):
        done = 0
        while done < budget:
            m = min(chunk, budget - done)
            accs[w] = combine(accs[w], task(streams[w], m))
            done += m
        left[w] -= budget

    per_round = max(1, checkpoint_every // workers) if checkpoint else None
    with ThreadPoolExecutor(max_workers=workers) as pool:
        while any(left):
            budgets = [min(x, per_round) if per_round else x for x in left]
            list(pool.map(work, range(workers), budgets))
            if checkpoint:
                state = {
                    "key": ck_key,
                    "states": [[int(v) for v in s] for s in streams],
                    "left": left,
                    "accs": [_encode(a) for a in accs],
                }
                tmp = f"{checkpoint}.tmp"
                with open(tmp, "w") as fh:
                    json.dump(state, fh)
                os.replace(tmp, checkpoint)

    result = None
    for a in accs:
        if a is not None:
            result = _add(result, a)
    return result
