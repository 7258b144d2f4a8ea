"""Replicate-parallel execution.

Workers receive contiguous replicate ranges and return arrays indexed by
replicate; results are concatenated in range order, so the output is
bit-identical for every worker count (each replicate draws from its own
stream and accumulation order never changes).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np


def replicate_map(worker, static_args: tuple, reps: int, workers: int = 1):
    """Run worker(static_args, lo, hi) over [0, reps), possibly in parallel.

    worker must be a top-level function returning a tuple of arrays whose
    leading axis is the replicate index within [lo, hi).
    """
    if workers is None or workers <= 1 or reps < 2 * (workers or 1):
        return worker(static_args, 0, reps)
    nchunks = min(reps, workers * 4)
    bounds = np.linspace(0, reps, nchunks + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [
            ex.submit(worker, static_args, int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        parts = [f.result() for f in futs]
    return tuple(
        np.concatenate([p[i] for p in parts], axis=0) for i in range(len(parts[0]))
    )
