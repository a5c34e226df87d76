"""Seed-stream derivation for reproducible serial and parallel Monte Carlo.

Every logical unit of work (a trial, or a fixed-size chunk of trials) draws
from its own generator derived as ``derive_rng(seed, *key)``.  Streams depend
only on ``(seed, key)``, never on scheduling, so serial and threaded runs
aggregate identically.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

# Trials per vectorized chunk.  Fixed so that chunk boundaries (and hence the
# random streams) do not depend on the thread count.
CHUNK_TRIALS = 512


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Return a generator for the stream identified by (seed, key)."""
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


def subseed(seed: int, *key: int) -> int:
    """Deterministic derived integer seed for a nested estimator call."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def chunk_sizes(total: int, chunk: int = CHUNK_TRIALS) -> list[int]:
    """Split ``total`` trials into fixed-size chunks (last one short)."""
    if total < 0:
        raise ValueError("trial count must be non-negative")
    out = [chunk] * (total // chunk)
    if total % chunk:
        out.append(total % chunk)
    return out


def run_chunked(total_trials, worker, seed, threads=1, chunk=CHUNK_TRIALS, key_prefix=()):
    """Run ``worker(chunk_index, n_trials, rng)`` over all chunks.

    Results are returned in chunk order regardless of ``threads``; any
    associative reduction over them is therefore order-independent.
    """
    sizes = chunk_sizes(total_trials, chunk)
    jobs = [(i, n, derive_rng(seed, *key_prefix, i)) for i, n in enumerate(sizes)]
    if threads <= 1 or len(jobs) <= 1:
        return [worker(i, n, rng) for i, n, rng in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(worker, i, n, rng) for i, n, rng in jobs]
        return [f.result() for f in futures]
