"""Sampling the interlacement trace on a window and the vacant configurations.

The sampler draws the restriction of the interlacement at level ``u`` to a
sampling set ``K``: a Poisson(u * cap(K)) number of labelled walks, each
started from the normalized equilibrium measure of ``K`` and run forward
until escape, each carrying an independent uniform mark on [0, u].

Why forward halves only: decomposed at its first visit to ``K``, a
trajectory's backward half is conditioned never to return to ``K``, so it
contributes nothing to the occupancy of ``K``.  Sampling forward walks from
the entrance law therefore reproduces the exact joint law of the occupancy
bits on ``K``.  With ``K`` = interior (the default) every interior visit is
recorded; a smaller ``K`` is cheaper and still exact for bits inside ``K``.

On geometric-return tree windows the boundary model is exact, so these
samples realize the infinite-tree interlacement restricted to the window.
On Kill windows trajectories that exit and would later re-enter are
truncated; quantities computed there are biased and should be compared
across radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedOperationError
from .graph import Window
from .potential import EquilibriumMeasure, capacity, equilibrium_measure
from .rng import derive_rng, run_chunked
from .stats import bernoulli_se
from .walk import UntilEscape, Trajectory, batch_walks, run_walk


@dataclass
class InterlacementSample:
    """Walks with level marks; the trace below any level is their union."""

    window: Window
    sample_set: np.ndarray
    level: float
    trajectories: list[Trajectory]
    marks: np.ndarray

    def occupied(self) -> np.ndarray:
        """Bool mask over all window vertices covered by some trajectory."""
        occ = np.zeros(self.window.graph.n, dtype=bool)
        for t in self.trajectories:
            occ[t.vertices] = True
        return occ


@dataclass
class VacantConfiguration:
    """Per-interior-vertex vacancy bits (1 = vacant), aligned with window.interior."""

    window: Window
    level: float
    bits: np.ndarray

    def is_vacant(self, x: int) -> bool:
        pos = self.window.interior_pos[x]
        if pos < 0:
            raise ValueError(f"vertex {x} is not interior")
        return bool(self.bits[pos])


class EntranceLaw:
    """Capacity and normalized equilibrium start distribution of a sampling set."""

    def __init__(self, window: Window, sample_set):
        em: EquilibriumMeasure = equilibrium_measure(window, sample_set)
        self.window = window
        self.sample_set = em.support
        self.cap = em.total()
        keep = em.mass > 0.0
        self.support = em.support[keep]
        if self.cap > 0.0:
            cum = np.cumsum(em.mass[keep])
            cum /= cum[-1]
            cum[-1] = 1.0
            self.cum = cum
        else:
            self.cum = np.zeros(0)

    def draw_starts(self, count: int, rng: np.random.Generator) -> np.ndarray:
        r = rng.random(count)
        return self.support[np.searchsorted(self.cum, r, side="right")].astype(np.int64)


def sample_interlacement(
    window: Window,
    sample_set,
    u: float,
    seed: int,
    entrance: EntranceLaw | None = None,
) -> InterlacementSample:
    """Draw one interlacement sample at level ``u`` restricted to ``sample_set``.

    Trajectory count is Poisson(u * cap); starts follow the normalized
    equilibrium measure; walks run forward until escape; marks are i.i.d.
    uniform on [0, u], independent of the walks, so :func:`restrict_to_level`
    yields the monotone coupling across levels without resampling.
    """
    if u < 0.0:
        raise ValueError("level u must be non-negative")
    if entrance is None:
        entrance = EntranceLaw(window, sample_set)
    rng = derive_rng(seed)
    n_traj = int(rng.poisson(u * entrance.cap)) if u > 0.0 and entrance.cap > 0.0 else 0
    trajectories = []
    if n_traj:
        starts = entrance.draw_starts(n_traj, rng)
        for s in starts:
            trajectories.append(run_walk(window, int(s), rng, UntilEscape()))
    marks = rng.uniform(0.0, u, size=n_traj) if n_traj else np.zeros(0)
    return InterlacementSample(window, entrance.sample_set, float(u), trajectories, marks)


def vacant_configuration(sample: InterlacementSample) -> VacantConfiguration:
    """Vacancy bits induced by a sample: 0 exactly on trajectory-covered vertices.

    Deterministic in the sample; bits are exact in law on the sampling set
    (and on all of the interior when the sample was drawn with the full
    interior as sampling set).
    """
    occ = sample.occupied()
    bits = ~occ[sample.window.interior]
    return VacantConfiguration(sample.window, sample.level, bits)


def restrict_to_level(sample: InterlacementSample, u: float) -> InterlacementSample:
    """Keep trajectories with mark <= u; the monotone coupling across levels."""
    if not 0.0 <= u <= sample.level:
        raise ValueError("restriction level must lie in [0, sample.level]")
    keep = sample.marks <= u
    kept = [t for t, k in zip(sample.trajectories, keep) if k]
    return InterlacementSample(sample.window, sample.sample_set, float(u), kept, sample.marks[keep])


def vacancy_probability_exact(window: Window, targets, u: float) -> float:
    """Closed-form vacancy probability exp(-u * cap(K))."""
    if u < 0.0:
        raise ValueError("level u must be non-negative")
    return math.exp(-u * capacity(window, targets))


# -- vectorized occupancy engine -------------------------------------------


def sample_occupancy(
    window: Window,
    entrance: EntranceLaw,
    u: float,
    n_trials: int,
    rng: np.random.Generator,
    start_hist: np.ndarray | None = None,
):
    """Draw ``n_trials`` independent occupancy masks in one lockstep batch.

    Returns (occ, counts): a bool matrix of shape (n_trials, n_vertices) and
    the per-trial trajectory counts.
    """
    n = window.graph.n
    occ = np.zeros((n_trials, n), dtype=bool)
    lam = u * entrance.cap
    if lam <= 0.0:
        return occ, np.zeros(n_trials, dtype=np.int64)
    counts = rng.poisson(lam, size=n_trials)
    total = int(counts.sum())
    if total == 0:
        return occ, counts
    rows = np.repeat(np.arange(n_trials), counts)
    starts = entrance.draw_starts(total, rng)
    batch_walks(window, starts, rng, occupancy=occ, walk_rows=rows, start_hist=start_hist)
    return occ, counts


def vacancy_probability_mc(
    window: Window,
    targets,
    u: float,
    trials: int,
    seed: int,
    sample_set=None,
    threads: int = 1,
):
    """Monte Carlo vacancy probability of ``targets`` at level ``u``.

    Samples the interlacement with sampling set defaulting to the full
    interior (so the estimate exercises the entrance law, the walks, and the
    Poisson counts rather than the closed form) and counts the trials where
    every target vertex stays vacant.  Returns (estimate, standard error).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if u < 0.0:
        raise ValueError("level u must be non-negative")
    k = np.asarray(sorted(set(int(v) for v in targets)), dtype=np.int64)
    if len(k) == 0:
        raise ValueError("observed set must be non-empty")
    if sample_set is None:
        sample_set = window.interior
    entrance = EntranceLaw(window, sample_set)

    def worker(idx, n, rng):
        occ, _ = sample_occupancy(window, entrance, u, n, rng)
        return int((~occ[:, k].any(axis=1)).sum())

    vacant = sum(run_chunked(trials, worker, seed, threads=threads))
    p = vacant / trials
    return p, bernoulli_se(p, trials)
