"""Random-walk execution on windows: single trajectories and batched kernels.

Walk semantics at a boundary vertex (checked on every arrival, including a
start there): with probability ``1 - p`` the walk escapes, with probability
``p`` it continues from that vertex.  Interior steps follow the transition
law ``a[x,y]/mu[x]``.  The batched kernel advances many walks in lockstep
with numpy and is what makes 1e5-trial estimates affordable; the scalar
``run_walk`` records full trajectories and serves as its reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedOperationError, WalkBudgetError
from .graph import Window

ESCAPED = "escaped"
KILLED = "killed"
HIT = "hit"

# Hard cap on lockstep rounds; on any sensible window walks die out long
# before this, so hitting it indicates a recurrent surrogate.
MAX_ROUNDS = 1_000_000


class StopRule:
    pass


@dataclass(frozen=True)
class UntilEscape(StopRule):
    """Run until the walk escapes through the boundary."""


@dataclass(frozen=True)
class UntilHit(StopRule):
    """Run until the walk enters ``targets`` (or escapes first)."""

    targets: frozenset

    def __init__(self, targets):
        object.__setattr__(self, "targets", frozenset(int(v) for v in targets))


@dataclass(frozen=True)
class MaxSteps(StopRule):
    """Run until escape, but at most ``n`` steps; exhaustion reports KILLED."""

    n: int


@dataclass
class Trajectory:
    """Recorded trace of one walk: visited vertices plus how it ended."""

    vertices: np.ndarray
    terminal: str

    def __len__(self) -> int:
        return len(self.vertices)

    def visited(self) -> set:
        return set(int(v) for v in self.vertices)


def _step(window: Window, x: int, rng: np.random.Generator) -> int:
    g = window.graph
    r = rng.random()
    k = int(np.searchsorted(g.cum_pad[x], r, side="right"))
    return int(g.nbr_pad[x, k])


def run_walk(window: Window, start: int, rng: np.random.Generator, stop: StopRule) -> Trajectory:
    """Run one walk from ``start`` under the given stop rule.

    Bit-reproducible for a fixed generator state.  The trajectory always
    contains the start vertex; consecutive entries are graph neighbors.
    """
    g = window.graph
    if not (0 <= start < g.n):
        raise ValueError(f"start vertex {start} out of range")
    targets = stop.targets if isinstance(stop, UntilHit) else None
    max_steps = stop.n if isinstance(stop, MaxSteps) else None
    if max_steps is None and not window.has_escape() and targets is None:
        raise UnsupportedOperationError("window has no boundary: walk would never terminate")

    path = [int(start)]
    x = int(start)
    if targets is not None and x in targets:
        return Trajectory(np.asarray(path, dtype=np.int64), HIT)
    steps = 0
    while True:
        if window.is_boundary[x]:
            if rng.random() >= window.return_prob[x]:
                return Trajectory(np.asarray(path, dtype=np.int64), ESCAPED)
        x = _step(window, x, rng)
        path.append(x)
        steps += 1
        if targets is not None and x in targets:
            return Trajectory(np.asarray(path, dtype=np.int64), HIT)
        if max_steps is not None and steps >= max_steps:
            return Trajectory(np.asarray(path, dtype=np.int64), KILLED)
        if steps >= MAX_ROUNDS:
            raise WalkBudgetError(f"walk exceeded {MAX_ROUNDS} steps without terminating")


def batch_walks(
    window: Window,
    starts: np.ndarray,
    rng: np.random.Generator,
    hit_mask: np.ndarray | None = None,
    skip_start_hit: bool = False,
    occupancy: np.ndarray | None = None,
    walk_rows: np.ndarray | None = None,
    start_hist: np.ndarray | None = None,
    max_rounds: int = MAX_ROUNDS,
) -> np.ndarray:
    """Advance all walks in lockstep until each escapes or hits.

    Parameters
    ----------
    starts : start vertex per walk.
    hit_mask : optional bool mask over vertices; arriving on it ends the walk
        with outcome 1.  ``skip_start_hit`` suppresses the check at time 0,
        which realizes the strictly-positive hitting time of restarted walks.
    occupancy, walk_rows : optional visit recording; every arrival sets
        ``occupancy[walk_rows[i], vertex]``.
    start_hist : optional int64 per-vertex array accumulating start counts.

    Returns outcome codes per walk: 0 escaped, 1 hit.
    """
    g = window.graph
    if hit_mask is None and not window.has_escape():
        raise UnsupportedOperationError("window has no boundary: walks would never terminate")

    pos = np.asarray(starts, dtype=np.int64).copy()
    m = len(pos)
    outcome = np.full(m, -1, dtype=np.int8)
    active = np.arange(m, dtype=np.int64)
    if start_hist is not None:
        np.add.at(start_hist, pos, 1)
    if occupancy is not None:
        occupancy[walk_rows[active], pos] = True
    if hit_mask is not None and not skip_start_hit:
        h = hit_mask[pos]
        if h.any():
            outcome[active[h]] = 1
            active, pos = active[~h], pos[~h]

    rounds = 0
    while len(active):
        rounds += 1
        if rounds > max_rounds:
            raise WalkBudgetError(f"batch walks exceeded {max_rounds} lockstep rounds")
        b = window.is_boundary[pos]
        if b.any():
            bidx = np.nonzero(b)[0]
            u = rng.random(len(bidx))
            esc = bidx[u >= window.return_prob[pos[bidx]]]
            if len(esc):
                outcome[active[esc]] = 0
                keep = np.ones(len(pos), dtype=bool)
                keep[esc] = False
                active, pos = active[keep], pos[keep]
        if not len(active):
            break
        r = rng.random(len(pos))
        k = (g.cum_pad[pos] <= r[:, None]).sum(axis=1)
        pos = g.nbr_pad[pos, k].astype(np.int64)
        if occupancy is not None:
            occupancy[walk_rows[active], pos] = True
        if hit_mask is not None:
            h = hit_mask[pos]
            if h.any():
                outcome[active[h]] = 1
                active, pos = active[~h], pos[~h]
    return outcome


def hit_frequency(
    window: Window,
    start: int,
    targets,
    trials: int,
    seed: int,
    threads: int = 1,
) -> tuple[float, float]:
    """Fraction of walks from ``start`` that hit ``targets`` before escaping.

    Returns (estimate, standard error).  Walks starting inside ``targets``
    count as immediate hits.
    """
    from .rng import run_chunked

    hit_mask = np.zeros(window.graph.n, dtype=bool)
    hit_mask[np.asarray(list(targets), dtype=np.int64)] = True

    def worker(idx, n, rng):
        starts = np.full(n, start, dtype=np.int64)
        out = batch_walks(window, starts, rng, hit_mask=hit_mask)
        return int((out == 1).sum())

    hits = sum(run_chunked(trials, worker, seed, threads=threads))
    p = hits / trials
    return p, float(np.sqrt(p * (1.0 - p) / trials))
