"""Escape probabilities, equilibrium measures, and capacities on windows.

The window chain (interior steps plus per-arrival boundary survival ``p``)
is reversible for the vertex measure ``m`` that equals ``mu`` in the
interior and ``mu/p`` at returning boundary vertices.  Its Dirichlet form is

    E(f) = 1/2 sum a[x,y] (f(x)-f(y))^2  +  sum kill[z] f(z)^2,

with ``kill[z] = mu[z] (1-p)/p`` at returning boundary vertices and an
enforced ``f = 0`` at killed ones.  Both capacity routes below are exact for
this chain: the equilibrium route sums escape fluxes, the variational route
minimizes E over functions that are 1 on the target set.  On regular-tree
windows the geometric-return boundary makes these equal to the infinite-tree
values; on Kill windows they are upper bounds that shrink with the radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError, UnsupportedOperationError
from .graph import Window
from .rng import derive_rng, run_chunked
from .walk import batch_walks

# Direct sparse solve below this many unknowns, conjugate gradient above.
DIRECT_SOLVE_LIMIT = 50_000
CG_TOL = 1e-12
CG_MAXITER = 1_000_000


@dataclass
class HarmonicSolution:
    """Per-vertex probability of escaping without ever entering the target set."""

    window: Window
    targets: np.ndarray
    values: np.ndarray

    def max_residual(self) -> float:
        """Largest violation of the defining linear relations (free vertices)."""
        w, g = self.window, self.window.graph
        h = self.values
        in_k = np.zeros(g.n, dtype=bool)
        in_k[self.targets] = True
        worst = 0.0
        for x in range(g.n):
            if in_k[x]:
                continue
            nbrs = g.neighbors(x)
            step = float(np.dot(g.edge_weights(x), h[nbrs]) / g.mu[x])
            if w.is_boundary[x]:
                p = w.return_prob[x]
                expected = (1.0 - p) + p * step
            else:
                expected = step
            worst = max(worst, abs(h[x] - expected))
        return worst


@dataclass
class EquilibriumMeasure:
    """Escape mass per target vertex; the masses sum to the capacity."""

    window: Window
    support: np.ndarray
    mass: np.ndarray

    def total(self) -> float:
        return float(self.mass.sum())


def _check_targets(window: Window, targets) -> np.ndarray:
    k = np.asarray(sorted(set(int(v) for v in targets)), dtype=np.int64)
    if len(k) == 0:
        raise ValueError("target set must be non-empty")
    if k[0] < 0 or k[-1] >= window.graph.n:
        raise ValueError("target set contains out-of-range vertices")
    return k


def _solve_spd(diag, rows, cols, vals, rhs):
    """Solve (diag - adjacency) x = rhs for the window form restricted to free vertices."""
    nf = len(diag)
    mat = sp.coo_matrix((np.concatenate([diag, -np.asarray(vals)]),
                         (np.concatenate([np.arange(nf), rows]),
                          np.concatenate([np.arange(nf), cols]))),
                        shape=(nf, nf)).tocsr()
    if nf <= DIRECT_SOLVE_LIMIT:
        x = spla.spsolve(mat.tocsc(), rhs)
    else:
        x, info = spla.cg(mat, rhs, rtol=CG_TOL, atol=0.0, maxiter=CG_MAXITER)
        if info != 0:
            raise SolverError(f"conjugate gradient did not converge (info={info})")
    resid = np.abs(mat @ x - rhs).max() if nf else 0.0
    scale = max(1.0, np.abs(rhs).max() if nf else 0.0)
    if not np.isfinite(x).all() or resid > 1e-8 * scale:
        raise SolverError(f"linear solve residual too large ({resid:.3g})")
    return x


def _window_system(window: Window, k: np.ndarray):
    """Classify vertices and assemble the free-free part of the window form.

    Free vertices are those neither in the target set nor on the killed
    boundary; the matrix is diag(m) - A restricted to them, which is
    symmetric positive definite whenever the window has any escape route.
    """
    g = window.graph
    n = g.n
    in_k = np.zeros(n, dtype=bool)
    in_k[k] = True
    killed = window.is_boundary & (window.return_prob == 0.0)
    free = ~(in_k | killed)
    fidx = np.nonzero(free)[0]
    fpos = np.full(n, -1, dtype=np.int64)
    fpos[fidx] = np.arange(len(fidx))

    mass = window.reversible_mass()
    rows, cols, vals = [], [], []
    src = np.repeat(np.arange(n), np.diff(g.indptr))
    keep = free[src] & free[g.nbr]
    rows = fpos[src[keep]]
    cols = fpos[g.nbr[keep]]
    vals = g.wts[keep]
    return in_k, killed, free, fidx, fpos, mass, (rows, cols, vals)


def escape_probability(window: Window, targets) -> HarmonicSolution:
    """Probability, per vertex, of never entering ``targets`` before escaping.

    Solves the window-chain harmonic system: zero on the target set, one at
    killed boundary vertices (arrival there escapes immediately), and the
    arrival-survival closure at returning boundary vertices.  On Kill
    windows the values upper-bound the infinite-graph escape probabilities.
    """
    k = _check_targets(window, targets)
    g = window.graph
    in_k, killed, free, fidx, fpos, mass, (rows, cols, vals) = _window_system(window, k)

    # RHS: killing mass at returning-boundary rows plus flux into killed
    # boundary vertices, where h is identically 1.
    rhs = np.zeros(len(fidx))
    kill = window.killing_mass()
    for j, x in enumerate(fidx):
        if window.is_boundary[x]:
            rhs[j] += kill[x]
        nbrs = g.neighbors(x)
        wts = g.edge_weights(x)
        dead = killed[nbrs]
        if dead.any():
            rhs[j] += float(wts[dead].sum())

    h = np.zeros(g.n)
    h[killed & ~in_k] = 1.0
    if len(fidx):
        h[fidx] = _solve_spd(mass[fidx], rows, cols, vals, rhs)
    h[k] = 0.0
    return HarmonicSolution(window, k, np.clip(h, 0.0, 1.0))


def equilibrium_measure(window: Window, targets) -> EquilibriumMeasure:
    """Escape mass of each target vertex under the restarted walk.

    The restarted walk makes one forced move from ``x`` (with the boundary
    arrival check applied first if ``x`` sits on the boundary) and must then
    avoid the target set forever.  The mass is the reversible vertex measure
    times that probability, i.e. the total conductance-weighted flux
    ``sum_y a[x,y] h(y)`` plus the direct killing term at returning boundary
    vertices.
    """
    k = _check_targets(window, targets)
    killed_in_k = window.is_boundary[k] & (window.return_prob[k] == 0.0)
    if killed_in_k.any():
        raise UnsupportedOperationError(
            "equilibrium mass at a killed boundary vertex is not defined; "
            "keep target sets inside the interior of Kill windows"
        )
    h = escape_probability(window, k).values
    g = window.graph
    kill = window.killing_mass()
    mass = np.empty(len(k))
    for j, x in enumerate(k):
        mass[j] = float(np.dot(g.edge_weights(x), h[g.neighbors(x)]))
        if window.is_boundary[x]:
            mass[j] += kill[x]
    return EquilibriumMeasure(window, k, np.maximum(mass, 0.0))


def capacity(window: Window, targets) -> float:
    """Total equilibrium mass of the target set (escape-flux route)."""
    return equilibrium_measure(window, targets).total()


def dirichlet_energy(window: Window, f: np.ndarray) -> float:
    """Window Dirichlet energy of ``f``: edge part plus boundary killing part.

    ``f`` must vanish on killed boundary vertices (their killing mass is
    infinite).
    """
    g = window.graph
    src = np.repeat(np.arange(g.n), np.diff(g.indptr))
    edge_part = 0.5 * float(np.dot(g.wts, (f[src] - f[g.nbr]) ** 2))
    kill = window.killing_mass()
    finite = np.isfinite(kill) & (kill > 0.0)
    if (~np.isfinite(kill) & (f != 0.0)).any():
        raise ValueError("f must vanish on killed boundary vertices")
    return edge_part + float(np.dot(kill[finite], f[finite] ** 2))


def capacity_variational(window: Window, targets) -> float:
    """Capacity as the minimal Dirichlet energy over functions 1 on the target set.

    Independent oracle for :func:`capacity`: solves for the harmonic
    extension (1 on the set, 0 at killed boundary vertices) and evaluates
    its energy.
    """
    k = _check_targets(window, targets)
    killed_in_k = window.is_boundary[k] & (window.return_prob[k] == 0.0)
    if killed_in_k.any():
        raise UnsupportedOperationError(
            "cannot constrain a killed boundary vertex to 1; "
            "keep target sets inside the interior of Kill windows"
        )
    g = window.graph
    in_k, killed, free, fidx, fpos, mass, (rows, cols, vals) = _window_system(window, k)

    rhs = np.zeros(len(fidx))
    for j, x in enumerate(fidx):
        nbrs = g.neighbors(x)
        wts = g.edge_weights(x)
        on_k = in_k[nbrs]
        if on_k.any():
            rhs[j] = float(wts[on_k].sum())

    f = np.zeros(g.n)
    f[k] = 1.0
    if len(fidx):
        f[fidx] = _solve_spd(mass[fidx], rows, cols, vals, rhs)
    return dirichlet_energy(window, f)


def escape_probability_mc(window: Window, targets, x: int, trials: int, seed: int, threads: int = 1):
    """Monte Carlo oracle for the restarted never-hit probability at ``x``.

    Returns (estimate, standard error): the fraction of restarted walks from
    ``x`` that escape without entering the target set.
    """
    k = _check_targets(window, targets)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    hit_mask = np.zeros(window.graph.n, dtype=bool)
    hit_mask[k] = True

    def worker(idx, n, rng):
        starts = np.full(n, int(x), dtype=np.int64)
        out = batch_walks(window, starts, rng, hit_mask=hit_mask, skip_start_hit=True)
        return int((out == 0).sum())

    escapes = sum(run_chunked(trials, worker, seed, threads=threads))
    p = escapes / trials
    return p, float(np.sqrt(p * (1.0 - p) / trials))


def capacity_mc(window: Window, targets, trials: int, seed: int, threads: int = 1):
    """Monte Carlo capacity: reversible mass times estimated escape probability,
    summed over the target set.  ``trials`` walks are spent per vertex.

    Returns (estimate, standard error).
    """
    k = _check_targets(window, targets)
    killed_in_k = window.is_boundary[k] & (window.return_prob[k] == 0.0)
    if killed_in_k.any():
        raise UnsupportedOperationError("target set touches the killed boundary")
    mass = window.reversible_mass()
    total, var = 0.0, 0.0
    for j, x in enumerate(k):
        p, se = escape_probability_mc(window, k, int(x), trials, seed + 7919 * j, threads=threads)
        total += mass[x] * p
        var += (mass[x] * se) ** 2
    return total, float(np.sqrt(var))


def capacity_lower_bound(kappa_bar: float, mu_a: float) -> float:
    """Linear capacity lower bound ``mu(A)/kappa`` from the Dirichlet inequality."""
    if not kappa_bar > 0.0:
        raise ValueError("kappa_bar must be positive")
    if mu_a < 0.0:
        raise ValueError("mu_a must be non-negative")
    return mu_a / kappa_bar


def calibrate_kappa(window: Window, n_functions: int = 200, seed: int = 0) -> float:
    """Numerical Dirichlet constant: max of ||f||^2_m / E(f) over random test functions.

    The family mixes geometric radial profiles around random centers (their
    decay rates sweep past the extremal profile on trees) with random sparse
    functions, all supported on the interior.  The returned value is what
    the capacity lower bound is checked against; no closed-form constant is
    assumed.
    """
    if not window.has_escape():
        raise UnsupportedOperationError("kappa calibration needs a window with escape")
    g = window.graph
    rng = derive_rng(seed, 97)
    mass = window.reversible_mass()
    interior = window.interior

    # BFS distances from a center, restricted to the window.
    from collections import deque

    def distances(center: int) -> np.ndarray:
        dist = np.full(g.n, -1, dtype=np.int64)
        dist[center] = 0
        dq = deque([center])
        while dq:
            v = dq.popleft()
            for y in g.neighbors(v):
                if dist[y] < 0:
                    dist[y] = dist[v] + 1
                    dq.append(int(y))
        return dist

    best = 0.0
    for i in range(n_functions):
        f = np.zeros(g.n)
        if i % 2 == 0:
            center = int(rng.choice(interior))
            rho = rng.uniform(0.3, 0.95)
            cut = int(rng.integers(1, 50))
            dist = distances(center)
            ok = (dist >= 0) & (dist <= cut)
            f[ok] = rho ** dist[ok]
        else:
            size = int(rng.integers(1, max(2, len(interior) // 2)))
            sub = rng.choice(interior, size=size, replace=False)
            f[sub] = rng.uniform(0.1, 1.0, size=size)
        f[window.boundary] = 0.0
        energy = dirichlet_energy(window, f)
        if energy <= 0.0:
            continue
        norm2 = float(np.dot(mass, f**2))
        best = max(best, norm2 / energy)
    if best <= 0.0:
        raise SolverError("kappa calibration produced no usable test function")
    return best
