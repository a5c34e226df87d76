"""Weighted graphs, finite observation windows, and canonical builders.

A graph carries symmetric positive conductances ``a[x,y]`` on its edges; the
induced walk moves from ``x`` to ``y`` with probability ``a[x,y] / mu[x]``
where ``mu[x]`` is the total conductance at ``x``.  Infinite transient graphs
are represented by a finite :class:`Window`: an interior where everything is
observed, plus a boundary layer where exits happen.  The boundary model is
either ``Kill`` (a walk arriving at a boundary vertex escapes immediately) or
``GeometricReturn(p)`` (a walk arriving at a boundary vertex escapes with
probability ``1 - p`` and otherwise continues from that vertex).

For balls of the d-regular tree, ``GeometricReturn(1/(d-1))`` reproduces the
infinite-tree walk exactly as seen from the window: a walk that steps beyond
the boundary must re-cross its exit vertex to come back, and does so with
probability ``1/(d-1)``.  Kill windows are biased surrogates; quantities
computed on them bound the infinite-graph values and should be compared
across two radii (see the ``--radius-check`` CLI flag).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConflictingEdgeError,
    DisconnectedGraphError,
    GraphValidationError,
    InvalidVertexError,
    MalformedLineError,
    NonpositiveWeightError,
    UnknownDirectiveError,
)

VertexId = int

# Relative tolerance for conductance bookkeeping checks.
WEIGHT_RTOL = 1e-12


class WeightedGraph:
    """Immutable undirected graph with positive symmetric edge weights.

    Adjacency is stored as sorted neighbor lists with parallel weight arrays
    plus per-vertex cumulative transition tables, so single steps sample in
    O(log deg) and vectorized kernels can gather padded rows.
    """

    def __init__(self, n: int, edges: dict[tuple[int, int], float]):
        if n <= 0:
            raise GraphValidationError("vertex count must be positive")
        adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for (i, j), w in edges.items():
            if not (0 <= i < n and 0 <= j < n):
                raise InvalidVertexError(f"edge ({i},{j}) outside vertex range 0..{n - 1}")
            if i == j:
                raise GraphValidationError(f"self-loop at vertex {i}")
            if not (math.isfinite(w) and w > 0.0):
                raise NonpositiveWeightError(f"edge ({i},{j}) has non-positive weight {w}")
            adj[i].append((j, w))
            adj[j].append((i, w))

        self.n = n
        indptr = np.zeros(n + 1, dtype=np.int64)
        for x in range(n):
            adj[x].sort()
            indptr[x + 1] = indptr[x] + len(adj[x])
        m2 = int(indptr[-1])
        self.indptr = indptr
        self.nbr = np.empty(m2, dtype=np.int32)
        self.wts = np.empty(m2, dtype=np.float64)
        for x in range(n):
            lo = indptr[x]
            for k, (y, w) in enumerate(adj[x]):
                self.nbr[lo + k] = y
                self.wts[lo + k] = w
        self.mu = np.zeros(n, dtype=np.float64)
        np.add.at(self.mu, np.repeat(np.arange(n), np.diff(indptr)), self.wts)
        self._edges = dict(edges)

        # Padded per-vertex tables for vectorized transition sampling.  The
        # cumulative row ends exactly at 1.0; padding is +inf so it is never
        # selected.
        deg = np.diff(indptr).astype(np.int64)
        self.degree = deg
        self.max_deg = int(deg.max()) if n else 0
        self.nbr_pad = np.zeros((n, self.max_deg), dtype=np.int32)
        self.cum_pad = np.full((n, self.max_deg), np.inf, dtype=np.float64)
        for x in range(n):
            lo, hi = indptr[x], indptr[x + 1]
            if hi == lo:
                continue
            row = np.cumsum(self.wts[lo:hi])
            row /= row[-1]
            row[-1] = 1.0
            self.cum_pad[x, : hi - lo] = row
            self.nbr_pad[x, : hi - lo] = self.nbr[lo:hi]

    # -- basic queries ----------------------------------------------------

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    def edges(self):
        """Iterate over (i, j, w) with i < j."""
        for (i, j), w in self._edges.items():
            yield i, j, w

    def neighbors(self, x: VertexId) -> np.ndarray:
        return self.nbr[self.indptr[x] : self.indptr[x + 1]]

    def edge_weights(self, x: VertexId) -> np.ndarray:
        return self.wts[self.indptr[x] : self.indptr[x + 1]]

    def is_connected(self) -> bool:
        seen = np.zeros(self.n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            x = queue.popleft()
            for y in self.neighbors(x):
                if not seen[y]:
                    seen[y] = True
                    queue.append(int(y))
        return bool(seen.all())

    def validate(self) -> None:
        """Check the structural invariants (symmetry and mu bookkeeping)."""
        recomputed = np.zeros(self.n)
        for i, j, w in self.edges():
            recomputed[i] += w
            recomputed[j] += w
        if not np.allclose(recomputed, self.mu, rtol=WEIGHT_RTOL, atol=0.0):
            raise GraphValidationError("stored mu differs from recomputed edge sums")
        if not self.is_connected():
            raise DisconnectedGraphError("graph is not connected")


def transition_distribution(g: WeightedGraph, x: VertexId) -> list[tuple[VertexId, float]]:
    """One-step transition law from ``x``: neighbor y with probability a[x,y]/mu[x]."""
    if not (0 <= x < g.n):
        raise InvalidVertexError(f"vertex {x} out of range")
    mu = g.mu[x]
    if mu == 0.0:
        return []
    return [(int(y), float(w / mu)) for y, w in zip(g.neighbors(x), g.edge_weights(x))]


# -- windows ---------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryModel:
    """How walks behave at boundary vertices.

    ``kind`` is "kill" or "geometric_return"; ``return_prob`` maps each
    boundary vertex to its continue probability (empty for kill).
    """

    kind: str
    return_prob: dict[int, float] = field(default_factory=dict)

    @staticmethod
    def kill() -> "BoundaryModel":
        return BoundaryModel("kill")

    @staticmethod
    def geometric_return(probs: dict[int, float]) -> "BoundaryModel":
        for v, p in probs.items():
            if not (0.0 <= p < 1.0):
                raise GraphValidationError(f"return probability {p} at vertex {v} outside [0,1)")
        return BoundaryModel("geometric_return", dict(probs))


class Window:
    """A finite observation region: interior + absorbing/returning boundary."""

    def __init__(self, graph: WeightedGraph, interior, boundary, model: BoundaryModel, meta=None):
        self.graph = graph
        self.interior = np.asarray(sorted(int(v) for v in interior), dtype=np.int64)
        self.boundary = np.asarray(sorted(int(v) for v in boundary), dtype=np.int64)
        self.model = model
        self.meta = dict(meta or {})

        n = graph.n
        if len(self.interior) + len(self.boundary) != n:
            raise GraphValidationError("interior and boundary must cover all vertices")
        self.is_boundary = np.zeros(n, dtype=bool)
        self.is_boundary[self.boundary] = True
        if self.is_boundary[self.interior].any():
            raise GraphValidationError("interior and boundary overlap")

        self.return_prob = np.zeros(n, dtype=np.float64)
        if model.kind == "geometric_return":
            for v, p in model.return_prob.items():
                if not self.is_boundary[v]:
                    raise GraphValidationError(f"return probability given for non-boundary vertex {v}")
                self.return_prob[v] = p
        elif model.kind != "kill":
            raise GraphValidationError(f"unknown boundary model {model.kind!r}")

        # Dense position of each vertex within the interior list (-1 off it).
        self.interior_pos = np.full(n, -1, dtype=np.int64)
        self.interior_pos[self.interior] = np.arange(len(self.interior))

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    def has_escape(self) -> bool:
        return len(self.boundary) > 0

    def frontier(self) -> np.ndarray:
        """Interior vertices adjacent to the boundary."""
        out = [int(v) for v in self.interior if self.is_boundary[self.graph.neighbors(v)].any()]
        return np.asarray(out, dtype=np.int64)

    def reversible_mass(self) -> np.ndarray:
        """Vertex measure making the window chain reversible.

        Interior vertices carry ``mu``.  A GeometricReturn boundary vertex
        carries ``mu/p``: the killed window chain with per-arrival survival
        ``p`` is reversible for that measure, and for exact tree windows the
        resulting equilibrium masses match the infinite graph.  Kill boundary
        vertices keep ``mu`` (they only ever absorb).
        """
        m = self.graph.mu.copy()
        on = self.is_boundary & (self.return_prob > 0.0)
        m[on] = m[on] / self.return_prob[on]
        return m

    def killing_mass(self) -> np.ndarray:
        """Per-vertex killing term of the window Dirichlet form.

        Equals ``mu (1-p)/p`` at GeometricReturn boundary vertices, +inf at
        Kill boundary vertices (enforced as a zero boundary condition), and 0
        in the interior.
        """
        k = np.zeros(self.graph.n, dtype=np.float64)
        for v in self.boundary:
            p = self.return_prob[v]
            k[v] = np.inf if p == 0.0 else self.graph.mu[v] * (1.0 - p) / p
        return k


def make_window(graph: WeightedGraph, boundary_probs: dict[int, float | None], meta=None) -> Window:
    """Wrap a graph in a window.  ``boundary_probs[v] = None`` means Kill at v."""
    boundary = sorted(boundary_probs)
    probs = {v: p for v, p in boundary_probs.items() if p is not None}
    if probs:
        model = BoundaryModel.geometric_return(probs)
    else:
        model = BoundaryModel.kill()
    interior = [v for v in range(graph.n) if v not in boundary_probs]
    return Window(graph, interior, boundary, model, meta)


# -- canonical builders ----------------------------------------------------


def build_regular_tree(d: int, radius: int, edge_weight: float) -> Window:
    """Ball of the d-regular tree; exact GeometricReturn boundary.

    The root has index 0, vertices are indexed ring by ring, every edge has
    weight ``edge_weight``, and each distance-``radius`` vertex returns with
    probability ``1/(d-1)``.
    """
    if int(d) != d or d < 3:
        raise ValueError("degree d must be an integer >= 3")
    if int(radius) != radius or radius < 1:
        raise ValueError("radius must be an integer >= 1")
    if not (math.isfinite(edge_weight) and edge_weight > 0.0):
        raise ValueError("edge_weight must be positive and finite")
    d, radius = int(d), int(radius)

    edges: dict[tuple[int, int], float] = {}
    rings = [[0]]
    next_id = 1
    for r in range(1, radius + 1):
        ring = []
        for parent in rings[r - 1]:
            n_children = d if r == 1 else d - 1
            for _ in range(n_children):
                edges[(parent, next_id)] = edge_weight
                ring.append(next_id)
                next_id += 1
        rings.append(ring)

    g = WeightedGraph(next_id, edges)
    p = 1.0 / (d - 1)
    boundary = rings[radius]
    model = BoundaryModel.geometric_return({v: p for v in boundary})
    interior = [v for ring in rings[:radius] for v in ring]
    meta = {
        "family": "regular_tree",
        "d": d,
        "radius": radius,
        "edge_weight": edge_weight,
        "root": 0,
        "ring_sizes": [len(r) for r in rings],
    }
    return Window(g, interior, boundary, model, meta)


def build_lattice_ball(dim: int, radius: int) -> Window:
    """Sup-norm ball of the hypercubic lattice, weights 1/(2 dim), Kill boundary.

    Only ``dim >= 3`` is accepted: one- and two-dimensional surrogates are
    recurrent and have no meaningful escape probabilities.
    """
    if int(dim) != dim or dim < 3:
        raise ValueError("lattice dimension must be an integer >= 3 (transience)")
    if int(radius) != radius or radius < 1:
        raise ValueError("radius must be an integer >= 1")
    dim, radius = int(dim), int(radius)

    side = 2 * radius + 1
    coords = np.stack(np.meshgrid(*[np.arange(-radius, radius + 1)] * dim, indexing="ij"), axis=-1)
    coords = coords.reshape(-1, dim)

    def index(pt) -> int:
        idx = 0
        for c in pt:
            idx = idx * side + (int(c) + radius)
        return idx

    w = 1.0 / (2 * dim)
    edges: dict[tuple[int, int], float] = {}
    for pt in coords:
        i = index(pt)
        for axis in range(dim):
            if pt[axis] + 1 <= radius:
                q = pt.copy()
                q[axis] += 1
                edges[(min(i, index(q)), max(i, index(q)))] = w

    n = side**dim
    g = WeightedGraph(n, edges)
    sup = np.abs(coords).max(axis=1)
    boundary = [index(pt) for pt, s in zip(coords, sup) if s == radius]
    interior = [index(pt) for pt, s in zip(coords, sup) if s < radius]
    meta = {"family": "lattice", "dim": dim, "radius": radius, "root": index(np.zeros(dim, dtype=int))}
    return Window(g, interior, boundary, BoundaryModel.kill(), meta)


def build_product_with_line(base: WeightedGraph, half_height: int) -> WeightedGraph:
    """Product of ``base`` with the integer segment {-H..H}, unit vertical weights.

    Horizontal edges copy the base weights on every level; vertical edges get
    the canonical weight 1.  Vertex (x, j) has index ``x + n_base * (j + H)``.
    """
    if int(half_height) != half_height or half_height < 1:
        raise ValueError("half_height must be an integer >= 1")
    if not base.is_connected():
        raise GraphValidationError("base graph must be connected")
    H = int(half_height)
    nb = base.n
    levels = 2 * H + 1

    edges: dict[tuple[int, int], float] = {}
    for lvl in range(levels):
        off = nb * lvl
        for i, j, w in base.edges():
            edges[(off + i, off + j)] = w
        if lvl + 1 < levels:
            for x in range(nb):
                edges[(off + x, off + nb + x)] = 1.0
    return WeightedGraph(nb * levels, edges)


def product_window(base: Window, half_height: int) -> Window:
    """Window for ``base x segment``: Kill at base-boundary columns and extreme levels."""
    g = build_product_with_line(base.graph, half_height)
    H = int(half_height)
    nb = base.graph.n
    boundary = set()
    for lvl in range(2 * H + 1):
        off = nb * lvl
        if lvl == 0 or lvl == 2 * H:
            boundary.update(off + x for x in range(nb))
        else:
            boundary.update(off + int(v) for v in base.boundary)
    interior = [v for v in range(g.n) if v not in boundary]
    meta = {
        "family": "product",
        "half_height": H,
        "base_n": nb,
        "root": int(base.meta.get("root", 0)) + nb * H,
    }
    return Window(g, interior, sorted(boundary), BoundaryModel.kill(), meta)


def build_halfline_graph(n_max: int = 40) -> Window:
    """Half-line {0..n_max} with a chord {0,3} and exponentially growing weights.

    Edge {n, n+1} carries weight e^n for n >= 3 and weight 1 otherwise; the
    chord {0,3} has weight 1.  The strong rightward drift makes the infinite
    chain transient; the window truncates at ``n_max`` with a Kill boundary.
    Transition probabilities on the right tail are scale-free ratios such as
    e/(1+e), so the growing weights cost no precision.
    """
    if int(n_max) != n_max or n_max < 5:
        raise ValueError("n_max must be an integer >= 5")
    n_max = int(n_max)
    if n_max > 700:
        raise ValueError("n_max above 700 overflows double-precision weights")
    edges: dict[tuple[int, int], float] = {(0, 3): 1.0}
    for k in range(n_max):
        edges[(k, k + 1)] = math.exp(k) if k >= 3 else 1.0
    g = WeightedGraph(n_max + 1, edges)
    meta = {"family": "halfline", "n_max": n_max, "root": 0}
    return Window(g, range(n_max), [n_max], BoundaryModel.kill(), meta)


# -- text format -----------------------------------------------------------


def load_graph(text: str) -> Window:
    """Parse the edge-list window format.

    Layout (UTF-8 text, ``#`` comments and blank lines ignored)::

        vertices N
        edge i j w        # 0 <= i,j < N, i != j, w > 0
        boundary i [p]    # boundary vertex; omitted p means Kill

    Unknown directives, malformed lines, conflicting duplicate edges,
    non-positive weights, and disconnected graphs are all distinct errors.
    """
    n = None
    edges: dict[tuple[int, int], float] = {}
    boundary_probs: dict[int, float | None] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        directive = tokens[0]
        if directive == "vertices":
            if n is not None:
                raise MalformedLineError(f"line {lineno}: repeated vertices header")
            if len(tokens) != 2:
                raise MalformedLineError(f"line {lineno}: expected 'vertices N'")
            try:
                n = int(tokens[1])
            except ValueError as exc:
                raise MalformedLineError(f"line {lineno}: bad vertex count {tokens[1]!r}") from exc
            if n <= 0:
                raise MalformedLineError(f"line {lineno}: vertex count must be positive")
        elif directive == "edge":
            if n is None:
                raise MalformedLineError(f"line {lineno}: edge before vertices header")
            if len(tokens) != 4:
                raise MalformedLineError(f"line {lineno}: expected 'edge i j w'")
            try:
                i, j, w = int(tokens[1]), int(tokens[2]), float(tokens[3])
            except ValueError as exc:
                raise MalformedLineError(f"line {lineno}: bad edge fields") from exc
            if not (0 <= i < n and 0 <= j < n):
                raise InvalidVertexError(f"line {lineno}: edge endpoint outside 0..{n - 1}")
            if i == j:
                raise MalformedLineError(f"line {lineno}: self-loop at {i}")
            if not (math.isfinite(w) and w > 0.0):
                raise NonpositiveWeightError(f"line {lineno}: weight must be positive, got {tokens[3]}")
            key = (min(i, j), max(i, j))
            if key in edges and edges[key] != w:
                raise ConflictingEdgeError(f"line {lineno}: edge {key} repeated with conflicting weight")
            edges[key] = w
        elif directive == "boundary":
            if n is None:
                raise MalformedLineError(f"line {lineno}: boundary before vertices header")
            if len(tokens) not in (2, 3):
                raise MalformedLineError(f"line {lineno}: expected 'boundary i [p]'")
            try:
                v = int(tokens[1])
                p = float(tokens[2]) if len(tokens) == 3 else None
            except ValueError as exc:
                raise MalformedLineError(f"line {lineno}: bad boundary fields") from exc
            if not (0 <= v < n):
                raise InvalidVertexError(f"line {lineno}: boundary vertex outside 0..{n - 1}")
            if p is not None and not (0.0 <= p < 1.0):
                raise MalformedLineError(f"line {lineno}: return probability must lie in [0,1)")
            boundary_probs[v] = p
        else:
            raise UnknownDirectiveError(f"line {lineno}: unknown directive {directive!r}")

    if n is None:
        raise MalformedLineError("missing 'vertices N' header")
    g = WeightedGraph(n, edges)
    if not g.is_connected():
        raise DisconnectedGraphError("graph is not connected")
    probs = {v: p for v, p in boundary_probs.items() if p is not None}
    model = BoundaryModel.geometric_return(probs) if probs else BoundaryModel.kill()
    interior = [v for v in range(n) if v not in boundary_probs]
    return Window(g, interior, sorted(boundary_probs), model, {"family": "file"})
