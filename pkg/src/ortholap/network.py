"""Weighted primal/dual networks, the discrete Laplacian, Dirichlet solves,
harmonic conjugates and discrete-holomorphy diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import cg, splu

from .errors import (
    FormatError,
    InconsistentIntegration,
    InvalidMap,
    NonConvergence,
    NotAPath,
    NotHarmonic,
    SideMismatch,
)
from .odmap import validate

DIRECT_LIMIT = 4000
CONJ_HARMONIC_TOL = 1e-8
CONJ_CONSISTENCY_TOL = 1e-7


def _side(side):
    s = {"primal": "primal", "p": "primal", "dual": "dual", "d": "dual"}.get(side)
    if s is None:
        raise ValueError(f"side must be 'primal' or 'dual', not {side!r}")
    return s


class WeightedNetwork:
    """One side (primal or dual) of an orthodiagonal map as a conductance network.

    Vertices are numbered locally ``0..n-1``; ``ids[k]`` is the map id of local
    vertex ``k``. Edge ``j`` joins ``edges[j]`` with conductance
    ``conductance[j]`` and comes from quad ``quad_id[j]`` (so ``j == quad_id[j]``).
    """

    def __init__(self, m, side):
        self.map = m
        self.side = _side(side)
        primal = self.side == "primal"
        self.ids = m.primal_ids if primal else m.dual_ids
        local = np.full(m.n_vertices, -1, dtype=np.int64)
        local[self.ids] = np.arange(len(self.ids))
        self.local_of = local
        cols = [0, 2] if primal else [1, 3]
        self.edges = local[m.quads[:, cols]]
        self.conductance = np.array(m.conductance_primal if primal else m.conductance_dual)
        self.quad_id = np.arange(m.n_quads)
        self.positions = m.positions[self.ids]
        self.is_boundary = np.array(m.is_boundary[self.ids])

    @property
    def n(self):
        return len(self.ids)

    @cached_property
    def weights(self):
        """Symmetric CSR conductance matrix (parallel edges summed)."""
        a, b = self.edges[:, 0], self.edges[:, 1]
        w = sp.coo_matrix(
            (np.concatenate([self.conductance, self.conductance]),
             (np.concatenate([a, b]), np.concatenate([b, a]))),
            shape=(self.n, self.n),
        ).tocsr()
        w.sum_duplicates()
        w.sort_indices()
        return w

    @cached_property
    def pi(self):
        return np.asarray(self.weights.sum(axis=1)).ravel()

    @cached_property
    def interior(self):
        return np.flatnonzero(~self.is_boundary)

    @cached_property
    def boundary(self):
        return np.flatnonzero(self.is_boundary)

    def local(self, vid):
        k = int(self.local_of[vid])
        if k < 0:
            raise KeyError(f"vertex {vid} is not on the {self.side} side")
        return k

    def __repr__(self):
        return f"WeightedNetwork(side={self.side}, n={self.n}, edges={len(self.edges)})"


def build_network(m, side="primal", check=True):
    """Build the primal or dual conductance network of ``m``.

    With ``check`` the map is validated first and :class:`InvalidMap` raised
    on any violation.
    """
    if check:
        rep = validate(m)
        if not rep.ok:
            raise InvalidMap(f"map fails validation: {', '.join(rep.kinds())}")
    net = WeightedNetwork(m, side)
    ncomp, _ = csgraph.connected_components(net.weights, directed=False)
    if ncomp != 1:
        raise InvalidMap(f"{net.side} network has {ncomp} components")
    return net


@dataclass(frozen=True)
class DiscreteField:
    """Real values on one side of a map, in the network's local order."""

    values: np.ndarray
    side: str
    ids: np.ndarray
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != np.shape(self.ids):
            raise ValueError("values and ids must have the same length")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "side", _side(self.side))

    @property
    def sup_norm(self):
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0

    def __len__(self):
        return len(self.values)

    def on_map(self, m):
        """Values scattered to a length-N array over all map vertices (NaN elsewhere)."""
        out = np.full(m.n_vertices, np.nan)
        out[self.ids] = self.values
        return out


def sample(net, fn):
    """Field ``fn(positions)`` on the vertices of ``net``."""
    vals = np.asarray(fn(net.positions), dtype=float)
    if vals.shape == ():
        vals = np.full(net.n, float(vals))
    return DiscreteField(vals, net.side, net.ids)


@dataclass(frozen=True)
class BoundaryData:
    """Boundary function ``g`` with optional Hölder metadata.

    ``fn`` maps an ``(K, 2)`` array of points to ``(K,)`` values.
    """

    fn: object
    alpha: float | None = None
    seminorm: float | None = None
    sup: float | None = None
    name: str = "g"
    cusps: tuple = ()  # points where g is not smooth (quadrature breakpoints)

    def __post_init__(self):
        if self.alpha is not None and not (0 < self.alpha <= 1):
            raise ValueError("alpha must lie in (0, 1]")
        if self.seminorm is not None and self.seminorm < 0:
            raise ValueError("Hölder seminorm must be non-negative")

    def __call__(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vals = np.asarray(self.fn(pts), dtype=float)
        if vals.shape == ():
            vals = np.full(len(pts), float(vals))
        return vals

    @classmethod
    def constant(cls, c):
        c = float(c)
        return cls(lambda p: np.full(len(p), c), alpha=1.0, seminorm=0.0, sup=abs(c), name=f"const:{c!r}")


def laplacian_apply(net, f):
    """``Δf(x) = Σ_y c(x,y)(f(y) − f(x))`` at every vertex of ``net``, boundary included."""
    if f.side != net.side or len(f) != net.n:
        raise SideMismatch(f"field on {f.side} side ({len(f)} values) vs {net.side} network ({net.n})")
    vals = net.weights @ f.values - net.pi * f.values
    return DiscreteField(vals, net.side, net.ids)


def _reduced_system(net):
    inner, bnd = net.interior, net.boundary
    w = net.weights
    a = (sp.diags(net.pi[inner]) - w[inner][:, inner]).tocsc()
    coupling = w[inner][:, bnd].tocsr()
    return a, coupling


def solve_dirichlet(net, g, tol=1e-10, method="auto"):
    """Discrete harmonic extension of ``g`` from the boundary of ``net``.

    Below ``DIRECT_LIMIT`` interior unknowns the reduced system is factored
    directly; above it Jacobi-preconditioned CG runs with an iteration cap of
    ``20 * N``. Either way the per-vertex residual is checked against
    ``tol * π_x * ‖g|∂‖`` and :class:`NonConvergence` raised if it fails.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    inner, bnd = net.interior, net.boundary
    if len(inner) == 0 or len(bnd) == 0:
        raise ValueError("network needs at least one interior and one boundary vertex")
    gb = g(net.positions[bnd]) if callable(g) else np.asarray(g, dtype=float)[bnd]
    gnorm = float(np.max(np.abs(gb)))
    vals = np.empty(net.n)
    vals[bnd] = gb
    a, coupling = _reduced_system(net)
    rhs = coupling @ gb
    if method == "auto":
        method = "direct" if len(inner) < DIRECT_LIMIT else "cg"
    iterations = 0
    if method == "direct":
        x = splu(a).solve(rhs)
    elif method == "cg":
        count = [0]

        def bump(_):
            count[0] += 1

        dinv = 1.0 / a.diagonal()
        precond = sp.diags(dinv)
        # 2-norm target that implies the max-norm criterion below
        target = tol * float(np.min(net.pi[inner])) * gnorm * 0.5
        x, status = cg(a.tocsr(), rhs, rtol=0.0, atol=target, maxiter=20 * net.n, M=precond,
                       callback=bump)
        iterations = count[0]
    else:
        raise ValueError(f"unknown method {method!r}")
    vals[inner] = x
    resid = np.abs(a @ x - rhs)
    bound = tol * net.pi[inner] * gnorm
    worst = float(np.max(resid - bound))
    if worst > 0:
        raise NonConvergence(iterations, float(np.max(resid)))
    info = {"method": method, "iterations": iterations, "residual": float(np.max(resid)) if len(resid) else 0.0}
    return DiscreteField(vals, net.side, net.ids, info)


def dual_network_edges(m):
    """Dual edge list ``(r, s)`` in map ids with the matching primal quad data."""
    q = m.quads
    return q[:, 1], q[:, 3]


def harmonic_conjugate(m, net_primal, h, anchor, tree="bfs"):
    """Dual field ``h̃`` with ``h̃(anchor) = 0`` and, on each quad ``[u, r, v, s]``,
    ``h̃(s) − h̃(r) = c(e•)(h(v) − h(u))``.

    The sign follows the counterclockwise corner order: ``s − r = iκ(v − u)``
    with ``κ > 0``, which makes ``h = Re z`` conjugate to ``Im z``.
    Integration runs along a spanning tree (``"bfs"`` or ``"dfs"``) of the dual
    graph and every other dual edge is then checked for consistency.
    """
    if h.side != "primal" or net_primal.side != "primal":
        raise SideMismatch("harmonic_conjugate needs a primal field on the primal network")
    hnorm = h.sup_norm
    lap = laplacian_apply(net_primal, h).values
    inner = net_primal.interior
    if len(inner):
        excess = np.abs(lap[inner]) - CONJ_HARMONIC_TOL * net_primal.pi[inner] * hnorm
        if np.any(excess > 0):
            k = inner[np.argmax(excess)]
            raise NotHarmonic(f"|Δh| = {abs(lap[k]):.3g} at vertex {int(net_primal.ids[k])}")
    if m.is_primal[anchor]:
        raise ValueError("anchor must be a dual vertex")
    hmap = h.on_map(m)
    q = m.quads
    incr = m.conductance_primal * (hmap[q[:, 2]] - hmap[q[:, 0]])
    dual = WeightedNetwork(m, "dual")
    r = dual.local_of[q[:, 1]]
    s = dual.local_of[q[:, 3]]
    # signed increment matrix: D[r, s] = h̃(s) − h̃(r)
    d = sp.coo_matrix((np.concatenate([incr, -incr]), (np.concatenate([r, s]), np.concatenate([s, r]))),
                      shape=(dual.n, dual.n)).tocsr()
    root = dual.local(anchor)
    if tree == "bfs":
        order, pred = csgraph.breadth_first_order(d, root, directed=False)
    elif tree == "dfs":
        order, pred = csgraph.depth_first_order(d, root, directed=False)
    else:
        raise ValueError("tree must be 'bfs' or 'dfs'")
    if len(order) != dual.n:
        raise InconsistentIntegration("dual graph is disconnected")
    vals = np.zeros(dual.n)
    # per-vertex increment from its tree parent (parallel edges summed by CSR, so use the first quad)
    edge_of = {}
    for k, (a, b) in enumerate(zip(r.tolist(), s.tolist())):
        edge_of.setdefault((a, b), incr[k])
        edge_of.setdefault((b, a), -incr[k])
    for v in order[1:]:
        p = pred[v]
        vals[v] = vals[p] + edge_of[(p, v)]
    mismatch = np.abs(vals[s] - vals[r] - incr)
    if mismatch.size and mismatch.max() > CONJ_CONSISTENCY_TOL * max(hnorm, 1e-300):
        k = int(np.argmax(mismatch))
        raise InconsistentIntegration(f"quad {k} closes with error {mismatch[k]:.3g}")
    return DiscreteField(vals, "dual", dual.ids)


def contour_integral(m, F, contour):
    """``Σ (F(e⁻) + F(e⁺))(e⁺ − e⁻)`` along a vertex path in the quad graph.

    ``F`` is a complex array indexed by map vertex id.
    """
    path = [int(v) for v in contour]
    if len(path) < 2:
        return 0j
    nb = m.quad_graph_neighbors
    for a, b in zip(path, path[1:]):
        if a < 0 or a >= m.n_vertices or b not in nb[a]:
            raise NotAPath(f"{a} -> {b} is not a quad-graph edge")
    F = np.asarray(F, dtype=complex)
    z = m.positions[:, 0] + 1j * m.positions[:, 1]
    idx = np.array(path)
    e_minus, e_plus = idx[:-1], idx[1:]
    return complex(np.sum((F[e_minus] + F[e_plus]) * (z[e_plus] - z[e_minus])))


def quad_contour(m, k):
    """Closed counterclockwise contour around quad ``k``."""
    u, r, v, s = (int(c) for c in m.quads[k])
    return [u, r, v, s, u]


def cauchy_riemann_residual(m, F):
    """Per-quad ``|(F(v)−F(u))/(v−u) − (F(s)−F(r))/(s−r)|``."""
    F = np.asarray(F, dtype=complex)
    z = m.positions[:, 0] + 1j * m.positions[:, 1]
    u, r, v, s = m.quads.T
    return np.abs((F[v] - F[u]) / (z[v] - z[u]) - (F[s] - F[r]) / (z[s] - z[r]))


def holomorphic_pair(m, h, h_conj):
    """Complex field ``h + i·h̃`` over all map vertices (primal real, dual imaginary)."""
    out = np.zeros(m.n_vertices, dtype=complex)
    out[h.ids] = h.values
    out[h_conj.ids] = 1j * h_conj.values
    return out


# ---------------------------------------------------------------------------
# field files


def save_field(f, path):
    lines = [f"field v1 side={'p' if f.side == 'primal' else 'd'}"]
    lines += [f"{int(i)} {v:.17g}" for i, v in zip(f.ids, f.values)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_field(path):
    rows = Path(path).read_text().splitlines()
    if not rows or not rows[0].startswith("field v1 side="):
        raise FormatError("expected header 'field v1 side=<p|d>'", line=1, field="header")
    tag = rows[0].split("=", 1)[1].strip()
    if tag not in ("p", "d"):
        raise FormatError("side must be p or d", line=1, field="side")
    ids, vals = [], []
    for ln, raw in enumerate(rows[1:], start=2):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        tok = s.split()
        if len(tok) != 2:
            raise FormatError("expected '<id> <value>'", line=ln)
        try:
            ids.append(int(tok[0]))
            vals.append(float(tok[1]))
        except ValueError:
            raise FormatError("bad id or value", line=ln) from None
        if not math.isfinite(vals[-1]):
            raise FormatError("non-finite value", line=ln, field="value")
    return DiscreteField(np.array(vals), tag, np.array(ids, dtype=np.int64))
