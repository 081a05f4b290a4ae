"""Orthodiagonal maps: construction, validation, and the ``odmap v1`` text format.

A map stores its vertices as flat arrays (positions, primal/dual kind,
boundary flag) and its inner faces as an ``(M, 4)`` array of corner ids in
counterclockwise order ``[u, r, v, s]`` with ``u, v`` primal. Everything else
(diagonal lengths, Duffin conductances, adjacency, the boundary cycle) is
derived and cached.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DomainTooSmall, FormatError, MeshTooCoarse, SpacingNonMonotone

ORTHO_RTOL = 1e-9
AREA_RTOL = 1e-9
RECIPROCITY_TOL = 1e-12


# ---------------------------------------------------------------------------
# continuous domains


@dataclass(frozen=True)
class Disk:
    cx: float = 0.0
    cy: float = 0.0
    r: float = 1.0

    @property
    def center(self):
        return np.array([self.cx, self.cy])

    @property
    def diam(self):
        return 2.0 * self.r

    @property
    def bbox(self):
        return (self.cx - self.r, self.cy - self.r, self.cx + self.r, self.cy + self.r)

    def distance_to_boundary(self, pts):
        """Signed distance to the circle, positive inside."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.r - np.hypot(pts[:, 0] - self.cx, pts[:, 1] - self.cy)

    def contains(self, pts, slack=0.0):
        return self.distance_to_boundary(pts) >= -slack

    def describe(self):
        return f"disk:{self.cx!r},{self.cy!r},{self.r!r}"


@dataclass(frozen=True)
class Rect:
    x0: float = 0.0
    y0: float = 0.0
    x1: float = 1.0
    y1: float = 1.0

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("rectangle must have positive width and height")

    @property
    def center(self):
        return np.array([(self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2])

    @property
    def diam(self):
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def bbox(self):
        return (self.x0, self.y0, self.x1, self.y1)

    def distance_to_boundary(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        dx = np.minimum(pts[:, 0] - self.x0, self.x1 - pts[:, 0])
        dy = np.minimum(pts[:, 1] - self.y0, self.y1 - pts[:, 1])
        return np.minimum(dx, dy)

    def contains(self, pts, slack=0.0):
        return self.distance_to_boundary(pts) >= -slack

    def describe(self):
        return f"rect:{self.x0!r},{self.y0!r},{self.x1!r},{self.y1!r}"


def parse_domain(text):
    """Parse ``disk:R``, ``disk:cx,cy,R``, ``rect:w,h`` or ``rect:x0,y0,x1,y1``."""
    kind, _, rest = text.partition(":")
    try:
        nums = [float(t) for t in rest.split(",") if t.strip()]
    except ValueError as exc:
        raise ValueError(f"bad domain descriptor {text!r}") from exc
    if kind == "disk" and len(nums) == 1:
        return Disk(0.0, 0.0, nums[0])
    if kind == "disk" and len(nums) == 3:
        return Disk(*nums)
    if kind == "rect" and len(nums) == 2:
        return Rect(0.0, 0.0, nums[0], nums[1])
    if kind == "rect" and len(nums) == 4:
        return Rect(*nums)
    raise ValueError(f"bad domain descriptor {text!r}")


# ---------------------------------------------------------------------------
# record views


@dataclass(frozen=True)
class Vertex:
    id: int
    position: tuple
    kind: str  # "primal" | "dual"
    boundary: bool


@dataclass(frozen=True)
class Quad:
    id: int
    corners: tuple  # (u, r, v, s)
    primal_diag_len: float
    dual_diag_len: float
    area: float


@dataclass
class Violation:
    kind: str
    ids: list
    message: str = ""


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def kinds(self):
        return sorted({v.kind for v in self.violations})

    def ids_for(self, kind):
        out = []
        for v in self.violations:
            if v.kind == kind:
                out.extend(v.ids)
        return out

    def add(self, kind, ids, message=""):
        ids = [int(i) for i in np.atleast_1d(ids)]
        if ids:
            self.violations.append(Violation(kind, ids, message))


# ---------------------------------------------------------------------------
# the map


def _quad_edges(quads):
    """Undirected quad-graph edges, one row per (quad, side)."""
    e = np.concatenate(
        [quads[:, [0, 1]], quads[:, [1, 2]], quads[:, [2, 3]], quads[:, [3, 0]]], axis=0
    )
    return np.sort(e, axis=1)


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class OrthodiagonalMap:
    """Immutable orthodiagonal map.

    ``positions`` is ``(N, 2)``; ``is_primal`` and ``is_boundary`` are ``(N,)``
    booleans; ``quads`` is ``(M, 4)`` in ``[u, r, v, s]`` order.
    """

    def __init__(self, positions, is_primal, quads, mesh_eps, domain=None, is_boundary=None):
        self.positions = _readonly(np.asarray(positions, dtype=np.float64).reshape(-1, 2))
        self.is_primal = _readonly(np.asarray(is_primal, dtype=bool))
        self.quads = _readonly(np.asarray(quads, dtype=np.int64).reshape(-1, 4))
        self.mesh_eps = float(mesh_eps)
        self.domain = domain
        if is_boundary is None:
            is_boundary = self.combinatorial_boundary()
        self.is_boundary = _readonly(np.asarray(is_boundary, dtype=bool))

    # -- sizes ------------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.positions)

    @property
    def n_quads(self):
        return len(self.quads)

    @cached_property
    def primal_ids(self):
        return _readonly(np.flatnonzero(self.is_primal))

    @cached_property
    def dual_ids(self):
        return _readonly(np.flatnonzero(~self.is_primal))

    @cached_property
    def interior_primal_ids(self):
        return _readonly(np.flatnonzero(self.is_primal & ~self.is_boundary))

    def vertex(self, i):
        x, y = self.positions[i]
        return Vertex(int(i), (float(x), float(y)),
                      "primal" if self.is_primal[i] else "dual", bool(self.is_boundary[i]))

    def quad(self, k):
        return Quad(int(k), tuple(int(c) for c in self.quads[k]), float(self.primal_len[k]),
                    float(self.dual_len[k]), float(self.area[k]))

    @property
    def vertices(self):
        return [self.vertex(i) for i in range(self.n_vertices)]

    # -- geometry ---------------------------------------------------------
    @cached_property
    def primal_diag(self):
        q = self.quads
        return _readonly(self.positions[q[:, 2]] - self.positions[q[:, 0]])

    @cached_property
    def dual_diag(self):
        q = self.quads
        return _readonly(self.positions[q[:, 3]] - self.positions[q[:, 1]])

    @cached_property
    def primal_len(self):
        return _readonly(np.hypot(self.primal_diag[:, 0], self.primal_diag[:, 1]))

    @cached_property
    def dual_len(self):
        return _readonly(np.hypot(self.dual_diag[:, 0], self.dual_diag[:, 1]))

    @cached_property
    def area(self):
        return _readonly(0.5 * self.primal_len * self.dual_len)

    @cached_property
    def conductance_primal(self):
        """Duffin weight |e°|/|e•| of each quad's primal edge."""
        return _readonly(self.dual_len / self.primal_len)

    @cached_property
    def conductance_dual(self):
        return _readonly(self.primal_len / self.dual_len)

    @cached_property
    def side_lengths(self):
        p = self.positions[self.quads]
        d = p - np.roll(p, -1, axis=1)
        return _readonly(np.hypot(d[..., 0], d[..., 1]))

    @cached_property
    def signed_area(self):
        p = self.positions[self.quads]
        x, y = p[..., 0], p[..., 1]
        return _readonly(0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1))

    # -- combinatorics ----------------------------------------------------
    @cached_property
    def _edge_table(self):
        e = _quad_edges(self.quads)
        uniq, inverse, counts = np.unique(e, axis=0, return_inverse=True, return_counts=True)
        return uniq, inverse.reshape(-1), counts

    @cached_property
    def boundary_edges(self):
        uniq, _, counts = self._edge_table
        return _readonly(uniq[counts == 1])

    def combinatorial_boundary(self):
        flags = np.zeros(len(self.positions), dtype=bool)
        flags[self.boundary_edges.reshape(-1)] = True
        return flags

    @cached_property
    def primal_adjacency(self):
        """For each primal vertex id: list of ``(neighbor id, quad id)``."""
        adj = {int(i): [] for i in self.primal_ids}
        for k, (u, _, v, _) in enumerate(self.quads.tolist()):
            adj[u].append((v, k))
            adj[v].append((u, k))
        return adj

    @cached_property
    def dual_adjacency(self):
        adj = {int(i): [] for i in self.dual_ids}
        for k, (_, r, _, s) in enumerate(self.quads.tolist()):
            adj[r].append((s, k))
            adj[s].append((r, k))
        return adj

    @cached_property
    def quad_graph_neighbors(self):
        """Set of neighbors of each vertex in the quad graph itself."""
        nb = [set() for _ in range(self.n_vertices)]
        for a, b in _quad_edges(self.quads).tolist():
            nb[a].add(b)
            nb[b].add(a)
        return nb

    def boundary_cycle(self):
        """Walk the outer boundary; return the vertex cycle or ``None`` if it is not simple."""
        be = self.boundary_edges
        if len(be) == 0:
            return None
        nbrs = {}
        for a, b in be.tolist():
            nbrs.setdefault(a, []).append(b)
            nbrs.setdefault(b, []).append(a)
        if any(len(v) != 2 for v in nbrs.values()):
            return None
        start = min(nbrs)
        cycle = [start]
        prev, cur = start, min(nbrs[start])
        while cur != start:
            cycle.append(cur)
            a, b = nbrs[cur]
            prev, cur = cur, (b if a == prev else a)
            if len(cycle) > len(nbrs):
                return None
        if len(cycle) != len(nbrs):
            return None
        return cycle

    @cached_property
    def boundary_segments(self):
        """``(S, 2, 2)`` array of the boundary curve's segments."""
        be = self.boundary_edges
        return _readonly(self.positions[be])

    def distance_to_boundary(self, pts):
        """Euclidean distance from each point to the curve bounding the mapped region."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        seg = self.boundary_segments
        a = seg[:, 0]
        d = seg[:, 1] - a
        dd = np.einsum("ij,ij->i", d, d)
        out = np.empty(len(pts))
        chunk = max(1, 2_000_000 // max(len(seg), 1))
        for lo in range(0, len(pts), chunk):
            p = pts[lo:lo + chunk, None, :]
            t = np.clip(np.einsum("pij,ij->pi", p - a, d) / dd, 0.0, 1.0)
            proj = a + t[..., None] * d
            out[lo:lo + chunk] = np.sqrt(np.min(np.sum((p - proj) ** 2, axis=-1), axis=1))
        return out

    def contains_points(self, pts):
        """Even-odd test against the boundary curve."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        seg = self.boundary_segments
        x0, y0 = seg[:, 0, 0], seg[:, 0, 1]
        x1, y1 = seg[:, 1, 0], seg[:, 1, 1]
        inside = np.zeros(len(pts), dtype=bool)
        chunk = max(1, 2_000_000 // max(len(seg), 1))
        for lo in range(0, len(pts), chunk):
            px = pts[lo:lo + chunk, 0:1]
            py = pts[lo:lo + chunk, 1:2]
            cond = (y0 > py) != (y1 > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
            cross = cond & (px < xc)
            inside[lo:lo + chunk] = (np.count_nonzero(cross, axis=1) % 2) == 1
        return inside

    # -- misc -------------------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, OrthodiagonalMap):
            return NotImplemented
        return (
            self.mesh_eps == other.mesh_eps
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.is_primal, other.is_primal)
            and np.array_equal(self.is_boundary, other.is_boundary)
            and np.array_equal(self.quads, other.quads)
            and self.domain == other.domain
        )

    __hash__ = None

    def __repr__(self):
        return (f"OrthodiagonalMap(n_primal={len(self.primal_ids)}, n_dual={len(self.dual_ids)}, "
                f"n_quads={self.n_quads}, eps={self.mesh_eps:g})")

    def with_boundary(self, extra_primal):
        """Copy with extra primal vertices re-flagged as boundary (slits, absorbing sets)."""
        flags = np.array(self.is_boundary)
        flags[np.asarray(extra_primal, dtype=np.int64)] = True
        return OrthodiagonalMap(self.positions, self.is_primal, self.quads, self.mesh_eps,
                                self.domain, flags)


# ---------------------------------------------------------------------------
# construction


def _strictly_increasing(lines):
    lines = np.asarray(lines, dtype=float)
    return lines.ndim == 1 and len(lines) >= 2 and np.all(np.diff(lines) > 0)


def _lattice_quads(x_lines, y_lines):
    """Corner coordinates of every quad of the grid/cell-center orthodiagonal map.

    Primal vertices are grid points, dual vertices are cell centers. Returns
    (points, is_primal, quads) with point indices into ``points``.
    """
    x = np.asarray(x_lines, dtype=float)
    y = np.asarray(y_lines, dtype=float)
    nx, ny = len(x), len(y)
    xc = 0.5 * (x[:-1] + x[1:])
    yc = 0.5 * (y[:-1] + y[1:])
    gx, gy = np.meshgrid(x, y, indexing="ij")
    cx, cy = np.meshgrid(xc, yc, indexing="ij")
    primal = np.column_stack([gx.ravel(), gy.ravel()])
    dual = np.column_stack([cx.ravel(), cy.ravel()])
    npr = len(primal)

    def P(i, j):
        return i * ny + j

    def D(i, j):
        return npr + i * (ny - 1) + j

    quads = []
    # horizontal primal edges (i,j)-(i+1,j): dual corners are the cells below and above
    i, j = np.meshgrid(np.arange(nx - 1), np.arange(1, ny - 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    quads.append(np.column_stack([P(i, j), D(i, j - 1), P(i + 1, j), D(i, j)]))
    # vertical primal edges (i,j)-(i,j+1): dual corners are the cells right and left
    i, j = np.meshgrid(np.arange(1, nx - 1), np.arange(ny - 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    quads.append(np.column_stack([P(i, j), D(i, j), P(i, j + 1), D(i - 1, j)]))
    quads = np.concatenate(quads, axis=0)
    points = np.concatenate([primal, dual], axis=0)
    is_primal = np.zeros(len(points), dtype=bool)
    is_primal[:npr] = True
    return points, is_primal, quads


def _keep_largest_component(quads, n_points):
    if len(quads) == 0:
        return quads
    e = _quad_edges(quads)
    qid = np.tile(np.arange(len(quads)), 4)
    _, inv = np.unique(e, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    # quad -- edge bipartite graph
    m = len(quads)
    n_e = inv.max() + 1
    g = coo_matrix((np.ones(len(qid)), (qid, m + inv)), shape=(m + n_e, m + n_e))
    _, labels = connected_components(g, directed=False)
    ql = labels[:m]
    counts = np.bincount(ql)
    best = np.flatnonzero(counts == counts.max())
    # deterministic tie-break: the component holding the lowest quad index
    first = {lab: np.flatnonzero(ql == lab)[0] for lab in best}
    keep = min(best, key=lambda lab: first[lab])
    return quads[ql == keep]


def _remove_pinches(quads):
    """Drop quads until every boundary vertex sits in a single fan of faces."""
    changed = True
    while changed and len(quads):
        changed = False
        e = _quad_edges(quads)
        uniq, inv, counts = np.unique(e, axis=0, return_inverse=True, return_counts=True)
        inv = inv.reshape(-1)
        bverts = np.unique(uniq[counts == 1])
        m = len(quads)
        incident = {}
        for k, row in enumerate(quads.tolist()):
            for c in row:
                incident.setdefault(c, []).append(k)
        edge_quads = {}
        for slot, eid in enumerate(inv.tolist()):
            edge_quads.setdefault(eid, []).append(slot % m)
        vert_edges = {}
        for eid, (a, b) in enumerate(uniq.tolist()):
            vert_edges.setdefault(a, []).append(eid)
            vert_edges.setdefault(b, []).append(eid)
        drop = set()
        for x in bverts.tolist():
            qs = incident[x]
            if len(qs) < 2:
                continue
            parent = {q: q for q in qs}

            def find(a):
                while parent[a] != a:
                    parent[a] = parent[parent[a]]
                    a = parent[a]
                return a

            for eid in vert_edges[x]:
                qq = edge_quads.get(eid, [])
                if len(qq) == 2:
                    ra, rb = find(qq[0]), find(qq[1])
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
            fans = {}
            for q in qs:
                fans.setdefault(find(q), []).append(q)
            if len(fans) > 1:
                ordered = sorted(fans.values(), key=lambda f: (-len(f), min(f)))
                for f in ordered[1:]:
                    drop.update(f)
        if drop:
            keep = np.array([k not in drop for k in range(m)])
            quads = _keep_largest_component(quads[keep], 0)
            changed = True
    return quads


def _assemble(points, is_primal, quads, eps, domain):
    quads = _keep_largest_component(quads, len(points))
    quads = _remove_pinches(quads)
    if len(quads) == 0:
        raise DomainTooSmall("no quad of the lattice fits inside the domain")
    used = np.unique(quads)
    # primal block first, dual block second, each in lattice order
    order = np.concatenate([used[is_primal[used]], used[~is_primal[used]]])
    remap = np.full(len(points), -1, dtype=np.int64)
    remap[order] = np.arange(len(order))
    m = OrthodiagonalMap(points[order], is_primal[order], remap[quads], eps, domain)
    if len(m.interior_primal_ids) == 0:
        raise DomainTooSmall("no interior primal vertex survives clipping")
    return m


def _clip(points, quads, domain):
    scale = max(abs(v) for v in domain.bbox) + domain.diam
    inside = domain.contains(points, slack=1e-12 * scale)
    return quads[np.all(inside[quads], axis=1)]


def _centered_lines(lo, hi, center, offsets):
    """Lines at ``center +/- cumulative offsets`` covering ``[lo, hi]`` plus one step."""
    pos = [center]
    neg = []
    k = 0
    while pos[-1] <= hi:
        pos.append(pos[-1] + offsets(k))
        k += 1
    k = 0
    cur = center
    while cur >= lo:
        cur = cur - offsets(k)
        neg.append(cur)
        k += 1
    return np.array(neg[::-1] + pos)


def generate_square(domain, eps):
    """Square-lattice orthodiagonal map of ``domain`` with edges at most ``eps``.

    Primal vertices sit on ``c + a Z^2`` and dual vertices on
    ``c + a Z^2 + (a/2, a/2)`` with pitch ``a = eps / 2`` and ``c`` the
    domain center; a quad is kept iff its four corners lie in the closed
    domain. All conductances equal 1.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    a = eps / 2.0
    x0, y0, x1, y1 = domain.bbox
    cx, cy = domain.center
    xl = _centered_lines(x0, x1, cx, lambda k: a)
    yl = _centered_lines(y0, y1, cy, lambda k: a)
    points, is_primal, quads = _lattice_quads(xl, yl)
    return _assemble(points, is_primal, _clip(points, quads, domain), eps, domain)


def generate_rect_nonuniform(domain, x_lines, y_lines, eps=None):
    """Grid/cell-center orthodiagonal map on arbitrary tensor-product lines.

    Conductances are the dual/primal diagonal length ratios, so the map is
    non-isoradial whenever the spacings differ.
    """
    for name, lines in (("x_lines", x_lines), ("y_lines", y_lines)):
        if not _strictly_increasing(lines):
            raise SpacingNonMonotone(f"{name} must be strictly increasing with at least two entries")
    points, is_primal, quads = _lattice_quads(x_lines, y_lines)
    if domain is None:
        domain = Rect(float(x_lines[0]), float(y_lines[0]), float(x_lines[-1]), float(y_lines[-1]))
    quads = _clip(points, quads, domain)
    if len(quads):
        p = points[quads]
        sides = np.hypot(*(p - np.roll(p, -1, axis=1)).transpose(2, 0, 1))
        max_side = float(sides.max())
    else:
        max_side = 0.0
    if eps is None:
        eps = max_side
    elif max_side > eps * (1 + 1e-12):
        raise MeshTooCoarse(f"quad side {max_side:.6g} exceeds eps={eps:.6g}")
    return _assemble(points, is_primal, quads, eps, domain)


def generate_rectnu(domain, eps, ratio=2.0):
    """Non-isoradial grid whose line spacings alternate between ``s`` and ``ratio * s``.

    The larger spacing is ``eps / 2`` (the same pitch rule as
    :func:`generate_square`), mirrored about the domain center.
    """
    if not eps > 0 or not ratio >= 1:
        raise ValueError("need eps > 0 and ratio >= 1")
    big = eps / 2.0
    small = big / ratio
    x0, y0, x1, y1 = domain.bbox
    cx, cy = domain.center
    step = lambda k: small if k % 2 == 0 else big  # noqa: E731
    xl = _centered_lines(x0, x1, cx, step)
    yl = _centered_lines(y0, y1, cy, step)
    return generate_rect_nonuniform(domain, xl, yl, eps)


GENERATORS = {"square": generate_square, "rectnu": generate_rectnu}


def generate(gen, domain, eps):
    try:
        fn = GENERATORS[gen]
    except KeyError:
        raise ValueError(f"unknown generator {gen!r}; expected one of {sorted(GENERATORS)}") from None
    return fn(domain, eps)


# ---------------------------------------------------------------------------
# validation


def validate(m):
    """Check every structural invariant; an empty report means the map is valid."""
    rep = ValidationReport()
    n = m.n_vertices
    if not np.all(np.isfinite(m.positions)):
        rep.add("nonfinite_position", np.flatnonzero(~np.isfinite(m.positions).all(axis=1)))
    q = m.quads
    if q.size and (q.min() < 0 or q.max() >= n):
        bad = np.flatnonzero((q < 0).any(axis=1) | (q >= n).any(axis=1))
        rep.add("bad_vertex_ref", bad, "quad references a vertex id outside 0..N-1")
        return rep

    kinds = m.is_primal[q]
    bip = ~(kinds[:, 0] & ~kinds[:, 1] & kinds[:, 2] & ~kinds[:, 3])
    rep.add("bipartite", np.flatnonzero(bip), "quad corners must alternate primal/dual starting at u")

    dot = np.einsum("ij,ij->i", m.primal_diag, m.dual_diag)
    scale = m.primal_len * m.dual_len
    rep.add("orthogonality", np.flatnonzero(np.abs(dot) > ORTHO_RTOL * scale),
            "diagonals are not orthogonal")

    sa = m.signed_area
    rep.add("orientation", np.flatnonzero(sa <= 0), "corners are not counterclockwise")
    rep.add("area", np.flatnonzero(np.abs(np.abs(sa) - m.area) > AREA_RTOL * m.area),
            "polygon area differs from half the diagonal product")

    too_long = np.flatnonzero(m.side_lengths.max(axis=1) > m.mesh_eps * (1 + 1e-12))
    rep.add("side_length", too_long, f"a side exceeds eps={m.mesh_eps:g}")

    with np.errstate(divide="ignore", invalid="ignore"):
        recip = np.abs(m.conductance_primal * m.conductance_dual - 1.0)
    rep.add("reciprocity", np.flatnonzero(~(recip <= RECIPROCITY_TOL)), "c(e•)c(e°) != 1")

    used = np.zeros(n, dtype=bool)
    used[q.reshape(-1)] = True
    rep.add("isolated_vertex", np.flatnonzero(~used))
    if len(q):
        e = _quad_edges(q)
        g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        ncomp, labels = connected_components(g, directed=False)
        if ncomp > 1:
            rep.add("connectivity", np.flatnonzero(labels != labels[q[0, 0]]), "quad graph is disconnected")
        cyc = m.boundary_cycle()
        if cyc is None:
            be = m.boundary_edges
            deg = np.bincount(be.reshape(-1), minlength=n)
            bad = np.flatnonzero((deg != 0) & (deg != 2))
            rep.add("boundary_not_simple", bad, "outer boundary is not a simple closed curve")
        comb = m.combinatorial_boundary()
        rep.add("boundary_flag", np.flatnonzero(comb & ~m.is_boundary),
                "vertex on the outer face is not flagged as boundary")
    interior = m.interior_primal_ids
    if len(q):
        deg = np.bincount(np.concatenate([q[:, 0], q[:, 2]]), minlength=n)
        rep.add("no_primal_neighbor", interior[deg[interior] == 0])
    return rep


# ---------------------------------------------------------------------------
# text format


def save(m, path):
    """Write ``m`` in the line-oriented ``odmap v1`` format."""
    lines = [f"odmap v1 eps={m.mesh_eps:.17g}"]
    if m.domain is not None:
        lines.append(f"# domain {m.domain.describe()}")
    for i in range(m.n_vertices):
        x, y = m.positions[i]
        lines.append(f"v {i} {x:.17g} {y:.17g} {'p' if m.is_primal[i] else 'd'} "
                     f"{'b' if m.is_boundary[i] else 'i'}")
    for u, r, v, s in m.quads.tolist():
        lines.append(f"q {u} {r} {v} {s}")
    Path(path).write_text("\n".join(lines) + "\n")


def load(path):
    """Read an ``odmap v1`` file; raise :class:`FormatError` with line context on bad input."""
    text = Path(path).read_text()
    rows = text.splitlines()
    if not rows:
        raise FormatError("empty file", line=1)
    head = rows[0].split()
    if len(head) != 3 or head[0] != "odmap" or head[1] != "v1" or not head[2].startswith("eps="):
        raise FormatError("expected header 'odmap v1 eps=<float>'", line=1, field="header")
    try:
        eps = float(head[2][4:])
    except ValueError:
        raise FormatError("eps is not a number", line=1, field="eps") from None
    domain = None
    pos, kind, bnd, quads = [], [], [], []
    for ln, raw in enumerate(rows[1:], start=2):
        s = raw.strip()
        if not s:
            continue
        if s.startswith("#"):
            parts = s[1:].split()
            if len(parts) == 2 and parts[0] == "domain":
                try:
                    domain = parse_domain(parts[1])
                except ValueError as exc:
                    raise FormatError(str(exc), line=ln, field="domain") from None
            continue
        tok = s.split()
        if tok[0] == "v":
            if quads:
                raise FormatError("vertex after quad section", line=ln)
            if len(tok) != 6:
                raise FormatError("vertex line needs 6 fields", line=ln)
            try:
                vid = int(tok[1])
            except ValueError:
                raise FormatError("vertex id is not an integer", line=ln, field="id") from None
            if vid != len(pos):
                raise FormatError(f"vertex ids must be dense and ordered; expected {len(pos)}",
                                  line=ln, field="id")
            try:
                x, y = float(tok[2]), float(tok[3])
            except ValueError:
                raise FormatError("coordinate is not a number", line=ln, field="position") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise FormatError("non-finite coordinate", line=ln, field="position")
            if tok[4] not in ("p", "d"):
                raise FormatError("kind must be p or d", line=ln, field="kind")
            if tok[5] not in ("i", "b"):
                raise FormatError("boundary flag must be i or b", line=ln, field="boundary")
            pos.append((x, y))
            kind.append(tok[4] == "p")
            bnd.append(tok[5] == "b")
        elif tok[0] == "q":
            if len(tok) != 5:
                raise FormatError("quad line needs 5 fields", line=ln)
            try:
                ids = [int(t) for t in tok[1:]]
            except ValueError:
                raise FormatError("quad corner is not an integer", line=ln, field="corners") from None
            for c in ids:
                if c < 0 or c >= len(pos):
                    raise FormatError(f"quad references vertex {c} but N={len(pos)}",
                                      line=ln, field="corners")
            quads.append(ids)
        else:
            raise FormatError(f"unknown record type {tok[0]!r}", line=ln)
    if not pos:
        raise FormatError("missing vertex section", line=len(rows))
    if not quads:
        raise FormatError("missing quads section", line=len(rows), field="q")
    return OrthodiagonalMap(np.array(pos), np.array(kind), np.array(quads), eps, domain, np.array(bnd))
