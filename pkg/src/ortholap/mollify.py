"""Piecewise-linear extension of discrete fields, convolution with a smooth
bump, and the averaged-Laplacian / small-Laplacian experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import exp1

from . import _accel
from ._accel import njit
from .errors import SquareNotContained, TooCloseToBoundary
from .network import WeightedNetwork, laplacian_apply, sample

# ∫_{|x|<1} exp(-1/(1-|x|²)) dA = π (e^{-1} − E1(1))
BUMP_MASS = math.pi * (math.exp(-1.0) - float(exp1(1.0)))
BUMP_NORM = 1.0 / BUMP_MASS
_Q_FLOOR = 1e-3  # exp(-1/q) underflows below this


# ---------------------------------------------------------------------------
# the bump


def bump(r):
    """``ψ(r) = exp(−1/(1−r²))`` for ``r < 1``, else 0."""
    r = np.asarray(r, dtype=float)
    q = 1.0 - r * r
    out = np.zeros_like(q)
    ok = q > _Q_FLOOR
    out[ok] = np.exp(-1.0 / q[ok])
    return out


def bump_derivative(r):
    r = np.asarray(r, dtype=float)
    q = 1.0 - r * r
    out = np.zeros_like(q)
    ok = q > _Q_FLOOR
    qq = q[ok]
    out[ok] = np.exp(-1.0 / qq) * (-2.0 * r[ok] / (qq * qq))
    return out


def bump_laplacian(r):
    """Radial Laplacian ``ψ'' + ψ'/r = ψ·(4r²/q⁴ − 8r²/q³ − 4/q²)``, ``q = 1 − r²``.

    The closed form has no ``1/r`` left in it, so ``r = 0`` needs no special case.
    """
    r = np.asarray(r, dtype=float)
    q = 1.0 - r * r
    out = np.zeros_like(q)
    ok = q > _Q_FLOOR
    qq = q[ok]
    r2 = r[ok] ** 2
    out[ok] = np.exp(-1.0 / qq) * (4.0 * r2 / qq ** 4 - 8.0 * r2 / qq ** 3 - 4.0 / qq ** 2)
    return out


@dataclass(frozen=True)
class MollifierSpec:
    """``φ_δ(x) = δ⁻² N ψ(|x|/δ)`` with unit mass."""

    delta: float
    norm: float = BUMP_NORM

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    def value(self, pts):
        r = np.hypot(*np.atleast_2d(pts).T) / self.delta
        return self.norm * bump(r) / self.delta ** 2

    def gradient(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        rr = np.hypot(pts[:, 0], pts[:, 1])
        dpsi = self.norm * bump_derivative(rr / self.delta) / self.delta ** 3
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(rr[:, None] > 0, pts / rr[:, None], 0.0)
        return unit * dpsi[:, None]

    def laplacian(self, pts):
        r = np.hypot(*np.atleast_2d(pts).T) / self.delta
        return self.norm * bump_laplacian(r) / self.delta ** 4


def mollifier(delta):
    return MollifierSpec(float(delta))


# ---------------------------------------------------------------------------
# piecewise-linear extension


def dual_values(m, h):
    """Values at dual vertices used to triangulate the faces of the primal graph.

    A dual vertex whose face is complete gets the arithmetic mean of the face's
    primal values. A boundary dual vertex gets the affine least-squares fit
    through its face's primal vertices, widened to neighboring faces until they
    are not collinear; this reproduces linear fields exactly.
    """
    hv = h.on_map(m)
    q = m.quads
    nd = m.n_vertices
    face = [set() for _ in range(nd)]
    for u, r, v, s in q.tolist():
        face[r].update((u, v))
        face[s].update((u, v))
    out = np.full(nd, np.nan)
    dual_nb = m.dual_adjacency
    for w in m.dual_ids.tolist():
        pts = sorted(face[w])
        if not m.is_boundary[w]:
            out[w] = float(np.mean(hv[pts]))
            continue
        cand = set(pts)
        ring = [w]
        seen = {w}
        for _ in range(4):
            if _noncollinear(m.positions[sorted(cand)]):
                break
            nxt = []
            for x in ring:
                for y, _k in dual_nb[x]:
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
                        cand.update(face[y])
            ring = nxt
        ids = sorted(cand)
        p = m.positions[ids]
        if _noncollinear(p):
            a = np.column_stack([np.ones(len(ids)), p - m.positions[w]])
            coef, *_ = np.linalg.lstsq(a, hv[ids], rcond=None)
            out[w] = float(coef[0])
        else:
            out[w] = float(np.mean(hv[ids]))
    return out


def _noncollinear(p):
    if len(p) < 3:
        return False
    d = p - p.mean(axis=0)
    sv = np.linalg.svd(d, compute_uv=False)
    return sv[1] > 1e-9 * max(sv[0], 1e-300)


@njit(cache=True)
def _locate_numba(qx, qy, origin_x, origin_y, cell, nx, ny, cell_ptr, cell_tri, tx2, ty2, a0, b0, a1, b1,
                  f0, f1, f2, out):
    for i in range(len(qx)):
        out[i] = np.nan
        cx = int(math.floor((qx[i] - origin_x) / cell))
        cy = int(math.floor((qy[i] - origin_y) / cell))
        if cx < 0 or cy < 0 or cx >= nx or cy >= ny:
            continue
        c = cx * ny + cy
        for j in range(cell_ptr[c], cell_ptr[c + 1]):
            t = cell_tri[j]
            dx = qx[i] - tx2[t]
            dy = qy[i] - ty2[t]
            l0 = a0[t] * dx + b0[t] * dy
            l1 = a1[t] * dx + b1[t] * dy
            l2 = 1.0 - l0 - l1
            if l0 >= -1e-12 and l1 >= -1e-12 and l2 >= -1e-12:
                out[i] = l0 * f0[t] + l1 * f1[t] + l2 * f2[t]
                break


class ExtendedField:
    """Piecewise-linear field on the mapped region.

    Each quad ``[u, r, v, s]`` is cut along its primal diagonal into triangles
    ``(u, r, v)`` and ``(v, s, u)``; values are linear on each.
    """

    def __init__(self, m, h):
        if h.side != "primal":
            raise ValueError("extension needs a primal field")
        self.map = m
        self.field = h
        vals = dual_values(m, h)
        vals[h.ids] = h.values
        self.vertex_values = vals
        q = m.quads
        self.triangles = np.concatenate([q[:, [0, 1, 2]], q[:, [2, 3, 0]]], axis=0)
        p = m.positions[self.triangles]
        x0, y0 = p[:, 0, 0], p[:, 0, 1]
        x1, y1 = p[:, 1, 0], p[:, 1, 1]
        x2, y2 = p[:, 2, 0], p[:, 2, 1]
        det = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
        self._tx2, self._ty2 = x2, y2
        self._a0, self._b0 = (y1 - y2) / det, (x2 - x1) / det
        self._a1, self._b1 = (y2 - y0) / det, (x0 - x2) / det
        f = vals[self.triangles]
        self._f0, self._f1, self._f2 = f[:, 0].copy(), f[:, 1].copy(), f[:, 2].copy()
        self._build_grid(p)

    @property
    def sup_norm(self):
        """Max |value| over all map vertices, hence over the whole mapped region."""
        return float(np.max(np.abs(self.vertex_values)))

    def _build_grid(self, p):
        lo = p.min(axis=1)
        hi = p.max(axis=1)
        cell = float(max(np.max(hi - lo), 1e-12))
        origin = lo.min(axis=0) - 1e-9 * cell
        nx = int(math.floor((hi[:, 0].max() - origin[0]) / cell)) + 1
        ny = int(math.floor((hi[:, 1].max() - origin[1]) / cell)) + 1
        ix0 = np.floor((lo[:, 0] - origin[0]) / cell).astype(np.int64)
        iy0 = np.floor((lo[:, 1] - origin[1]) / cell).astype(np.int64)
        ix1 = np.minimum(np.floor((hi[:, 0] - origin[0]) / cell).astype(np.int64), nx - 1)
        iy1 = np.minimum(np.floor((hi[:, 1] - origin[1]) / cell).astype(np.int64), ny - 1)
        tri, cells = [], []
        t_all = np.arange(len(p))
        for dx in range(2):
            for dy in range(2):
                cx, cy = ix0 + dx, iy0 + dy
                ok = (cx <= ix1) & (cy <= iy1)
                tri.append(t_all[ok])
                cells.append(cx[ok] * ny + cy[ok])
        tri = np.concatenate(tri)
        cells = np.concatenate(cells)
        order = np.lexsort((tri, cells))
        self._cell_tri = tri[order]
        counts = np.bincount(cells, minlength=nx * ny)
        self._cell_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self._origin = origin
        self._cell = cell
        self._nx, self._ny = nx, ny

    def __call__(self, pts):
        """Values at ``(K, 2)`` points; NaN outside the mapped region."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        qx = np.ascontiguousarray(pts[:, 0])
        qy = np.ascontiguousarray(pts[:, 1])
        out = np.empty(len(pts))
        if _accel.use_numba():
            _locate_numba(qx, qy, self._origin[0], self._origin[1], self._cell, self._nx, self._ny,
                          self._cell_ptr, self._cell_tri, self._tx2, self._ty2, self._a0, self._b0,
                          self._a1, self._b1, self._f0, self._f1, self._f2, out)
        else:
            self._locate_numpy(qx, qy, out)
        return out

    def _locate_numpy(self, qx, qy, out):
        out[:] = np.nan
        cx = np.floor((qx - self._origin[0]) / self._cell).astype(np.int64)
        cy = np.floor((qy - self._origin[1]) / self._cell).astype(np.int64)
        valid = (cx >= 0) & (cy >= 0) & (cx < self._nx) & (cy < self._ny)
        idx = np.flatnonzero(valid)
        c = cx[idx] * self._ny + cy[idx]
        start = self._cell_ptr[c]
        count = self._cell_ptr[c + 1] - start
        slot = 0
        pending = np.ones(len(idx), dtype=bool)
        while True:
            act = np.flatnonzero(pending & (count > slot))
            if len(act) == 0:
                break
            t = self._cell_tri[start[act] + slot]
            q = idx[act]
            dx = qx[q] - self._tx2[t]
            dy = qy[q] - self._ty2[t]
            l0 = self._a0[t] * dx + self._b0[t] * dy
            l1 = self._a1[t] * dx + self._b1[t] * dy
            l2 = 1.0 - l0 - l1
            hit = (l0 >= -1e-12) & (l1 >= -1e-12) & (l2 >= -1e-12)
            out[q[hit]] = l0[hit] * self._f0[t[hit]] + l1[hit] * self._f1[t[hit]] + l2[hit] * self._f2[t[hit]]
            pending[act[hit]] = False
            slot += 1

    @cached_property
    def triangle_data(self):
        """Corner positions ``(T, 3, 2)``, corner values ``(T, 3)`` and areas ``(T,)``."""
        p = self.map.positions[self.triangles]
        f = self.vertex_values[self.triangles]
        a = 0.5 * np.abs((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                         - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        return p, f, a


def extend(m, h):
    return ExtendedField(m, h)


# ---------------------------------------------------------------------------
# convolution


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    quad_err: float


def _check_clearance(ext, m, z, step):
    z = np.asarray(z, dtype=float)
    mp = ext.map
    if not mp.contains_points(z[None, :])[0] or mp.distance_to_boundary(z[None, :])[0] < m.delta + step:
        raise TooCloseToBoundary(f"point {tuple(z)} is within δ + step of the mapped region's edge")
    return z


def _midpoint_grid(z, delta, step):
    k = int(math.ceil(delta / step))
    off = (np.arange(-k, k) + 0.5) * step
    gx, gy = np.meshgrid(off, off, indexing="ij")
    rel = np.column_stack([gx.ravel(), gy.ravel()])
    rel = rel[np.hypot(rel[:, 0], rel[:, 1]) < delta]
    return rel, z + rel


# degree-5 seven-point rule on the reference triangle (barycentric, weights sum to 1)
_A1, _B1 = 0.059715871789769820, 0.470142064105115090
_A2, _B2 = 0.797426985353087322, 0.101286507323456339
_TRI_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
_TRI_W = np.array([0.225] + [0.132394152788506181] * 3 + [0.125939180544827153] * 3)


def _triangle_rule(ext, z, kernel, delta):
    """Integrate ``kernel(z − w)·ext(w)`` exactly in ``ext`` over triangles near ``z``."""
    p, f, area = ext.triangle_data
    cen = p.mean(axis=1)
    near = np.hypot(*(cen - z).T) < delta + ext.map.mesh_eps
    p, f, area = p[near], f[near], area[near]
    nodes = np.einsum("qk,tkd->tqd", _TRI_BARY, p)
    vals = np.einsum("qk,tk->tq", _TRI_BARY, f)
    kern = kernel((z - nodes.reshape(-1, 2))).reshape(vals.shape)
    return float(np.sum(area[:, None] * _TRI_W[None, :] * kern * vals))


def convolve_value(ext, m, z, quad_step=None, method="midpoint"):
    """``(φ_δ ∗ ext)(z)`` with its declared quadrature error ``step²·δ⁻²·‖h‖``."""
    step = m.delta / 16 if quad_step is None else quad_step
    z = _check_clearance(ext, m, z, step)
    hn = ext.sup_norm
    if method == "triangle":
        return QuadratureResult(_triangle_rule(ext, z, m.value, m.delta), (ext.map.mesh_eps / m.delta) ** 2 * hn)
    if step > m.delta / 8:
        raise ValueError("quad_step must be at most δ/8")
    rel, w = _midpoint_grid(z, m.delta, step)
    k = m.value(-rel)
    # weights renormalized to unit mass so constants come out exact
    val = float(np.sum(k * ext(w)) / np.sum(k))
    return QuadratureResult(val, step ** 2 * m.delta ** -2 * hn)


def convolved_laplacian(ext, m, z, quad_step=None, method="midpoint"):
    """``Δ(φ_δ ∗ ext)(z) = ∫ Δφ_δ(z − w) ext(w) dA(w)`` with declared error ``step²·δ⁻⁴·‖h‖``."""
    step = m.delta / 16 if quad_step is None else quad_step
    z = _check_clearance(ext, m, z, step)
    hn = ext.sup_norm
    if method == "triangle":
        return QuadratureResult(_triangle_rule(ext, z, m.laplacian, m.delta),
                                (ext.map.mesh_eps / m.delta) ** 2 * m.delta ** -2 * hn)
    if step > m.delta / 8:
        raise ValueError("quad_step must be at most δ/8")
    rel, w = _midpoint_grid(z, m.delta, step)
    k = m.laplacian(-rel)
    # ∫Δφ = 0, so subtracting ext(z) makes constants exact and, by the grid's
    # point symmetry about z, linear fields too
    center = ext(z[None, :])[0]
    val = float(np.sum(k * (ext(w) - center)) * step * step)
    return QuadratureResult(val, step ** 2 * m.delta ** -4 * hn)


# ---------------------------------------------------------------------------
# averaged Laplacian over a square


@dataclass(frozen=True)
class AnalyticFunction:
    """Smooth test function with its Laplacian; ``d2``/``d3`` are sup bounds of ‖D²f‖, ‖D³f‖."""

    fn: object
    laplacian: object
    d2: float = 0.0
    d3: float = 0.0
    name: str = "f"


def radial_quadratic():
    """``x² + y²``: Laplacian 4, third derivatives zero."""
    return AnalyticFunction(lambda p: p[:, 0] ** 2 + p[:, 1] ** 2, lambda p: np.full(len(p), 4.0),
                            d2=2.0 * math.sqrt(2.0), d3=0.0, name="x^2+y^2")


def linear_function(a=1.0, b=0.0, c=0.0):
    return AnalyticFunction(lambda p: a * p[:, 0] + b * p[:, 1] + c, lambda p: np.zeros(len(p)),
                            name=f"{a}x+{b}y+{c}")


@dataclass(frozen=True)
class Square:
    cx: float
    cy: float
    side: float

    def corners(self):
        h = self.side / 2
        return np.array([[self.cx - h, self.cy - h], [self.cx + h, self.cy - h],
                         [self.cx + h, self.cy + h], [self.cx - h, self.cy + h]])


@dataclass(frozen=True)
class ResidualResult:
    discrete_sum: float
    integral: float
    residual: float


def averaged_laplacian_residual(m, f, square, net=None, gauss_n=16):
    """``Σ_{v ∈ V•∩S} Δ•f(v)`` against ``∫_S Δf dA`` over a closed square ``S``."""
    c = square.corners()
    if not np.all(m.contains_points(c)):
        raise SquareNotContained("square corners leave the mapped region")
    seg_pts = np.concatenate([c + t * (np.roll(c, -1, axis=0) - c) for t in np.linspace(0, 1, 33)])
    if not np.all(m.contains_points(seg_pts)):
        raise SquareNotContained("square edges leave the mapped region")
    net = net or WeightedNetwork(m, "primal")
    lap = laplacian_apply(net, sample(net, f.fn)).values
    h = square.side / 2
    slack = 1e-9 * square.side
    p = net.positions
    inside = (np.abs(p[:, 0] - square.cx) <= h + slack) & (np.abs(p[:, 1] - square.cy) <= h + slack)
    discrete = float(np.sum(lap[inside]))
    x, w = np.polynomial.legendre.leggauss(gauss_n)
    gx, gy = np.meshgrid(square.cx + h * x, square.cy + h * x, indexing="ij")
    gw = np.outer(w, w) * h * h
    integral = float(np.sum(gw.ravel() * f.laplacian(np.column_stack([gx.ravel(), gy.ravel()]))))
    return ResidualResult(discrete, integral, abs(discrete - integral))


def mollified_field(ext, m, quad_step=None, method="midpoint"):
    """Callable ``z -> (φ_δ ∗ ext)(z)`` over a batch of points."""

    def fn(pts):
        return np.array([convolve_value(ext, m, z, quad_step, method).value for z in np.atleast_2d(pts)])

    return fn


__all__ = [
    "AnalyticFunction", "ExtendedField", "MollifierSpec", "QuadratureResult", "ResidualResult", "Square",
    "averaged_laplacian_residual", "bump", "bump_laplacian", "convolve_value", "convolved_laplacian",
    "extend", "linear_function", "mollified_field", "mollifier", "radial_quadratic",
]
