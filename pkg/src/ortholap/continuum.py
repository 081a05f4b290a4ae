"""Continuum oracles: harmonic polynomials, the Poisson integral on a disk,
the boundary-regime tail shape, and the Harnack-type inequality check."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadOrdering,
    DegreeOutOfRange,
    OutOfSampledRegion,
    QuadratureFailure,
    TooCloseToBoundary,
)
from .network import BoundaryData

# 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1]
_XK = np.array([
    -0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013, -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245, 0.0,
    0.207784955007898467600689403773245, 0.405845151377397166906606412076961,
    0.586087235467691130294144845693013, 0.741531185599394439863864773280788,
    0.864864423359769072789712788640926, 0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
    0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
    0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
    0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.zeros(15)
_WG[1::2] = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
             0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
             0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
             0.129484966168869693270611432679082]

MAX_DEPTH = 60
BOUNDARY_GAP = 1e-6


# ---------------------------------------------------------------------------
# harmonic polynomials


@dataclass(frozen=True)
class HarmonicOracle:
    """Continuum solution ``h`` with optional derivatives.

    ``fn``/``grad``/``hess`` take ``(K, 2)`` points; ``accuracy`` is the
    declared absolute error (0 for exact polynomials).
    """

    fn: object
    grad: object = None
    hess: object = None
    provenance: str = "polynomial"
    accuracy: float = 0.0
    name: str = "h"

    def __call__(self, pts):
        return self.fn(np.atleast_2d(np.asarray(pts, dtype=float)))


def _as_complex(pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    return pts[:, 0] + 1j * pts[:, 1]


def harmonic_polynomial(k, part="re"):
    """``Re z^k`` or ``Im z^k`` with exact gradient and Hessian."""
    if not (isinstance(k, (int, np.integer)) and 0 <= k <= 8):
        raise DegreeOutOfRange(f"degree must be an integer in 0..8, got {k!r}")
    if part not in ("re", "im"):
        raise ValueError("part must be 're' or 'im'")
    k = int(k)
    take = np.real if part == "re" else np.imag

    def power(z, j):
        return z ** j if j >= 0 else np.zeros_like(z)

    def fn(p):
        return take(power(_as_complex(p), k))

    def grad(p):
        d1 = k * power(_as_complex(p), k - 1)
        # ∂x F = F', ∂y F = i F'
        return np.column_stack([take(d1), take(1j * d1)])

    def hess(p):
        d2 = k * (k - 1) * power(_as_complex(p), k - 2)
        xx = take(d2)
        xy = take(1j * d2)
        return np.stack([np.column_stack([xx, xy]), np.column_stack([xy, -xx])], axis=1)

    return HarmonicOracle(fn, grad, hess, "polynomial", 0.0, f"{part}(z^{k})")


def polynomial_boundary(k, part="re"):
    h = harmonic_polynomial(k, part)
    return BoundaryData(h.fn, name=h.name)


def holder_boundary(alpha, anchor=(1.0, 0.0)):
    """``g(x) = |x − anchor|^α``: α-Hölder with seminorm 1, cusp at ``anchor``."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    ax, ay = float(anchor[0]), float(anchor[1])

    def fn(p):
        p = np.atleast_2d(p)
        return np.hypot(p[:, 0] - ax, p[:, 1] - ay) ** alpha

    return BoundaryData(fn, alpha=alpha, seminorm=1.0, sup=None,
                        name=f"holder:{alpha!r}:{ax!r},{ay!r}", cusps=((ax, ay),))


def holder_spot_check(g, sampler, n=1000, seed=0):
    """Largest ratio ``|g(x)−g(y)| / (‖g‖_α |x−y|^α)`` over ``n`` random pairs."""
    rng = np.random.default_rng(seed)
    x = sampler(rng, n)
    y = sampler(rng, n)
    d = np.hypot(*(x - y).T)
    ok = d > 0
    ratio = np.abs(g(x) - g(y))[ok] / (g.seminorm * d[ok] ** g.alpha)
    return float(ratio.max()) if ratio.size else 0.0


# ---------------------------------------------------------------------------
# Poisson integral


def _gk15(fun, a, b):
    """Vectorized Gauss-Kronrod on panels ``[a_i, b_i]``; ``fun(θ)`` takes ``(P, 15)``."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    theta = c[:, None] + h[:, None] * _XK[None, :]
    f = fun(theta)
    k = h * (f @ _WK)
    g = h * (f @ _WG)
    return k, np.abs(k - g)


def _initial_panels(theta_z, width, breaks):
    """Panel edges for one point, graded geometrically toward its kernel peak and the data cusps."""
    edges = [theta_z - math.pi, theta_z + math.pi]
    step = width
    while step < math.pi:
        edges += [theta_z - step, theta_z + step]
        step *= 4.0
    edges.append(theta_z)
    for t in breaks:
        t = theta_z + ((t - theta_z + math.pi) % (2 * math.pi)) - math.pi
        edges.append(t)
    e = np.unique(np.clip(np.array(edges), theta_z - math.pi, theta_z + math.pi))
    return e[:-1], e[1:]


def poisson_disk_many(g, zs, tol=1e-10, disk=None):
    """Poisson extension of ``g`` at each point of ``zs`` (``(K, 2)``) to absolute ``tol``.

    ``g`` is evaluated on boundary points ``(K, 2)``. For a disk other than
    the unit disk, points are mapped by ``z -> (z − c)/R`` first.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    cx, cy, R = (0.0, 0.0, 1.0) if disk is None else (disk.cx, disk.cy, disk.r)
    w = (zs - [cx, cy]) / R
    rad = np.hypot(w[:, 0], w[:, 1])
    if np.any(rad >= 1 - BOUNDARY_GAP):
        k = int(np.argmax(rad))
        raise TooCloseToBoundary(f"point {tuple(zs[k])} is within 1e-6 of the circle")
    breaks = tuple(math.atan2(py - cy, px - cx) for px, py in getattr(g, "cusps", ()))
    pid, lo, hi = [], [], []
    for i, (x, y) in enumerate(w):
        theta_z = math.atan2(y, x)
        a, b = _initial_panels(theta_z, max(1.0 - rad[i], 1e-12), breaks)
        pid.append(np.full(len(a), i))
        lo.append(a)
        hi.append(b)
    pid = np.concatenate(pid)
    lo = np.concatenate(lo)
    hi = np.concatenate(hi)
    depth = np.zeros(len(pid), dtype=np.int64)
    total = np.zeros(len(w))
    err_total = np.zeros(len(w))
    r2 = rad ** 2

    while len(pid):
        wx = w[pid, 0][:, None]
        wy = w[pid, 1][:, None]
        one_minus = (1.0 - r2[pid])[:, None]

        def integrand(theta):
            ct, st = np.cos(theta), np.sin(theta)
            kern = one_minus / ((ct - wx) ** 2 + (st - wy) ** 2)
            bp = np.column_stack([cx + R * ct.ravel(), cy + R * st.ravel()])
            return kern * g(bp).reshape(theta.shape) / (2 * math.pi)

        val, err = _gk15(integrand, lo, hi)
        budget = tol * np.maximum((hi - lo) / (2 * math.pi), 0.5 ** (depth + 1)) / 8.0
        done = err <= budget
        np.add.at(total, pid[done], val[done])
        np.add.at(err_total, pid[done], err[done])
        split = ~done
        if np.any(depth[split] >= MAX_DEPTH):
            raise QuadratureFailure("panel subdivision exceeded the depth limit")
        mid = 0.5 * (lo[split] + hi[split])
        pid = np.concatenate([pid[split], pid[split]])
        lo, hi = np.concatenate([lo[split], mid]), np.concatenate([mid, hi[split]])
        depth = np.concatenate([depth[split], depth[split]]) + 1
    return total


def poisson_disk(g, z, tol=1e-10, disk=None):
    """Poisson extension of ``g`` at a single point."""
    return float(poisson_disk_many(g, np.asarray(z, dtype=float)[None, :], tol, disk)[0])


def poisson_oracle(g, tol=1e-10, disk=None):
    """:class:`HarmonicOracle` backed by Poisson quadrature.

    Points on the circle itself (to 1e-12) return ``g`` directly, since the
    solution extends continuously there.
    """

    def fn(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        cx, cy, R = (0.0, 0.0, 1.0) if disk is None else (disk.cx, disk.cy, disk.r)
        rad = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) / R
        out = np.empty(len(pts))
        edge = rad >= 1 - 1e-12
        out[edge] = g(pts[edge]) if np.any(edge) else out[edge]
        mid = ~edge
        if np.any(mid):
            out[mid] = poisson_disk_many(g, pts[mid], tol, disk)
        return out

    return HarmonicOracle(fn, provenance="poisson-quadrature", accuracy=tol, name=f"poisson[{g.name}]")


# ---------------------------------------------------------------------------
# boundary-regime tail shape


def beurling_tail_bound(d, r, diam, alpha):
    """Case-split shape of the boundary-regime error bound with unit constant.

    ``α < 1/2``: ``α/(1−2α)·d^α``; ``α = 1/2``: ``α·d^α·log(diam/d)``;
    ``α > 1/2``: ``α/(2α−1)·diam^α·(d/diam)^{1/2}``.
    """
    if not (0 < d <= r <= diam):
        raise BadOrdering(f"need 0 < d <= r <= diam, got d={d}, r={r}, diam={diam}")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if math.isclose(alpha, 0.5, rel_tol=0, abs_tol=1e-12):
        return alpha * d ** alpha * math.log(diam / d)
    if alpha < 0.5:
        return alpha / (1 - 2 * alpha) * d ** alpha
    return alpha / (2 * alpha - 1) * diam ** alpha * math.sqrt(d / diam)


# ---------------------------------------------------------------------------
# Harnack-type inequality


@dataclass(frozen=True)
class SampledField:
    """Smooth field with known sup norms of itself and its Laplacian.

    ``region_distance(points)`` is the distance to the edge of the region where
    ``fn`` is trusted.
    """

    fn: object
    sup_norm: float
    lap_norm: float
    region_distance: object


@dataclass(frozen=True)
class HarnackCheck:
    lhs: float
    rhs: float
    ok: bool


def harnack_bound_check(field, x1, x2, d, c0=16.0):
    """``|h(x2)−h(x1)|`` against ``C0(‖h‖|x2−x1|/d + ‖Δh‖·d·|x2−x1|)``."""
    if not d > 0:
        raise ValueError("d must be positive")
    pts = np.array([x1, x2], dtype=float)
    dist = np.asarray(field.region_distance(pts), dtype=float)
    if np.any(dist < d * (1 - 1e-12)):
        raise OutOfSampledRegion(f"points are closer than d={d} to the sampled region's edge")
    v = np.asarray(field.fn(pts), dtype=float)
    sep = float(np.hypot(*(pts[1] - pts[0])))
    lhs = float(abs(v[1] - v[0]))
    rhs = float(c0 * (field.sup_norm * sep / d + field.lap_norm * d * sep))
    return HarnackCheck(lhs, rhs, lhs <= rhs)
