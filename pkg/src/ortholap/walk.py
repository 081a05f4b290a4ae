"""Seeded random walks on conductance networks and the Monte Carlo probes built on them.

A walk at ``x`` draws ``u`` from the counter RNG and moves to the first
neighbor (in ascending local id) whose cumulative transition probability
exceeds ``u``. Trial ``t`` uses key ``seed ^ t``; draw ``k`` of a trial is the
``k``-th step. Both backends follow the same arithmetic and agree bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from ._accel import njit, prange
from .errors import (
    BallNotContained,
    ExcessiveCaps,
    GeometryViolation,
    InsufficientExceedances,
    IsolatedVertex,
)
from .network import build_network
from .rng import mixed_keys, uniform_nb, uniforms_array

DEFAULT_MAX_STEPS = 10_000_000
CAP_FRACTION = 0.01


@dataclass(frozen=True)
class WalkConfig:
    seed: int = 0
    max_steps: int = DEFAULT_MAX_STEPS
    stop: np.ndarray | None = None  # extra absorbing local vertices (bool mask), on top of the boundary

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass(frozen=True)
class WalkOutcome:
    hit_vertex: int
    hit_position: tuple
    steps: int
    capped: bool


@dataclass(frozen=True)
class EstimateWithError:
    mean: float
    std_error: float
    n_trials: int
    n_capped: int = 0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if not self.std_error >= 0:
            raise ValueError("std_error must be non-negative")


# ---------------------------------------------------------------------------
# transition tables


@dataclass(frozen=True)
class TransitionTable:
    indptr: np.ndarray
    indices: np.ndarray
    cumprob: np.ndarray

    @property
    def padded(self):
        return _padded(self)


def transition_table(net):
    cached = getattr(net, "_transition_table", None)
    if cached is not None:
        return cached
    w = net.weights
    indptr = w.indptr.astype(np.int64)
    indices = w.indices.astype(np.int64)
    data = w.data.astype(np.float64)
    deg = np.diff(indptr)
    rows = np.repeat(np.arange(len(deg)), deg)
    cols = np.arange(len(data)) - np.repeat(indptr[:-1], deg)
    dense = np.zeros((len(deg), max(int(deg.max()), 1) if len(deg) else 1))
    dense[rows, cols] = data
    dense = np.cumsum(dense, axis=1)
    cum = dense[rows, cols] / dense[rows, deg[rows] - 1]
    cum[indptr[1:][deg > 0] - 1] = 1.0
    tab = TransitionTable(indptr, indices, cum)
    net._transition_table = tab
    return tab


def _padded(tab):
    """Dense ``(n, maxdeg)`` neighbor and cumulative tables; padding never gets selected."""
    deg = np.diff(tab.indptr)
    width = max(int(deg.max()), 1) if len(deg) else 1
    n = len(deg)
    nbr = np.zeros((n, width), dtype=np.int64)
    cum = np.full((n, width), np.inf)
    rows = np.repeat(np.arange(n), deg)
    cols = np.arange(len(tab.indices)) - np.repeat(tab.indptr[:-1], deg)
    nbr[rows, cols] = tab.indices
    cum[rows, cols] = tab.cumprob
    return nbr, cum


def step_distribution(net, x):
    """``[(neighbor id, c(x,y)/π_x), ...]`` for map vertex ``x``."""
    k = net.local(x)
    w = net.weights
    lo, hi = w.indptr[k], w.indptr[k + 1]
    if hi == lo or net.pi[k] <= 0:
        raise IsolatedVertex(f"vertex {x} has no neighbors")
    return [(int(net.ids[j]), float(c / net.pi[k])) for j, c in zip(w.indices[lo:hi], w.data[lo:hi])]


# ---------------------------------------------------------------------------
# kernels


@njit(parallel=True, cache=True)
def _walks_numba(indptr, indices, cumprob, stop, starts, mixed, max_steps, hits, steps):
    for t in prange(len(starts)):
        x = starts[t]
        k = 0
        key = mixed[t]
        while not stop[x] and k < max_steps:
            u = uniform_nb(key, k)
            j = indptr[x]
            last = indptr[x + 1] - 1
            while j < last and cumprob[j] <= u:
                j += 1
            x = indices[j]
            k += 1
        hits[t] = x
        steps[t] = k


def _walks_numpy(tab, stop, starts, mixed, max_steps, hits, steps):
    nbr, cum = _padded(tab)
    x = starts.copy()
    k = np.zeros(len(starts), dtype=np.int64)
    active = np.flatnonzero(~stop[x])
    while len(active):
        xa = x[active]
        u = uniforms_array(mixed[active], k[active])
        j = np.count_nonzero(cum[xa] <= u[:, None], axis=1)
        x[active] = nbr[xa, j]
        k[active] += 1
        keep = ~stop[x[active]] & (k[active] < max_steps)
        active = active[keep]
    hits[:] = x
    steps[:] = k


def simulate(net, starts, seed, trials, stop, max_steps=DEFAULT_MAX_STEPS):
    """Run one walk per entry of ``starts`` (local ids) with trial indices ``trials``.

    Returns ``(hits, steps, capped)`` with hits in local ids.
    """
    tab = transition_table(net)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    keys = np.bitwise_xor(np.uint64(int(seed) & ((1 << 64) - 1)),
                          np.asarray(trials, dtype=np.uint64))
    mixed = mixed_keys(keys)
    stop = np.ascontiguousarray(stop, dtype=np.bool_)
    hits = np.empty(len(starts), dtype=np.int64)
    steps = np.empty(len(starts), dtype=np.int64)
    if _accel.use_numba():
        _walks_numba(tab.indptr, tab.indices, tab.cumprob, stop, starts, mixed, int(max_steps), hits, steps)
    else:
        _walks_numpy(tab, stop, starts, mixed, int(max_steps), hits, steps)
    capped = ~stop[hits]
    return hits, steps, capped


def _stop_mask(net, extra=None):
    stop = np.array(net.is_boundary)
    if extra is not None:
        stop |= np.asarray(extra, dtype=bool)
    return stop


def run_walk(net, start, cfg=WalkConfig()):
    """Single walk from map vertex ``start``; deterministic in ``cfg.seed``."""
    s = net.local(start)
    hits, steps, capped = simulate(net, [s], cfg.seed, [0], _stop_mask(net, cfg.stop), cfg.max_steps)
    h = int(hits[0])
    x, y = net.positions[h]
    return WalkOutcome(int(net.ids[h]), (float(x), float(y)), int(steps[0]), bool(capped[0]))


def exit_samples(net, start, n, seed, stop=None, max_steps=DEFAULT_MAX_STEPS):
    """Hit positions of ``n`` trials from ``start``; capped trials are dropped.

    Returns ``(local_hits, capped_count)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    s = net.local(start)
    hits, _, capped = simulate(net, np.full(n, s), seed, np.arange(n), _stop_mask(net, stop), max_steps)
    n_capped = int(np.count_nonzero(capped))
    if n_capped > CAP_FRACTION * n:
        raise ExcessiveCaps(f"{n_capped} of {n} walks hit the {max_steps}-step cap")
    return hits[~capped], n_capped


def _estimate(values, n_capped):
    values = np.asarray(values, dtype=float)
    n = len(values)
    mean = float(np.sum(values) / n)
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimateWithError(mean, se, n, n_capped)


def harmonic_measure(net, start, g, n, seed, stop=None, max_steps=DEFAULT_MAX_STEPS):
    """Monte Carlo estimate of ``E^start g(S_τ)`` with τ the boundary hitting time."""
    hits, n_capped = exit_samples(net, start, n, seed, stop, max_steps)
    return _estimate(g(net.positions[hits]), n_capped)


def martingale_check(net, start, n, seed, z=3.0):
    """Exit-position coordinates against the start; returns per-coordinate rows and a verdict."""
    hits, n_capped = exit_samples(net, start, n, seed)
    pos = net.positions[hits]
    p0 = net.positions[net.local(start)]
    rows = []
    for c in range(2):
        est = _estimate(pos[:, c], n_capped)
        rows.append((est, float(p0[c]), abs(est.mean - p0[c]) <= z * est.std_error + 1e-15))
    return rows, all(r[2] for r in rows)


# ---------------------------------------------------------------------------
# Beurling probe


def slit_disk_map(eps, radius=1.0, gen="square"):
    """Disk map whose primal vertices on the negative real axis are absorbing."""
    from .odmap import Disk, generate

    m = generate(gen, Disk(0.0, 0.0, radius), eps)
    p = m.positions
    slit = np.flatnonzero(m.is_primal & (np.abs(p[:, 1]) < 1e-12 * radius) & (p[:, 0] <= 1e-12 * radius))
    return m.with_boundary(slit)


def nearest_primal(m, point):
    p = m.positions[m.primal_ids]
    d = np.hypot(p[:, 0] - point[0], p[:, 1] - point[1])
    return int(m.primal_ids[int(np.argmin(d))])


@dataclass(frozen=True)
class BeurlingResult:
    radii: np.ndarray
    estimates: list
    usable: np.ndarray
    beta_hat: float
    beta_se: float
    intercept: float

    @property
    def beta_lower95(self):
        return self.beta_hat - 1.96 * self.beta_se

    @property
    def monotone(self):
        p = [e.mean for e in self.estimates]
        return all(b <= a for a, b in zip(p, p[1:]))

    def csv_rows(self):
        return [(float(r), e.mean, e.std_error, e.n_trials) for r, e in zip(self.radii, self.estimates)]


def _ols_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    return slope, float(ym - slope * xm)


def _exceedance(dist_sorted, weights_sorted, radii, total):
    """``P(dist ≥ r)`` for each r, from sorted distances with resampling weights."""
    tail = np.concatenate([np.cumsum(weights_sorted[::-1])[::-1], [0.0]])
    idx = np.searchsorted(dist_sorted, radii, side="left")
    return tail[idx] / total


def beurling_probe(m, start, radii, n, seed, net=None, n_boot=200, max_steps=DEFAULT_MAX_STEPS):
    """Exceedance probabilities ``P(|S_τ − start| ≥ r)`` and a fitted decay exponent.

    Every radius uses the same walks, so the estimates are non-increasing in
    ``r`` by construction. ``beta_hat`` is minus the OLS slope of
    ``log p̂`` against ``log r`` over radii with ``p̂ > 10/n``; its standard
    error comes from a seeded bootstrap over trials.
    """
    radii = np.asarray(radii, dtype=float)
    if len(radii) == 0 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("radii must be positive and strictly increasing")
    net = net or build_network(m, "primal", check=False)
    if m.is_boundary[start] or not m.is_primal[start]:
        raise GeometryViolation("start must be an interior primal vertex")
    hits, n_capped = exit_samples(net, start, n, seed, max_steps=max_steps)
    p0 = m.positions[start]
    dist = np.hypot(*(net.positions[hits] - p0).T)
    n_used = len(dist)
    order = np.argsort(dist, kind="stable")
    ds = dist[order]
    ones = np.ones(n_used)
    p = _exceedance(ds, ones, radii, n_used)
    estimates = [EstimateWithError(float(pi), float(math.sqrt(pi * (1 - pi) / n_used)), n_used, n_capped)
                 for pi in p]
    usable = p > 10.0 / n
    if np.count_nonzero(usable) < 3:
        raise InsufficientExceedances(f"only {np.count_nonzero(usable)} radii have p̂ > 10/n")
    lr = np.log(radii[usable])
    slope, intercept = _ols_slope(lr, np.log(p[usable]))
    # bootstrap: multinomial weights from the counter RNG, keyed apart from the walk keys
    boot = np.empty(n_boot)
    bkey = mixed_keys(np.array([(int(seed) ^ 0xB007) + (1 << 40)], dtype=np.uint64))
    for b in range(n_boot):
        u = uniforms_array(np.repeat(bkey, n_used), np.arange(n_used) + b * n_used)
        idx = np.minimum((u * n_used).astype(np.int64), n_used - 1)
        w = np.bincount(idx, minlength=n_used).astype(float)
        pb = _exceedance(ds, w[order], radii[usable], n_used)
        pb = np.maximum(pb, 0.5 / n_used)
        boot[b], _ = _ols_slope(lr, np.log(pb))
    se = float(np.std(boot, ddof=1))
    return BeurlingResult(radii, estimates, usable, -slope, se, intercept)


def beurling_radii(eps, outer, count=6):
    """Geometric radii spanning ``[4ε, outer/4]``."""
    return np.geomspace(4 * eps, outer / 4, count)


# ---------------------------------------------------------------------------
# Property (S) and annulus crossings


def _ball_contained(m, center, radius):
    c = np.asarray(center, dtype=float)[None, :]
    return bool(m.contains_points(c)[0]) and float(m.distance_to_boundary(c)[0]) >= radius


def _in_arc(angles, center_angle, width):
    if width >= 2 * math.pi:
        return np.ones(len(angles), dtype=bool)
    return np.mod(angles - center_angle + width / 2, 2 * math.pi) < width


def property_s_probe(m, center, R, arc, n, seed, net=None, min_radius=4.0, max_steps=DEFAULT_MAX_STEPS):
    """Probability that the walk from ``center`` leaves ``B(center, R)`` through the arc.

    ``arc = (angle, width)`` is the half-open interval
    ``[angle − width/2, angle + width/2)``. The exit vertex is the first one
    with ``|S − center| ≥ R``.
    """
    if R < min_radius * m.mesh_eps:
        raise ValueError(f"R must be at least {min_radius}·eps")
    c = m.positions[center]
    if not _ball_contained(m, c, R + m.mesh_eps):
        raise BallNotContained(f"B({tuple(c)}, {R}) is not inside the mapped region")
    net = net or build_network(m, "primal", check=False)
    rel = net.positions - c
    stop = np.hypot(rel[:, 0], rel[:, 1]) >= R
    hits, n_capped = exit_samples(net, center, n, seed, stop=stop, max_steps=max_steps)
    d = net.positions[hits] - c
    inside = _in_arc(np.arctan2(d[:, 1], d[:, 0]), arc[0], arc[1])
    return _estimate(inside.astype(float), n_capped)


def annulus_crossing_probe(m, w, v, tau, barrier, n, seed, net=None, max_steps=DEFAULT_MAX_STEPS):
    """Probability that the walk from ``v`` hits ``barrier`` before leaving the annulus
    ``{ρ/τ < |z − w| < τρ}`` with ``ρ = |v − w|``."""
    w = np.asarray(w, dtype=float)
    if tau <= 1:
        raise GeometryViolation("tau must exceed 1")
    pv = m.positions[v]
    rho = float(np.hypot(*(pv - w)))
    if rho == 0:
        raise GeometryViolation("v must differ from w")
    if not _ball_contained(m, w, tau * rho):
        raise GeometryViolation("outer ball of the annulus leaves the mapped region")
    barrier = np.asarray(list(barrier), dtype=np.int64)
    if barrier.size and (barrier.min() < 0 or barrier.max() >= m.n_vertices or not m.is_primal[barrier].all()):
        raise GeometryViolation("barrier must consist of primal vertex ids")
    net = net or build_network(m, "primal", check=False)
    rel = np.hypot(*(net.positions - w).T)
    stop = (rel >= tau * rho) | (rel <= rho / tau)
    on_barrier = np.zeros(net.n, dtype=bool)
    on_barrier[net.local_of[barrier]] = True
    hits, n_capped = exit_samples(net, v, n, seed, stop=stop | on_barrier, max_steps=max_steps)
    return _estimate(on_barrier[hits].astype(float), n_capped)


def radial_barrier(m, w, v, tau, angle=None):
    """Primal vertices along the ray from ``w`` (default: pointing away from ``v``)
    that lie inside the annulus; an axis-aligned ray on a square lattice is a path."""
    w = np.asarray(w, dtype=float)
    pv = m.positions[v]
    rho = float(np.hypot(*(pv - w)))
    if angle is None:
        angle = math.atan2(pv[1] - w[1], pv[0] - w[0]) + math.pi
    direction = np.array([math.cos(angle), math.sin(angle)])
    ids = m.primal_ids
    rel = m.positions[ids] - w
    along = rel @ direction
    perp = np.abs(rel[:, 0] * direction[1] - rel[:, 1] * direction[0])
    tol = 0.25 * m.mesh_eps
    sel = (perp <= tol) & (along >= rho / tau) & (along <= tau * rho)
    return ids[sel][np.argsort(along[sel], kind="stable")]
