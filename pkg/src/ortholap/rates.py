"""Exponent arithmetic: Ξ, the min-max exponent λ, its closed-form inner max and
lower bound, the improved exponent θ, and the bootstrap recursion."""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.optimize import minimize_scalar

from .errors import BetaOutOfRange, CaseOutOfScope, DomainError, MissingFields


def _check_ab(alpha, beta):
    if not (0 < alpha <= 1 and 0 < beta < 1):
        raise DomainError(f"need α ∈ (0,1] and β ∈ (0,1), got α={alpha}, β={beta}")


def xi(alpha, beta, r, s):
    """``max{m r, min{β(s−r), b − (2+b)s + r/2, m s}}`` with ``m = α∧β``, ``b = β/(1+β)``.

    No clamping: the value may be negative.
    """
    _check_ab(alpha, beta)
    if not (0 <= r <= 1 and r < s < 1):
        raise DomainError(f"need 0 ≤ r ≤ 1 and r < s < 1, got r={r}, s={s}")
    return float(_xi(alpha, beta, np.float64(r), np.float64(s)))


def _xi(alpha, beta, r, s):
    m = min(alpha, beta)
    b = beta / (1 + beta)
    inner = np.minimum(np.minimum(beta * (s - r), b - (2 + b) * s + r / 2), m * s)
    return np.maximum(m * r, inner)


def _kinks(alpha, beta, r):
    """Values of ``s`` where two of the three linear pieces of Ξ meet."""
    m = min(alpha, beta)
    b = beta / (1 + beta)
    out = [(b + r / 2 + beta * r) / (2 + b + beta),  # β(s−r) = b − (2+b)s + r/2
           (b + r / 2) / (2 + b + m)]  # m s = b − (2+b)s + r/2
    if beta != m:
        out.append(beta * r / (beta - m))  # β(s−r) = m s
    return np.stack(out, axis=-1)


def inner_max_grid(alpha, beta, r, grid_n=512):
    """``max_{s∈[r,1]} Ξ`` on an s-grid augmented with Ξ's kink points.

    Ξ is the max of a constant and a concave piecewise-linear function of ``s``,
    so including the kinks makes the maximum exact up to rounding.
    Returns ``(value, argmax s)`` arrays over ``r``.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    t = np.linspace(0.0, 1.0, grid_n + 1)
    s = r[:, None] + (1.0 - r[:, None]) * t[None, :]
    k = np.clip(_kinks(alpha, beta, r), r[:, None], 1.0)
    s = np.concatenate([s, k], axis=1)
    vals = _xi(alpha, beta, r[:, None], s)
    rows = np.arange(len(r))
    # report s* from the s-dependent part; the constant branch m·r is flat in s
    m = min(alpha, beta)
    b = beta / (1 + beta)
    piece = np.minimum(np.minimum(beta * (s - r[:, None]), b - (2 + b) * s + r[:, None] / 2), m * s)
    piece = np.where((s < 1.0) & (s > r[:, None]), piece, -np.inf)
    j = np.argmax(piece, axis=1)
    return vals.max(axis=1), s[rows, j]


def inner_max_closed(alpha, beta, r):
    """Closed-form ``max_s Ξ`` for ``α < β``:
    ``max{αr, min{α(r/2+b)/(2+α+b), β(((β+½)r+b)/(2+β+b) − r)}}``."""
    _check_ab(alpha, beta)
    if not alpha < beta:
        raise CaseOutOfScope("the closed form covers α < β only; use the grid")
    b = beta / (1 + beta)
    first = alpha * (r / 2 + b) / (2 + alpha + b)
    second = beta * (((beta + 0.5) * r + b) / (2 + beta + b) - r)
    return float(max(alpha * r, min(first, second)))


@dataclass(frozen=True)
class RateResult:
    lam: float
    r_star: float
    s_star: float
    case: str
    accuracy: float
    bound: float | None = None


def bound_case(alpha, beta):
    if math.isclose(alpha, beta, rel_tol=0, abs_tol=1e-15):
        return "alpha=beta"
    return "alpha<beta" if alpha < beta else "alpha>beta"


def lam(alpha, beta, grid_n=512):
    """``λ(α,β) = min_r max_s Ξ`` on an r-grid, refined by a bounded scalar
    minimization in the two cells around the grid argmin.

    Declared accuracy is ``8/grid_n``.
    """
    _check_ab(alpha, beta)
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    rg = np.linspace(0.0, 1.0, grid_n + 1)
    vals, _ = inner_max_grid(alpha, beta, rg, grid_n)
    k = int(np.argmin(vals))
    lo, hi = rg[max(k - 1, 0)], rg[min(k + 1, grid_n)]

    def g(r):
        return float(inner_max_grid(alpha, beta, [r], grid_n)[0][0])

    res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    r_star, best = (float(res.x), float(res.fun)) if res.fun < vals[k] else (float(rg[k]), float(vals[k]))
    s_star = float(inner_max_grid(alpha, beta, [r_star], grid_n)[1][0])
    return RateResult(best, r_star, s_star, bound_case(alpha, beta), 8.0 / grid_n)


def lam_closed(alpha, beta, grid_n=4096):
    """``min_r`` of :func:`inner_max_closed` on a fine grid (oracle for α < β)."""
    rg = np.linspace(0.0, 1.0, grid_n + 1)
    vals = np.array([inner_max_closed(alpha, beta, r) for r in rg])
    k = int(np.argmin(vals))
    lo, hi = rg[max(k - 1, 0)], rg[min(k + 1, grid_n)]
    res = minimize_scalar(lambda r: inner_max_closed(alpha, beta, r), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(min(res.fun, vals[k]))


def lambda_lower_bound(alpha, beta):
    """``αβ/(8+12β)``."""
    return alpha * beta / (8 + 12 * beta)


@dataclass(frozen=True)
class ThetaResult:
    value: float
    branch: str  # "first" | "second" | "tie"


def theta(alpha, beta):
    """``min{m/(5+2m), m/(4+7m)}`` with ``m = α∧β``; reports which term attains it."""
    _check_ab(alpha, beta)
    m = min(alpha, beta)
    first = m / (5 + 2 * m)
    second = m / (4 + 7 * m)
    if math.isclose(first, second, rel_tol=1e-12, abs_tol=0.0):
        return ThetaResult(min(first, second), "tie")
    return ThetaResult(first, "first") if first < second else ThetaResult(second, "second")


@dataclass(frozen=True)
class BootstrapResult:
    sequence: np.ndarray
    limit: float
    cap_active: np.ndarray  # True where the min picked 1/5
    strictly_increasing: bool  # checked in extended precision
    below_limit: bool


def bootstrap_limit(beta):
    return beta / (1 + 3 * beta)


def bootstrap(beta, n):
    """``α₀ = β²/(2(1+β))``, ``α_{k+1} = (1−β)α_k + β·min{1/5, (β+α_k−βα_k)/(2(1+β))}``."""
    if not 0 < beta < 0.5:
        raise BetaOutOfRange(f"β must lie in (0, 1/2), got {beta}")
    if n < 1:
        raise ValueError("n must be at least 1")
    seq = np.empty(n + 1)
    cap = np.zeros(n, dtype=bool)
    seq[0] = beta ** 2 / (2 * (1 + beta))
    for k in range(n):
        a = seq[k]
        lin = (beta + a - beta * a) / (2 * (1 + beta))
        cap[k] = 0.2 < lin
        seq[k + 1] = (1 - beta) * a + beta * min(0.2, lin)
    # doubles reach the fixed point and stall; the ordering claims need more digits
    rate = (1 - beta) * (1 + beta / (2 * (1 + beta)))
    digits = 30 + int(n * -math.log10(rate)) if rate < 1 else 30 + n
    with mpmath.workdps(digits):
        b = mpmath.mpf(beta)
        lim = b / (1 + 3 * b)
        a = b ** 2 / (2 * (1 + b))
        inc, below = True, a < lim
        for _ in range(n):
            nxt = (1 - b) * a + b * min(mpmath.mpf(1) / 5, (b + a - b * a) / (2 * (1 + b)))
            inc &= nxt > a
            below &= nxt < lim
            a = nxt
    return BootstrapResult(seq, bootstrap_limit(beta), cap, bool(inc), bool(below))


@dataclass(frozen=True)
class RateQuery:
    alpha: float
    beta: float
    eps: float | None = None
    diam: float | None = None
    g_sup: float | None = None
    g_holder: float | None = None

    def __post_init__(self):
        _check_ab(self.alpha, self.beta)
        if self.eps is not None and self.diam is not None and not self.eps <= self.diam:
            raise DomainError("need eps ≤ diam")


def case_factor(alpha, beta, eps, diam):
    """Multiplier of the Hölder term: β/(β−α), log(diam/ε), or α/(α−β)."""
    case = bound_case(alpha, beta)
    if case == "alpha<beta":
        return beta / (beta - alpha)
    if case == "alpha>beta":
        return alpha / (alpha - beta)
    return 1.0


def rate_bound(q, c1, c2, grid_n=512, lam_value=None):
    """Numeric value of the three-case error bound with caller-supplied constants."""
    missing = [f for f in ("eps", "diam", "g_sup", "g_holder") if getattr(q, f) is None]
    if missing:
        raise MissingFields(f"rate_bound needs {', '.join(missing)}")
    if not (c1 > 0 and c2 > 0):
        raise ValueError("c1 and c2 must be positive")
    lv = lam(q.alpha, q.beta, grid_n).lam if lam_value is None else lam_value
    pre = c1 * q.g_sup + c2 * case_factor(q.alpha, q.beta, q.eps, q.diam) * q.g_holder * q.diam ** q.alpha
    if bound_case(q.alpha, q.beta) == "alpha=beta":
        pre *= math.log(q.diam / q.eps)
    return pre * (q.eps / q.diam) ** lv


def rates_table(alphas, betas, grid_n=512):
    """Rows ``(α, β, λ, θ, θ-branch, bootstrap limit or nan)`` over a grid."""
    rows = []
    for a in alphas:
        for b in betas:
            lr = lam(a, b, grid_n)
            th = theta(a, b)
            lim = bootstrap_limit(b) if b < 0.5 else float("nan")
            rows.append((float(a), float(b), lr.lam, th.value, th.branch, lim))
    return rows

lambda_ = lam  # the exponent is called λ; `lambda` itself is reserved
