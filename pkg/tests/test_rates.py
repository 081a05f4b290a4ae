import math

import numpy as np
import pytest

from ortholap import rates
from ortholap.errors import BetaOutOfRange, CaseOutOfScope, DomainError, MissingFields
from ortholap.rates import RateQuery


def test_xi_hand_example():
    assert rates.xi(0.2, 0.4, 0.1, 0.3) == pytest.approx(0.02, abs=1e-15)


def test_xi_r_zero_is_nonnegative():
    for s in np.linspace(0.01, 0.99, 50):
        assert rates.xi(0.3, 0.2, 0.0, s) >= 0.0


def test_xi_continuous_as_s_approaches_r():
    r = 0.6  # middle term negative here, so the limit is (α∧β)r
    vals = [rates.xi(0.2, 0.4, r, r + d) for d in (1e-3, 1e-6, 1e-9)]
    assert abs(vals[-1] - 0.2 * r) <= 1e-8
    assert abs(vals[0] - vals[-1]) <= 1e-2


def test_xi_domain_errors():
    with pytest.raises(DomainError):
        rates.xi(0.2, 0.4, 0.5, 0.4)
    with pytest.raises(DomainError):
        rates.xi(1.5, 0.4, 0.1, 0.4)


def test_xi_monotone_in_alpha_below_beta():
    rng = np.random.default_rng(11)
    for _ in range(200):
        beta = rng.uniform(0.05, 0.95)
        r = rng.uniform(0, 0.9)
        s = rng.uniform(r + 1e-6, 1 - 1e-9)
        a1, a2 = np.sort(rng.uniform(1e-3, beta, 2))
        assert rates.xi(a1, beta, r, s) <= rates.xi(a2, beta, r, s) + 1e-15


def test_inner_max_closed_example():
    assert rates.inner_max_closed(0.2, 0.4, 0.0) == pytest.approx(0.022989, abs=5e-7)
    assert rates.inner_max_closed(0.2, 0.4, 1.0) >= 0.2


def test_inner_max_closed_out_of_scope():
    with pytest.raises(CaseOutOfScope):
        rates.inner_max_closed(0.4, 0.4, 0.1)
    with pytest.raises(CaseOutOfScope):
        rates.inner_max_closed(0.5, 0.4, 0.1)


def test_inner_max_closed_matches_plain_grid():
    rng = np.random.default_rng(5)
    n = 400
    for _ in range(50):
        beta = rng.uniform(0.05, 0.95)
        alpha = rng.uniform(0.01, beta * 0.999)
        r = rng.uniform(0, 0.95)
        s = np.linspace(r, 1, n + 1)[1:-1]
        grid = max(rates.xi(alpha, beta, r, v) for v in s)
        slack = 2 * (1 - r) / n * 3.0  # Ξ is 3-Lipschitz in s
        assert abs(rates.inner_max_closed(alpha, beta, r) - grid) <= slack


def test_lambda_example_and_lower_bound():
    res = rates.lam(0.2, 0.4, 4096)
    assert res.lam >= 0.00625
    assert 0 <= res.r_star <= 1 and res.r_star < res.s_star < 1
    assert res.case == "alpha<beta"


def test_lambda_positive_on_grid():
    for a in np.linspace(0.1, 0.99, 10):
        for b in np.linspace(0.05, 0.5, 10):
            assert rates.lam(a, b, 128).lam > 0


def test_lambda_matches_closed_form():
    rng = np.random.default_rng(2)
    for _ in range(10):
        b = rng.uniform(0.1, 0.9)
        a = rng.uniform(0.02, b * 0.95)
        res = rates.lam(a, b, 512)
        assert abs(res.lam - rates.lam_closed(a, b)) <= res.accuracy


@pytest.mark.parametrize("n", [256, 512, 1024])
def test_lambda_refinement_stable(n):
    for a, b in ((0.2, 0.4), (0.7, 0.3), (0.35, 0.35)):
        assert abs(rates.lam(a, b, n).lam - rates.lam(a, b, 2 * n).lam) <= 8 / n


def test_lambda_above_lower_bound_random():
    rng = np.random.default_rng(8)
    for _ in range(100):
        b = rng.uniform(0.02, 0.5)
        a = rng.uniform(0.001, b)
        assert rates.lam(a, b, 128).lam >= rates.lambda_lower_bound(a, b)


def test_lambda_grid_too_small():
    with pytest.raises(ValueError):
        rates.lam(0.2, 0.4, 32)


def test_theta_examples():
    t = rates.theta(0.1, 0.5)
    assert t.value == pytest.approx(0.0192308, abs=5e-8)
    assert t.branch == "first"
    tie = rates.theta(0.2, 0.9)
    assert tie.branch == "tie"
    assert tie.value == pytest.approx(0.2 / 5.4, abs=1e-15)
    assert rates.theta(0.3, 0.9).branch == "second"


def test_theta_dominates_lambda():
    for a in np.linspace(0.1, 1.0, 6):
        for b in np.linspace(0.1, 0.9, 6):
            assert rates.theta(a, b).value >= rates.lam(a, b, 256).lam


def test_bootstrap_example():
    bs = rates.bootstrap(0.4, 10)
    assert bs.sequence[0] == pytest.approx(0.0571429, abs=5e-8)
    assert bs.limit == pytest.approx(0.1818182, abs=5e-8)


@pytest.mark.parametrize("beta", [0.1, 0.25, 0.4])
def test_bootstrap_converges_monotonically(beta):
    bs = rates.bootstrap(beta, 200)
    assert bs.strictly_increasing and bs.below_limit
    assert abs(bs.sequence[-1] - bs.limit) < 1e-6
    assert not bs.cap_active.any()


@pytest.mark.parametrize("beta", [0.05, 0.2, 0.45])
def test_bootstrap_fixed_point(beta):
    lim = rates.bootstrap_limit(beta)
    rhs = (1 - beta) * lim + beta * (beta + lim - beta * lim) / (2 * (1 + beta))
    assert abs(lim - rhs) <= 1e-12


def test_bootstrap_beta_out_of_range():
    for b in (0.0, 0.5, 0.7):
        with pytest.raises(BetaOutOfRange):
            rates.bootstrap(b, 5)


def test_rate_bound_eps_equals_diam():
    q = RateQuery(0.2, 0.4, eps=2.0, diam=2.0, g_sup=1.5, g_holder=0.5)
    assert rates.rate_bound(q, 1.0, 1.0) == pytest.approx(1.5 + 2.0 * 0.5 * 2.0 ** 0.2, rel=1e-14)


def test_rate_bound_constant_data():
    q = RateQuery(0.7, 0.3, eps=1e-2, diam=1.0, g_sup=2.0, g_holder=0.0)
    lv = rates.lam(0.7, 0.3).lam
    assert rates.rate_bound(q, 1.0, 5.0) == pytest.approx(2.0 * 1e-2 ** lv, rel=1e-12)


def test_rate_bound_example():
    q = RateQuery(0.2, 0.4, eps=1e-3, diam=1.0, g_sup=1.0, g_holder=1.0)
    lv = rates.lam(0.2, 0.4).lam
    assert rates.rate_bound(q, 1.0, 1.0) == pytest.approx(3.0 * 1e-3 ** lv, rel=1e-12)


def test_rate_bound_log_factor_when_equal():
    q = RateQuery(0.3, 0.3, eps=1e-2, diam=1.0, g_sup=1.0, g_holder=1.0)
    lv = rates.lam(0.3, 0.3).lam
    assert rates.rate_bound(q, 1.0, 1.0) == pytest.approx(2.0 * math.log(100) * 1e-2 ** lv, rel=1e-12)


def test_rate_bound_missing_fields():
    with pytest.raises(MissingFields):
        rates.rate_bound(RateQuery(0.2, 0.4, eps=1e-3), 1.0, 1.0)
