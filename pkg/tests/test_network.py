import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ortholap import network, odmap
from ortholap.errors import InvalidMap, NonConvergence, NotAPath, NotHarmonic, SideMismatch
from ortholap.network import BoundaryData, DiscreteField, laplacian_apply, sample, solve_dirichlet


def re_z(p):
    return p[:, 0]


def saddle(p):
    return p[:, 0] ** 2 - p[:, 1] ** 2


def test_square_lattice_conductances(net16, disk16):
    assert np.allclose(net16.conductance, 1.0, atol=1e-12)
    assert len(net16.edges) == disk16.n_quads
    dual = network.build_network(disk16, "dual", check=False)
    assert len(dual.edges) == disk16.n_quads


def test_nonuniform_conductance_multiset(rect_nu):
    p = network.build_network(rect_nu, "primal")
    d = network.build_network(rect_nu, "dual")
    both = np.concatenate([p.conductance, d.conductance])
    assert np.any(np.isclose(both, 0.5)) and np.any(np.isclose(both, 2.0))
    assert np.allclose(np.sort(d.conductance), [2 / 3, 2 / 3, 1.0, 2.0])


def test_invalid_map_rejected(star):
    bad = odmap.OrthodiagonalMap(star.positions, star.is_primal, star.quads, 0.1, star.domain, star.is_boundary)
    with pytest.raises(InvalidMap):
        network.build_network(bad)


def test_laplacian_of_linear_vanishes_on_nonuniform_grid(rectnu_disk):
    net = network.build_network(rectnu_disk)
    f = sample(net, lambda p: 0.3 * p[:, 0] - 1.7 * p[:, 1] + 2.0)
    lap = laplacian_apply(net, f).values
    assert np.max(np.abs(lap[net.interior])) <= 1e-10 * f.sup_norm


def test_saddle_is_discrete_harmonic_on_square_lattice(net16):
    lap = laplacian_apply(net16, sample(net16, saddle)).values
    assert np.max(np.abs(lap[net16.interior])) <= 1e-10


def test_constant_has_zero_laplacian(net16):
    lap = laplacian_apply(net16, sample(net16, lambda p: np.full(len(p), 3.5))).values
    assert np.max(np.abs(lap)) == 0.0


def test_side_mismatch(disk16, net16):
    dual = network.build_network(disk16, "dual", check=False)
    with pytest.raises(SideMismatch):
        laplacian_apply(net16, DiscreteField(np.zeros(dual.n), "dual", dual.ids))


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2 ** 31))
def test_laplacian_linear_and_symmetric(a, b, seed):
    m = odmap.generate_rectnu(odmap.Disk(0, 0, 1), 0.25)
    net = network.build_network(m, check=False)
    rng = np.random.default_rng(seed)
    f = DiscreteField(rng.standard_normal(net.n), "primal", net.ids)
    g = DiscreteField(rng.standard_normal(net.n), "primal", net.ids)
    lf, lg = laplacian_apply(net, f).values, laplacian_apply(net, g).values
    comb = laplacian_apply(net, DiscreteField(a * f.values + b * g.values, "primal", net.ids)).values
    scale = np.max(np.abs(a * lf)) + np.max(np.abs(b * lg)) + 1e-300
    assert np.max(np.abs(comb - a * lf - b * lg)) <= 1e-12 * scale
    lhs, rhs = f.values @ lg, g.values @ lf
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs), 1.0)


def test_solve_constant(net16):
    h = solve_dirichlet(net16, BoundaryData.constant(5.0))
    assert np.max(np.abs(h.values - 5.0)) <= 1e-12


@pytest.mark.parametrize("fn", [re_z, saddle])
def test_solve_reproduces_harmonic_data(net16, fn):
    h = solve_dirichlet(net16, fn)
    assert np.max(np.abs(h.values - fn(net16.positions))) <= 1e-8
    assert np.array_equal(h.values[net16.boundary], fn(net16.positions[net16.boundary]))


def test_solve_linear_on_nonuniform_grid(rectnu_disk):
    net = network.build_network(rectnu_disk)
    h = solve_dirichlet(net, re_z)
    assert np.max(np.abs(h.values - net.positions[:, 0])) <= 1e-8


def test_maximum_principle_and_determinism(net32):
    g = BoundaryData(lambda p: np.sin(3 * p[:, 0]) + np.cos(5 * p[:, 1]))
    h1 = solve_dirichlet(net32, g)
    h2 = solve_dirichlet(net32, g)
    assert h1.info["method"] == "cg"
    assert np.array_equal(h1.values, h2.values)
    gb = g(net32.positions[net32.boundary])
    assert h1.values.min() >= gb.min() - 1e-12 and h1.values.max() <= gb.max() + 1e-12


def test_direct_and_cg_agree(net16):
    g = BoundaryData(lambda p: np.exp(p[:, 0]) * np.cos(2 * p[:, 1]))
    a = solve_dirichlet(net16, g, method="direct")
    b = solve_dirichlet(net16, g, tol=1e-12, method="cg")
    assert np.max(np.abs(a.values - b.values)) <= 1e-9


def test_unreachable_tolerance_raises(net16):
    with pytest.raises(NonConvergence) as info:
        solve_dirichlet(net16, lambda p: np.exp(p[:, 0]), tol=1e-300, method="direct")
    assert info.value.residual > 0


def _anchor(m):
    return int(m.dual_ids[0])


def test_conjugate_of_re_z_is_im_z(disk16, net16):
    h = solve_dirichlet(net16, re_z)
    hc = network.harmonic_conjugate(disk16, net16, h, _anchor(disk16))
    y = disk16.positions[hc.ids, 1]
    assert np.max(np.abs(hc.values - (y - y[0]))) <= 1e-8


def test_conjugate_of_constant_is_zero(disk16, net16):
    h = DiscreteField(np.full(net16.n, 2.0), "primal", net16.ids)
    hc = network.harmonic_conjugate(disk16, net16, h, _anchor(disk16))
    assert np.max(np.abs(hc.values)) == 0.0


def test_conjugate_of_saddle_brute_force_patch():
    # 6x6 primal patch; integrate quad by quad along rows, then compare with 2xy
    m = odmap.generate_rect_nonuniform(None, np.arange(6.0), np.arange(6.0))
    net = network.build_network(m)
    h = sample(net, saddle)
    hc = network.harmonic_conjugate(m, net, h, _anchor(m))
    hmap = h.on_map(m)
    ref = {}
    q = m.quads
    ref[_anchor(m)] = 0.0
    changed = True
    while changed:
        changed = False
        for u, r, v, s in q.tolist():
            inc = hmap[v] - hmap[u]
            if r in ref and s not in ref:
                ref[s] = ref[r] + inc
                changed = True
            elif s in ref and r not in ref:
                ref[r] = ref[s] - inc
                changed = True
    got = dict(zip(hc.ids.tolist(), hc.values.tolist()))
    assert max(abs(got[k] - ref[k]) for k in ref) <= 1e-12
    w = m.positions[hc.ids]
    two_xy = 2 * w[:, 0] * w[:, 1]
    assert np.max(np.abs(hc.values - (two_xy - two_xy[0]))) <= 1e-7


def test_conjugate_spanning_trees_agree(disk32, net32):
    h = solve_dirichlet(net32, lambda p: p[:, 0] ** 3 - 3 * p[:, 0] * p[:, 1] ** 2 + p[:, 1], tol=1e-12)
    a = network.harmonic_conjugate(disk32, net32, h, _anchor(disk32), tree="bfs")
    b = network.harmonic_conjugate(disk32, net32, h, _anchor(disk32), tree="dfs")
    assert np.max(np.abs(a.values - b.values)) <= 1e-7 * h.sup_norm


def test_conjugate_requires_harmonic(disk16, net16):
    with pytest.raises(NotHarmonic):
        network.harmonic_conjugate(disk16, net16, sample(net16, lambda p: p[:, 0] ** 2 + p[:, 1] ** 2),
                                   _anchor(disk16))


def _z(m):
    return m.positions[:, 0] + 1j * m.positions[:, 1]


def test_identity_integrates_to_zero_around_quads(disk16):
    F = _z(disk16)
    for k in range(0, disk16.n_quads, 97):
        assert abs(network.contour_integral(disk16, F, network.quad_contour(disk16, k))) <= 1e-12


def test_conjugate_pair_integrates_to_zero(disk16, net16):
    h = solve_dirichlet(net16, saddle)
    hc = network.harmonic_conjugate(disk16, net16, h, _anchor(disk16))
    F = network.holomorphic_pair(disk16, h, hc)
    norm = np.max(np.abs(F))
    cyc = disk16.boundary_cycle()
    assert abs(network.contour_integral(disk16, F, cyc + cyc[:1])) <= 1e-7 * norm
    for k in range(0, disk16.n_quads, 53):
        assert abs(network.contour_integral(disk16, F, network.quad_contour(disk16, k))) <= 1e-7 * norm


def test_conjugate_z_around_one_quad(star):
    # Σ(F(e−)+F(e+))(e+−e−) has no 1/2, so z̄ gives 4i times the quad area
    F = np.conj(_z(star))
    k = 0
    val = network.contour_integral(star, F, network.quad_contour(star, k))
    area = star.area[k]
    assert abs(val.real) <= 1e-12
    assert abs(abs(val) - 4 * area) <= 1e-12


def test_contour_must_be_a_path(star):
    u, r, v, s = star.quads[0]
    with pytest.raises(NotAPath):
        network.contour_integral(star, _z(star), [u, v])


def test_cauchy_riemann_residuals(disk16):
    z = _z(disk16)
    assert np.max(network.cauchy_riemann_residual(disk16, z)) <= 1e-12
    assert np.max(network.cauchy_riemann_residual(disk16, z ** 2)) <= 2 * disk16.mesh_eps
    rng = np.random.default_rng(3)
    F = rng.standard_normal(disk16.n_vertices) + 1j * rng.standard_normal(disk16.n_vertices)
    assert np.max(network.cauchy_riemann_residual(disk16, F)) > 0


def test_field_round_trip(tmp_path, net16):
    h = solve_dirichlet(net16, saddle)
    path = tmp_path / "h.field"
    network.save_field(h, path)
    back = network.load_field(path)
    assert back.side == "primal"
    assert np.array_equal(back.values, h.values) and np.array_equal(back.ids, h.ids)
