import math

import numpy as np
import pytest
from scipy import integrate

from ortholap import mollify, network, odmap
from ortholap.errors import SquareNotContained, TooCloseToBoundary
from ortholap.mollify import Square, averaged_laplacian_residual, convolve_value, convolved_laplacian, extend

from conftest import UNIT_DISK


def field(m, fn):
    return network.sample(network.build_network(m, check=False), fn)


@pytest.fixture(scope="module")
def disk64():
    return odmap.generate_square(UNIT_DISK, 1 / 64)


@pytest.mark.parametrize("delta", [0.1, 0.5])
def test_unit_mass(delta):
    phi = mollify.mollifier(delta)
    mass, _ = integrate.quad(lambda r: 2 * math.pi * r * phi.value(np.array([[r, 0.0]]))[0], 0, delta,
                             epsabs=1e-13, epsrel=1e-13, limit=200)
    assert abs(mass - 1.0) <= 1e-8


def test_support():
    phi = mollify.mollifier(0.3)
    pts = 1.0001 * 0.3 * np.array([[1.0, 0.0], [0.0, -1.0], [0.6, 0.8]])
    assert np.all(phi.value(pts) == 0.0)
    assert np.all(phi.laplacian(pts) == 0.0)
    assert phi.value(np.zeros((1, 2)))[0] > 0


def test_laplacian_matches_finite_differences():
    phi = mollify.mollifier(1.0)
    p = np.array([[0.3, 0.4]])  # r = 0.5
    h = 1e-4
    shifts = np.array([[h, 0], [-h, 0], [0, h], [0, -h]])
    fd = (phi.value(p + shifts).sum() - 4 * phi.value(p)[0]) / h ** 2
    assert abs(fd - phi.laplacian(p)[0]) <= 1e-5 * abs(fd)
    assert np.isfinite(phi.laplacian(np.zeros((1, 2)))[0])


def test_extension_reproduces_affine(disk16):
    ext = extend(disk16, field(disk16, lambda p: 2 * p[:, 0] - p[:, 1] + 0.5))
    rng = np.random.default_rng(3)
    pts = rng.uniform(-0.9, 0.9, size=(2000, 2))
    pts = pts[disk16.contains_points(pts)]
    assert np.allclose(ext(pts), 2 * pts[:, 0] - pts[:, 1] + 0.5, atol=1e-12)


def test_extension_interpolates_on_one_triangle(disk16):
    h = field(disk16, lambda p: p[:, 0] ** 2 - p[:, 1] ** 2)
    ext = extend(disk16, h)
    interior = [k for k, q in enumerate(disk16.quads.tolist()) if not any(disk16.is_boundary[q])]
    u, r, v, _s = disk16.quads[interior[len(interior) // 2]]
    tri = disk16.positions[[u, r, v]]
    vals = ext.vertex_values[[u, r, v]]
    lam = np.array([0.5, 0.3, 0.2])
    pt = lam @ tri
    assert ext(pt[None, :])[0] == pytest.approx(lam @ vals, abs=1e-13)
    # the primal corners carry the field itself
    assert vals[0] == h.values[list(h.ids).index(u)]


def test_extension_sup_bound(disk16):
    h = field(disk16, lambda p: np.sin(3 * p[:, 0]) * np.cos(2 * p[:, 1]))
    ext = extend(disk16, h)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(10000, 2))
    pts = pts[disk16.contains_points(pts)]
    assert np.max(np.abs(ext(pts))) <= ext.sup_norm + 1e-12


@pytest.mark.parametrize("method", ["midpoint", "triangle"])
def test_convolution_exact_for_constant_and_linear(disk16, method):
    phi = mollify.mollifier(0.2)
    z = np.array([0.1, -0.2])
    c = extend(disk16, field(disk16, lambda p: np.full(len(p), 3.0)))
    lin = extend(disk16, field(disk16, lambda p: p[:, 0] + 2 * p[:, 1]))
    cv = convolve_value(c, phi, z, method=method)
    assert abs(cv.value - 3.0) <= (1e-10 if method == "midpoint" else cv.quad_err)
    cl = convolved_laplacian(c, phi, z, method=method)
    assert abs(cl.value) <= (1e-8 if method == "midpoint" else cl.quad_err)
    res = convolve_value(lin, phi, z, method=method)
    assert abs(res.value - (z[0] + 2 * z[1])) <= max(res.quad_err, 1e-10)
    lap = convolved_laplacian(lin, phi, z, method=method)
    assert abs(lap.value) <= max(lap.quad_err, 1e-8)


def test_convolution_of_harmonic_saddle(disk64):
    # x^2 - y^2 is harmonic, so its mollification equals itself
    phi = mollify.mollifier(0.1)
    ext = extend(disk64, field(disk64, lambda p: p[:, 0] ** 2 - p[:, 1] ** 2))
    z = np.array([0.2, 0.1])
    assert abs(convolve_value(ext, phi, z).value - 0.03) <= 0.05 * ext.sup_norm


def test_saddle_laplacian_shrinks_with_eps(disk32, disk64):
    phi = mollify.mollifier(0.2)
    z = np.array([0.13, 0.07])  # off the lattice symmetry centre
    errs = []
    for m in (disk32, disk64):
        ext = extend(m, field(m, lambda p: p[:, 0] ** 2 - p[:, 1] ** 2))
        errs.append(abs(convolved_laplacian(ext, phi, z, quad_step=min(0.2 / 64, m.mesh_eps / 8)).value))
    assert errs[1] < errs[0]


def test_too_close_to_boundary(disk16):
    ext = extend(disk16, field(disk16, lambda p: p[:, 0]))
    with pytest.raises(TooCloseToBoundary):
        convolve_value(ext, mollify.mollifier(0.2), np.array([0.85, 0.0]))
    with pytest.raises(TooCloseToBoundary):
        convolved_laplacian(ext, mollify.mollifier(0.2), np.array([2.0, 0.0]))


def test_averaged_laplacian_linear_is_zero(rectnu_disk):
    res = averaged_laplacian_residual(rectnu_disk, mollify.linear_function(1.0, -2.0, 0.3), Square(0.0, 0.0, 0.5))
    assert abs(res.discrete_sum) <= 1e-10
    assert res.integral == 0.0


def test_averaged_laplacian_radial_quadratic_integral(disk16):
    res = averaged_laplacian_residual(disk16, mollify.radial_quadratic(), Square(0.0, 0.0, 0.5))
    assert res.integral == pytest.approx(1.0, abs=1e-12)
    assert res.residual == pytest.approx(abs(res.discrete_sum - 1.0), abs=1e-15)


def test_square_not_contained(disk16):
    with pytest.raises(SquareNotContained):
        averaged_laplacian_residual(disk16, mollify.radial_quadratic(), Square(0.5, 0.5, 0.6))
