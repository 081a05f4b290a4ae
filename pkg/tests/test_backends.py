import os
import subprocess
import sys

import numpy as np
import pytest

from ortholap import _accel, mollify, network, walk

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not importable")


def test_walks_bit_identical(disk16, net16):
    start = net16.local(walk.nearest_primal(disk16, (0.1, -0.2)))
    stop = np.array(net16.is_boundary)
    n = 300
    outs = {}
    for name in ("numba", "numpy"):
        with _accel.backend(name):
            outs[name] = walk.simulate(net16, np.full(n, start), 5, np.arange(n), stop)
    for a, b in zip(outs["numba"], outs["numpy"]):
        assert np.array_equal(a, b)


def test_harmonic_measure_identical(disk16, net16):
    s = walk.nearest_primal(disk16, (0.3, 0.3))
    g = lambda p: p[:, 0] * p[:, 1]  # noqa: E731
    est = {}
    for name in ("numba", "numpy"):
        with _accel.backend(name):
            est[name] = walk.harmonic_measure(net16, s, g, 500, 9)
    assert est["numba"].mean == est["numpy"].mean
    assert est["numba"].std_error == est["numpy"].std_error


def test_locate_identical(disk16, net16):
    ext = mollify.extend(disk16, network.sample(net16, lambda p: np.sin(p[:, 0]) + p[:, 1] ** 2))
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1.1, 1.1, size=(5000, 2))
    vals = {}
    for name in ("numba", "numpy"):
        with _accel.backend(name):
            vals[name] = ext(pts)
    assert np.array_equal(vals["numba"], vals["numpy"], equal_nan=True)


def test_backend_context_restores():
    before = _accel.backend_name()
    with _accel.backend("numpy"):
        assert _accel.backend_name() == "numpy"
    assert _accel.backend_name() == before
    with pytest.raises(ValueError):
        with _accel.backend("fortran"):
            pass


@pytest.mark.parametrize("flag, expected", [("1", "numpy"), ("0", "numba")])
def test_env_flag(flag, expected):
    env = {**os.environ, "ORTHOLAP_NO_NUMBA": flag}
    proc = subprocess.run([sys.executable, "-c", "import ortholap; print(ortholap.backend_name())"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == expected
