"""Backend selection for the hot kernels.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version that produces bit-identical output. The numba path is used when
numba imports cleanly and ``ORTHOLAP_NO_NUMBA`` is unset (or ``0``).
"""
import contextlib
import os

# the bundled TBB is too old for numba; the default workqueue/omp layers are fine
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


def _env_disabled():
    return os.environ.get("ORTHOLAP_NO_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


_use_numba = HAVE_NUMBA and not _env_disabled()


def use_numba():
    return _use_numba


def backend_name():
    return "numba" if _use_numba else "numpy"


@contextlib.contextmanager
def backend(name):
    """Temporarily force ``"numba"`` or ``"numpy"`` kernels."""
    global _use_numba
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    old = _use_numba
    _use_numba = name == "numba"
    try:
        yield
    finally:
        _use_numba = old
