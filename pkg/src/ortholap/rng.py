"""Counter-based SplitMix64 stream.

Draw ``k`` of the stream keyed by ``key`` is

    mix64(mix64(key) + (k + 1) * GOLDEN)

so any draw can be produced without touching the others. Trial ``t`` of an
estimator seeded with ``seed`` uses key ``seed ^ t``; the results therefore
do not depend on the order in which trials run.
"""
import numpy as np

from ._accel import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
TWO_M53 = 1.0 / 9007199254740992.0


def mix64(z):
    """SplitMix64 finalizer on python ints."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def trial_key(seed, trial):
    return (int(seed) ^ int(trial)) & MASK64


def draw_u64(key, counter):
    """Reference scalar implementation (python ints)."""
    return mix64((mix64(key) + (counter + 1) * GOLDEN) & MASK64)


def draw_uniform(key, counter):
    """Uniform double in [0, 1) built from the top 53 bits."""
    return (draw_u64(key, counter) >> 11) * TWO_M53


def mix64_array(z):
    """Vectorized finalizer on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64).copy()
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def mixed_keys(keys):
    return mix64_array(np.asarray(keys, dtype=np.uint64))


def uniforms_array(mixed, counters):
    """Uniforms for pre-mixed keys and per-element counters."""
    c = np.asarray(counters, dtype=np.uint64) + np.uint64(1)
    z = mixed + c * np.uint64(GOLDEN)
    return (mix64_array(z) >> np.uint64(11)).astype(np.float64) * TWO_M53


@njit(cache=True)
def mix64_nb(z):
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def uniform_nb(mixed_key, counter):
    z = mixed_key + (np.uint64(counter) + np.uint64(1)) * np.uint64(0x9E3779B97F4A7C15)
    return np.float64(mix64_nb(z) >> np.uint64(11)) * (1.0 / 9007199254740992.0)
