"""Counter-based random numbers.

Every draw is a pure function of ``(seed, stream, counter, lane)``:

* ``seed``    master seed of a run,
* ``stream``  an independent sub-stream (one per particle, per ABC candidate, ...),
* ``counter`` a position along the stream (simulation step, ABC generation, ...),
* ``lane``    which of the several numbers needed at that position.

The value is obtained by chaining SplitMix64 finalizers over the four keys, so
draws can be produced in any order, in parallel or serially, with identical
results. Uniforms have 53 bits of resolution and live in ``[0, 1)``.
"""

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C_STREAM = np.uint64(0xD1B54A32D192ED03)
_C_COUNTER = np.uint64(0xAEF17502108EF2D9)
_C_LANE = np.uint64(0xDB4F0B9175AE2165)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53


@nb.njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True, inline="always")
def stream_key(seed, stream):
    """Key of one sub-stream; hoist it out of loops over counters and lanes."""
    k = mix64(np.uint64(seed) * _GOLDEN + np.uint64(0x632BE59BD9B4E019))
    return mix64(k ^ (np.uint64(stream) * _C_STREAM))


@nb.njit(cache=True, inline="always")
def keyed_bits(key, counter, lane):
    h = mix64(key + np.uint64(counter) * _C_COUNTER)
    return mix64(h ^ (np.uint64(lane) * _C_LANE + _GOLDEN))


@nb.njit(cache=True, inline="always")
def keyed_uniform(key, counter, lane):
    return float(keyed_bits(key, counter, lane) >> _S11) * _TO_UNIT


@nb.njit(cache=True, inline="always")
def keyed_normal(key, counter, lane):
    """Standard normal via Box-Muller on lanes ``lane`` and ``lane + 1``."""
    u1 = 1.0 - keyed_uniform(key, counter, lane)  # (0, 1]
    u2 = keyed_uniform(key, counter, lane + 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@nb.njit(cache=True)
def counter_uniform(seed, stream, counter, lane):
    return keyed_uniform(stream_key(seed, stream), counter, lane)


@nb.njit(cache=True)
def _uniform_array(seed, streams, counter, lane):
    out = np.empty(streams.shape[0])
    for i in range(streams.shape[0]):
        out[i] = keyed_uniform(stream_key(seed, streams[i]), counter, lane)
    return out


@nb.njit(cache=True)
def _normal_array(seed, streams, counter, lane):
    out = np.empty(streams.shape[0])
    for i in range(streams.shape[0]):
        out[i] = keyed_normal(stream_key(seed, streams[i]), counter, lane)
    return out


@nb.njit(cache=True)
def _bits_array(seed, streams, counter, lane):
    out = np.empty(streams.shape[0], dtype=np.uint64)
    for i in range(streams.shape[0]):
        out[i] = keyed_bits(stream_key(seed, streams[i]), counter, lane)
    return out


def _streams(streams):
    return np.ascontiguousarray(np.atleast_1d(streams), dtype=np.uint64)


def uniforms(seed, streams, counter=0, lane=0):
    """Uniform ``[0, 1)`` draws, one per entry of ``streams``."""
    return _uniform_array(np.uint64(seed), _streams(streams), np.uint64(counter), np.uint64(lane))


def normals(seed, streams, counter=0, lane=0):
    """Standard normal draws, one per stream; consumes lanes ``lane`` and ``lane + 1``."""
    return _normal_array(np.uint64(seed), _streams(streams), np.uint64(counter), np.uint64(lane))


def derive_seeds(seed, streams, counter=0, lane=0):
    """Child seeds (non-negative 63-bit ints) for sub-tasks such as single simulations."""
    bits = _bits_array(np.uint64(seed), _streams(streams), np.uint64(counter), np.uint64(lane))
    return (bits >> np.uint64(1)).astype(np.int64)


def derive_seed(seed, *keys):
    """One child seed from a master seed and a short tuple of integer keys."""
    s = int(seed)
    for k in keys:
        s = int(derive_seeds(s, [k])[0])
    return s
