"""Counter-based random streams.

Every random quantity in the package is a pure function of a 64-bit key
tuple, computed with a splitmix64-style finalizer.  Nothing is stored:
asking for draw ``k`` of step ``i`` under seed ``s`` always yields the same
bits, so timelines for ``10**8`` steps can be produced lazily and in any
order, and Monte Carlo results do not depend on how trials are split
between workers.

Stream layout for a walk seed ``s`` and step index ``i >= 1``:

* draw 0 -- direction on ``[0, tau^(1))``;
* draw ``2m - 1`` -- the m-th exponential(1) inter-event gap;
* draw ``2m`` -- the direction adopted at the m-th event.

Index 0 is never a step; estimators use it for auxiliary draws such as
sampling start points.
"""
from __future__ import annotations

import numpy as np

_U64 = np.uint64
_MUL1 = _U64(0xBF58476D1CE4E5B9)
_MUL2 = _U64(0x94D049BB133111EB)
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_COUNTER = _U64(0xD1B54A32D192ED03)
_SEED_SALT = _U64(0x2545F4914F6CDD1D)
_TRIAL_SALT = _U64(0x6A09E667F3BCC909)
_MASK64 = (1 << 64) - 1
_TO_UNIT = 2.0**-53


def as_seed(seed: int) -> np.uint64:
    """Reduce any Python integer to a 64-bit seed (two's complement for negatives)."""
    return _U64(int(seed) & _MASK64)


def mix64(z):
    """splitmix64 output finalizer; a bijection on uint64, applied elementwise."""
    z = np.asarray(z, dtype=_U64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _MUL1
        z = (z ^ (z >> _U64(27))) * _MUL2
        return z ^ (z >> _U64(31))


def stream_base(seeds, indices):
    """Per-(seed, index) stream state, broadcasting ``seeds`` against ``indices``."""
    seeds = np.asarray(seeds, dtype=_U64)
    indices = np.asarray(indices, dtype=_U64)
    with np.errstate(over="ignore"):
        return mix64(mix64(seeds ^ _SEED_SALT) ^ (indices * _GOLDEN))


def draw(base, k: int):
    """The ``k``-th 64-bit draw of each stream in ``base``."""
    with np.errstate(over="ignore"):
        return mix64(base + _U64((k + 1) & _MASK64) * _COUNTER)


def to_unit(bits):
    """Map 64-bit draws to doubles uniform on [0, 1)."""
    return (bits >> _U64(11)).astype(np.float64) * _TO_UNIT


def to_exponential(bits):
    """Map 64-bit draws to exponential(1) variates."""
    return -np.log1p(-to_unit(bits))


def to_direction(bits):
    """Map 64-bit draws to direction codes 0..3 using the top two bits."""
    return (bits >> _U64(62)).astype(np.int8)


def trial_seeds(master_seed: int, trials) -> np.ndarray:
    """Walk seeds for Monte Carlo trials, keyed by (master_seed, trial index)."""
    trials = np.asarray(trials, dtype=_U64)
    with np.errstate(over="ignore"):
        return mix64(mix64(as_seed(master_seed) ^ _TRIAL_SALT) + trials * _GOLDEN)


def derive(master_seed: int, tag: int) -> int:
    """A child master seed for an independent sub-experiment."""
    return int(trial_seeds(master_seed, [tag & _MASK64])[0] ^ _SEED_SALT)
