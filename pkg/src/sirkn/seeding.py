"""Deterministic key derivation and counter-based uniform variates.

Every random quantity in this package is either (a) a pure function of an
integer key, computed by the splitmix-style mixer below, or (b) drawn from a
Philox stream whose 128-bit key is derived the same way.  Both give
reproducible results independent of scheduling or worker count.
"""

from __future__ import annotations

import threading

import numpy as np

MASK64 = (1 << 64) - 1

# Weyl increments / multipliers (splitmix64 finalizer constants plus two
# large odd constants for key chaining).
_GOLDEN = 0x9E3779B97F4A7C15
_CHAIN = 0xC2B2AE3D27D4EB4F
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(_GOLDEN)
_U_CHAIN = np.uint64(_CHAIN)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_ONE = np.uint64(1)

_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def mix64(x: int) -> int:
    """Scalar splitmix64 finalizer on python ints (wraps mod 2**64)."""
    x &= MASK64
    x ^= x >> 30
    x = (x * _M1) & MASK64
    x ^= x >> 27
    x = (x * _M2) & MASK64
    x ^= x >> 31
    return x


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer; `x` must be uint64."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> _U30
    x *= _U_M1
    x ^= x >> _U27
    x *= _U_M2
    x ^= x >> _U31
    return x


def derive_key(*parts: int) -> int:
    """Fold integer parts into one 64-bit key.

    Used for stream ids such as (master_seed, grid_index, replication,
    kind_tag); the result is order-sensitive and collision-resistant enough
    for statistical independence of the derived streams.
    """
    h = _GOLDEN
    for p in parts:
        h = mix64(h ^ (((int(p) & MASK64) + 1) * _CHAIN & MASK64))
    return h


def child_key(key: int, index: int) -> int:
    return mix64(key ^ (((int(index) & MASK64) + 1) * _CHAIN & MASK64))


def child_key_array(key: int, index: np.ndarray) -> np.ndarray:
    idx = index.astype(np.uint64, copy=False)
    return mix64_array(np.uint64(key) ^ (idx + _ONE) * _U_CHAIN)


def chain_key_arrays(keys: np.ndarray, index: np.ndarray) -> np.ndarray:
    """child_key applied elementwise to an array of keys."""
    idx = index.astype(np.uint64, copy=False)
    return mix64_array(keys ^ (idx + _ONE) * _U_CHAIN)


def chain_keys_scalar_index(keys: np.ndarray, index: int) -> np.ndarray:
    """child_key of an array of keys with one shared child index."""
    salt = np.uint64((((int(index) & MASK64) + 1) * _CHAIN) & MASK64)
    return mix64_array(keys ^ salt)


def pair_salt(n: int) -> np.ndarray:
    """The per-index xor salt (index + 1) * CHAIN used by key chaining."""
    return (np.arange(n, dtype=np.uint64) + _ONE) * _U_CHAIN


def to_uniform01(h: np.ndarray) -> np.ndarray:
    return (h >> _U11).astype(np.float64) * _INV53


def uniform01(key: int, index: int) -> float:
    """Uniform in [0, 1), a pure function of (key, index)."""
    return (child_key(key, index) >> 11) * _INV53


def uniform01_array(key: int, index: np.ndarray) -> np.ndarray:
    return (child_key_array(key, index) >> _U11).astype(np.float64) * _INV53


def open01_array(key: int, index: np.ndarray) -> np.ndarray:
    """Uniform in the open interval (0, 1): grid midpoints of 2**-53 cells."""
    h = (child_key_array(key, index) >> _U11).astype(np.float64)
    return (h + 0.5) * _INV53


def open01(key: int, index: int) -> float:
    return ((child_key(key, index) >> 11) + 0.5) * _INV53


# Per-thread Philox generator, re-keyed per run.  Resetting the full bit
# generator state is bit-identical to constructing Generator(Philox(key=k))
# but ~6x faster, which matters for batches of 1e5 short runs.
_local = threading.local()


def stream(key: int) -> np.random.Generator:
    """Return a numpy Generator keyed by `key` (shared per-thread instance).

    The returned generator is valid until the next `stream` call on the same
    thread; engine code draws everything it needs before re-keying.
    """
    gen = getattr(_local, "gen", None)
    if gen is None:
        _local.bitgen = np.random.Philox(key=0)
        _local.gen = gen = np.random.Generator(_local.bitgen)
    bg = _local.bitgen
    st = bg.state
    st["state"]["key"][:] = (key & MASK64, 0)
    st["state"]["counter"][:] = 0
    st["buffer_pos"] = 4
    st["has_uint32"] = 0
    st["uinteger"] = 0
    bg.state = st
    return gen
