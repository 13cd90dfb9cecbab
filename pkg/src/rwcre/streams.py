"""Counter-based random streams.

Every random quantity in a simulation is a pure function of a 64-bit key and
an integer counter, hashed with the SplitMix64 finaliser.  Keys for the walk
and environment noise of each replica are derived from a master seed by a
fixed labelled derivation, so results depend only on ``(seed, replica)`` and
never on how replicas are scheduled across workers.

The numba-compiled helpers and the pure-Python ones produce identical bits;
the Python versions exist for reference implementations and tests.
"""
from __future__ import annotations

import hashlib

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_SITE = 0xD6E8FEB86659FD93
TWO_M53 = 1.0 / (1 << 53)

_U_GOLDEN = np.uint64(GOLDEN)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_U_SITE = np.uint64(_SITE)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)


def label_key(label: str) -> int:
    """Stable 64-bit constant for a stream label."""
    return int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")


WALK = label_key("rwcre/walk")
ENV = label_key("rwcre/environment")
AUX = label_key("rwcre/auxiliary")


# ---------------------------------------------------------------- pure Python
def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_key(master: int, label: int, index: int = 0) -> int:
    """Key of sub-stream ``index`` under ``label`` for a master seed."""
    return mix64(mix64(master ^ label) ^ mix64(index + GOLDEN))


def site_uniform(env_key: int, generation: int, site: int) -> float:
    h = mix64(env_key ^ ((generation * GOLDEN) & MASK64))
    h = mix64((h + site * _SITE) & MASK64)
    return (h >> 11) * TWO_M53


class Stream:
    """Sequential SplitMix64 stream; ``state`` is the counter."""

    def __init__(self, key: int):
        self.state = key & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * TWO_M53


def seed_to_u64(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def numpy_rng(seed: int, label: str, index: int = 0) -> np.random.Generator:
    """numpy Generator for Python-level sampling (limit laws, counterexamples)."""
    return np.random.default_rng(derive_key(seed_to_u64(seed), label_key(label), index))


# ---------------------------------------------------------------- numba
@njit(inline="always", cache=True)
def nb_mix64(z):
    z = (z ^ (z >> _U30)) * _U_M1
    z = (z ^ (z >> _U27)) * _U_M2
    return z ^ (z >> _U31)


@njit(inline="always", cache=True)
def nb_derive_key(master, label, index):
    return nb_mix64(nb_mix64(master ^ label) ^ nb_mix64(np.uint64(index) + _U_GOLDEN))


@njit(inline="always", cache=True)
def nb_site_uniform(env_key, generation, site):
    h = nb_mix64(env_key ^ (np.uint64(generation) * _U_GOLDEN))
    h = nb_mix64(h + np.uint64(site) * _U_SITE)
    return np.float64(h >> _U11) * TWO_M53


@njit(inline="always", cache=True)
def nb_to_unit(h):
    return np.float64(h >> _U11) * TWO_M53
