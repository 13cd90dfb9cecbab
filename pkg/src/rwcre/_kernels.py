"""Compiled inner loops of the walker.

The environment of generation ``k`` at site ``x`` is ``F(env_key, k, x)``
with ``F`` a counter-based hash, so a site is "sampled" the first time it is
read and every later read returns the same value: lazy realization over the
visited window with O(1) memory.  Walk noise is a SplitMix64 stream keyed per
replica.
"""
import numpy as np
from numba import njit

from .streams import (_U_GOLDEN, nb_derive_key, nb_mix64, nb_site_uniform, nb_to_unit)


@njit(inline="always", cache=True)
def _omega(u, law_kind, values, cdf):
    if law_kind == 0:
        i = 0
        last = values.shape[0] - 1
        while i < last and u >= cdf[i]:
            i += 1
        return values[i]
    m = values.shape[0] - 1
    pos = u * m
    j = int(pos)
    if j >= m:
        return values[m]
    return values[j] + (pos - j) * (values[j + 1] - values[j])


@njit(nogil=True, cache=True)
def walk_block(env_key, generation, law_kind, values, cdf, state, x, T, path, path_offset):
    """Advance one block of ``T`` steps from ``x``; returns (x, state).

    When ``path`` is non-empty, positions after each step are written to
    ``path[path_offset + i]``.
    """
    record = path.shape[0] > 0
    for i in range(T):
        w = _omega(nb_site_uniform(env_key, generation, x), law_kind, values, cdf)
        state = state + _U_GOLDEN
        if nb_to_unit(nb_mix64(state)) < w:
            x += 1
        else:
            x -= 1
        if record:
            path[path_offset + i] = x
    return x, state


@njit(nogil=True, cache=True)
def run_replicas(pieces, law_kind, values, cdf, walk_master, env_master, walk_label, env_label,
                 quenched, r0, r1, out_x, block_sum, block_sq, record_y):
    """Simulate replicas ``r0 <= r < r1`` over the truncated schedule ``pieces``.

    ``out_x[r - r0]`` receives ``X_n``; ``block_sum``/``block_sq`` accumulate
    the integer sums of ``Y_k`` and ``Y_k**2`` (exact, hence order free);
    ``record_y`` (shape ``(r1 - r0, len(pieces))`` or empty) stores the
    increments themselves.
    """
    nb = pieces.shape[0]
    record = record_y.shape[0] > 0
    empty = np.empty(0, dtype=np.int64)
    for r in range(r0, r1):
        state = nb_derive_key(walk_master, walk_label, r)
        if quenched:
            env_key = nb_derive_key(env_master, env_label, 0)
        else:
            env_key = nb_derive_key(env_master, env_label, r)
        x = 0
        for k in range(nb):
            x0 = x
            x, state = walk_block(env_key, k + 1, law_kind, values, cdf, state, x, pieces[k], empty, 0)
            y = x - x0
            block_sum[k] += y
            block_sq[k] += y * y
            if record:
                record_y[r - r0, k] = y
        out_x[r - r0] = x


@njit(nogil=True, cache=True)
def quenched_block_law(omega, T):
    """Exact law of ``Z_T`` started at 0 in a fixed environment.

    ``omega[j]`` is the right-jump probability at site ``j - (T - 1)``.
    Returns probabilities over positions ``-T..T`` (length ``2T + 1``).
    """
    size = 2 * T + 1
    p = np.zeros(size)
    q = np.zeros(size)
    p[T] = 1.0
    for t in range(T):
        q[:] = 0.0
        lo = T - t
        hi = T + t
        for i in range(lo, hi + 1, 2):
            m = p[i]
            if m == 0.0:
                continue
            w = omega[i - 1]
            q[i + 1] += m * w
            q[i - 1] += m * (1.0 - w)
        p, q = q, p
    return p


@njit(cache=True)
def gradual_ratios(signs, keep, fresh):
    """``r_k = r_{k-1} keep_k + g_k fresh_k`` from ``r_0 = 0``."""
    out = np.empty(signs.shape[0])
    r = 0.0
    for k in range(signs.shape[0]):
        r = r * keep[k] + signs[k] * fresh[k]
        out[k] = r
    return out
