"""Quenched RWRE and RWCRE simulation.

Every environment value is a pure function of ``(env_key, generation, site)``
(see :mod:`rwcre.streams`), so the compiled walker and the dictionary-backed
:class:`EnvironmentRealization` read the same environment, and a lazily
realized environment is indistinguishable from one sampled eagerly over the
visited window.

Replica ``r`` of a run with master seed ``seed`` uses

* walk noise keyed by ``derive_key(seed, WALK, r)``;
* environment key ``derive_key(env_seed, ENV, r)`` in annealed mode and
  ``derive_key(env_seed, ENV, 0)`` for every replica in quenched mode,

where ``env_seed`` defaults to ``seed``.  Generation ``k`` (block ``k``) reads
the environment at generation index ``k``.
"""
from __future__ import annotations

import math
from fractions import Fraction
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import BinaryIO, Sequence

import numpy as np

from . import _kernels
from .environment import EnvironmentLaw
from .resampling import ResamplingMap
from .streams import ENV, WALK, Stream, seed_to_u64, site_uniform

ANNEALED = "annealed"
QUENCHED = "quenched"
CHUNK = 256
_NO_Y = np.zeros((0, 0), dtype=np.int64)
_NO_PATH = np.zeros(0, dtype=np.int64)


def _omega_from_uniform(u: float, kind: int, values: np.ndarray, cdf: np.ndarray) -> float:
    # mirror of the compiled lookup
    if kind == 0:
        i = 0
        while i < len(values) - 1 and u >= cdf[i]:
            i += 1
        return float(values[i])
    m = len(values) - 1
    pos = u * m
    j = int(pos)
    if j >= m:
        return float(values[m])
    return float(values[j] + (pos - j) * (values[j + 1] - values[j]))


def omega_from_uniforms(u: np.ndarray, kind: int, values: np.ndarray, cdf: np.ndarray) -> np.ndarray:
    """Vectorised form of the uniform-to-``omega`` map used by the walker."""
    u = np.asarray(u, dtype=np.float64)
    if kind == 0:
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(values) - 1)
        return values[idx]
    m = len(values) - 1
    return np.interp(u * m, np.arange(m + 1, dtype=np.float64), values)


class EnvironmentRealization:
    """One generation of the environment, realized site by site on demand.

    Parameters
    ----------
    law : EnvironmentLaw or None
        Site law.  Ignored when ``constant`` is given.
    env_key : int
        Environment key of the replica.
    generation : int
        Refresh index ``k`` this environment belongs to.
    constant : float, optional
        Testing override: ``omega(x) = constant`` at every site.
    """

    def __init__(self, law: EnvironmentLaw | None, env_key: int = 0, generation: int = 1,
                 constant: float | None = None):
        if constant is not None:
            if not 0.0 < constant < 1.0:
                raise ValueError("constant environment must lie in (0, 1)")
            self.tables = (0, np.array([float(constant)]), np.array([1.0]))
        else:
            self.tables = law.kernel_tables()
        self.law = law
        self.env_key = env_key
        self.generation = generation
        self.constant = constant
        self.sites: dict[int, float] = {}

    def omega(self, x: int) -> float:
        w = self.sites.get(x)
        if w is None:
            w = _omega_from_uniform(site_uniform(self.env_key, self.generation, x), *self.tables)
            self.sites[x] = w
        return w


def simulate_rwre(env: EnvironmentRealization, start: int, T: int, rng: Stream,
                  record: bool = False) -> tuple[int, np.ndarray | None]:
    """Run ``T`` steps of the walk in the fixed environment ``env``.

    Returns the displacement ``Z_T - Z_0`` and, when ``record`` is set, the
    positions after each step.  ``rng`` is advanced by ``T`` draws.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    path = np.empty(T, dtype=np.int64) if record else _NO_PATH
    kind, values, cdf = env.tables
    x, state = _kernels.walk_block(np.uint64(env.env_key), env.generation, kind, values, cdf,
                                   np.uint64(rng.state), start, T, path, 0)
    rng.state = int(state)
    return int(x) - start, (path if record else None)


def simulate_rwre_eager(env: EnvironmentRealization, start: int, T: int, rng: Stream) -> np.ndarray:
    """Reference implementation: realize ``[start - T, start + T]`` up front, step in Python."""
    omega = {x: env.omega(x) for x in range(start - T, start + T + 1)}
    x = start
    path = np.empty(T, dtype=np.int64)
    for i in range(T):
        x += 1 if rng.uniform() < omega[x] else -1
        path[i] = x
    return path


@dataclass(frozen=True)
class BlockDecomposition:
    """``X_n = sum(increments) + boundary`` with positions at refresh times."""

    lengths: tuple[int, ...]
    increments: tuple[int, ...]
    boundary_length: int
    boundary: int
    refresh_positions: tuple[int, ...]

    @property
    def position(self) -> int:
        return sum(self.increments) + self.boundary

    def check(self) -> None:
        if self.refresh_positions and self.refresh_positions[-1] != sum(self.increments):
            raise AssertionError("refresh positions inconsistent with increments")
        for T, y in zip(self.lengths + (self.boundary_length,), self.increments + (self.boundary,)):
            if abs(y) > T or (y - T) % 2:
                raise AssertionError("increment violates nearest-neighbour constraints")


@dataclass(frozen=True)
class RwcreResult:
    position: int
    decomposition: BlockDecomposition


def _keys(seed: int, env_seed: int | None) -> tuple[np.uint64, np.uint64]:
    seed = seed_to_u64(seed)
    env = seed if env_seed is None else seed_to_u64(env_seed)
    return np.uint64(seed), np.uint64(env)


def _check_mode(mode: str) -> bool:
    if mode not in (ANNEALED, QUENCHED):
        raise ValueError(f"mode must be {ANNEALED!r} or {QUENCHED!r}")
    return mode == QUENCHED


def simulate_rwcre(law: EnvironmentLaw, rmap: ResamplingMap, n: int, mode: str = ANNEALED,
                   seed: int = 0, replica: int = 0, env_seed: int | None = None) -> RwcreResult:
    """One RWCRE replica up to time ``n`` with its block decomposition."""
    if n < 0:
        raise ValueError("n must be >= 0")
    quenched = _check_mode(mode)
    sched = rmap.schedule_at(n)
    pieces = sched.pieces()
    kind, values, cdf = law.kernel_tables()
    wk, ek = _keys(seed, env_seed)
    out = np.zeros(1, dtype=np.int64)
    y = np.zeros((1, len(pieces)), dtype=np.int64)
    acc = np.zeros(len(pieces), dtype=np.int64)
    _kernels.run_replicas(pieces, kind, values, cdf, wk, ek, np.uint64(WALK), np.uint64(ENV),
                          quenched, replica, replica + 1, out, acc, acc.copy(), y)
    ys = [int(v) for v in y[0]]
    done = sched.completed
    incs = tuple(ys[:done])
    boundary = ys[done] if sched.boundary > 0 else 0
    decomp = BlockDecomposition(sched.lengths, incs, sched.boundary, boundary,
                                tuple(int(v) for v in np.cumsum(incs, dtype=np.int64)))
    return RwcreResult(int(out[0]), decomp)


@dataclass(frozen=True)
class BatchResult:
    """Replica outcomes of one horizon.

    ``block_sum[k]`` and ``block_sumsq[k]`` are exact integer sums of ``Y_k``
    and ``Y_k**2`` over replicas for every piece of the truncated schedule
    (the last entry is the boundary piece when ``has_boundary``).
    """

    n: int
    seed: int
    mode: str
    pieces: np.ndarray
    has_boundary: bool
    positions: np.ndarray
    block_sum: list
    block_sumsq: list
    increments: np.ndarray | None

    @property
    def replicas(self) -> int:
        return len(self.positions)


def default_workers() -> int:
    env = os.environ.get("RWCRE_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def simulate_batch(law: EnvironmentLaw, rmap: ResamplingMap, n: int, replicas: int, seed: int = 0,
                   mode: str = ANNEALED, env_seed: int | None = None, workers: int | None = None,
                   record_increments: bool = False, offset: int = 0) -> BatchResult:
    """Replicas ``offset .. offset + replicas - 1`` of the RWCRE at horizon ``n``.

    Replicas are split into fixed chunks of ``CHUNK``; each chunk is a pure
    function of its replica range, and per-chunk integer sums are combined in
    chunk order, so the result does not depend on ``workers``.
    """
    if n < 0 or replicas < 1 or offset < 0:
        raise ValueError("need n >= 0, replicas >= 1 and offset >= 0")
    quenched = _check_mode(mode)
    sched = rmap.schedule_at(n)
    pieces = sched.pieces()
    nb = len(pieces)
    if nb and CHUNK * int(pieces.max()) ** 2 >= 2 ** 63:
        raise OverflowError("block length too large for exact 64-bit accumulation")
    kind, values, cdf = law.kernel_tables()
    wk, ek = _keys(seed, env_seed)
    positions = np.zeros(replicas, dtype=np.int64)
    ys = np.zeros((replicas, nb), dtype=np.int64) if record_increments else None
    starts = list(range(0, replicas, CHUNK))

    def job(r0):
        r1 = min(r0 + CHUNK, replicas)
        s = np.zeros(nb, dtype=np.int64)
        q = np.zeros(nb, dtype=np.int64)
        y = np.zeros((r1 - r0, nb), dtype=np.int64) if record_increments else _NO_Y
        _kernels.run_replicas(pieces, kind, values, cdf, wk, ek, np.uint64(WALK), np.uint64(ENV),
                              quenched, offset + r0, offset + r1, positions[r0:r1], s, q, y)
        if record_increments:
            ys[r0:r1] = y
        return s, q

    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(starts) == 1:
        parts = [job(r0) for r0 in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, starts))
    total = [0] * nb
    total_sq = [0] * nb
    for s, q in parts:
        for k in range(nb):
            total[k] += int(s[k])
            total_sq[k] += int(q[k])
    return BatchResult(n, int(seed), mode, pieces, sched.boundary > 0, positions, total, total_sq, ys)


# ---------------------------------------------------------------- counterexample
@dataclass(frozen=True)
class CounterexampleFamily:
    """Block values ``X^{(k)}_m = m g_m(U_k)`` with three bands on (0, 1).

    ``g_m = +1`` on ``(0, 1/(2 log2(1+m)))``, ``-1`` on
    ``[1/(2 log2 m), 1/log2(1+m))`` and ``0`` elsewhere.  For small ``m`` the
    second band can be empty (``m = 1``) and the bands leave a gap; all
    leftover measure goes to the value 0, so the three probabilities sum to 1.
    """

    def band(self, m: int) -> tuple[float, float, float]:
        """``(upper edge of the +1 band, lower and upper edge of the -1 band)``."""
        hi = 1.0 / math.log2(1 + m)
        lo = math.inf if m < 2 else 1.0 / (2.0 * math.log2(m))
        return 0.5 * hi, lo, hi

    def plus_probability(self, m: int) -> float:
        return self.band(m)[0]

    def minus_probability(self, m: int) -> float:
        _, lo, hi = self.band(m)
        return max(0.0, hi - lo)

    def value(self, m: int, u: float) -> int:
        """``g_m(u)``."""
        plus, lo, hi = self.band(m)
        if 0.0 < u < plus:
            return 1
        if lo <= u < hi:
            return -1
        return 0

    def both_signs_probability(self, rmap: ResamplingMap, K: int) -> float:
        """P(g_k = +1 for some k <= K and g_j = -1 for some j <= K)."""
        lp = lq = lpq = 0.0
        for m in rmap.increments(K):
            p, q = self.plus_probability(m), self.minus_probability(m)
            lp += math.log1p(-p)
            lq += math.log1p(-q)
            lpq += math.log1p(-(p + q))
        return 1.0 - math.exp(lp) - math.exp(lq) + math.exp(lpq)


@dataclass(frozen=True)
class CounterexampleTables:
    """Per-block bands and ratio coefficients of a fixed schedule."""

    T: list
    plus: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    keep: np.ndarray  # tau(k-1)/tau(k)
    fresh: np.ndarray  # T_k/tau(k)


def counterexample_tables(family: CounterexampleFamily, rmap: ResamplingMap, K: int) -> CounterexampleTables:
    T = rmap.increments(K)
    bands = np.array([family.band(m) for m in T])
    keep = np.empty(K)
    fresh = np.empty(K)
    tau = 0
    for k, m in enumerate(T):
        keep[k] = tau / (tau + m)
        fresh[k] = m / (tau + m)
        tau += m
    return CounterexampleTables(T, bands[:, 0], bands[:, 1], bands[:, 2], keep, fresh)


@dataclass(frozen=True)
class CounterexamplePath:
    """Block signs ``g_k`` and the ratios ``X_{tau(k)}/tau(k)``, ``k = 1..K``."""

    signs: np.ndarray
    ratios: np.ndarray
    lengths: list

    def position(self, k: int) -> int:
        """Exact ``X_{tau(k)}``."""
        return sum(int(g) * m for g, m in zip(self.signs[:k], self.lengths[:k]))

    def deviations(self) -> np.ndarray:
        """``|X_{tau(k)}/tau(k) - X^{(k)}_{T_k}/T_k|`` in floating point."""
        return np.abs(self.ratios - self.signs)

    def deviation_bound_holds(self, bound: float = 0.5, slack: float = 1e-9) -> bool:
        """Check the deviation bound on every block.

        Blocks whose floating-point deviation lies within ``slack`` of the
        bound are re-checked in exact integer arithmetic.
        """
        dev = self.deviations()
        if np.any(dev > bound + slack):
            return False
        close = np.nonzero(dev > bound - slack)[0]
        for k in close:
            tau = sum(self.lengths[: k + 1])
            d = abs(self.position(k + 1) - int(self.signs[k]) * tau)
            if Fraction(d, tau) > Fraction(bound):
                return False
        return True


def sample_counterexample_path(family: CounterexampleFamily, rmap: ResamplingMap, K: int,
                               rng: np.random.Generator,
                               tables: CounterexampleTables | None = None) -> CounterexamplePath:
    """Gradual sum ``X_{tau(k)} = sum_{j<=k} X^{(j)}_{T_j}`` for ``k <= K``.

    Block values are drawn directly from the uniforms ``U_k``.  Ratios follow
    ``r_k = r_{k-1} tau(k-1)/tau(k) + g_k T_k/tau(k)`` with correctly rounded
    coefficients; the recursion contracts, so rounding does not accumulate.
    Pass ``tables`` (from :func:`counterexample_tables`) to reuse the
    schedule across many paths.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    tab = tables if tables is not None else counterexample_tables(family, rmap, K)
    u = rng.random(K)
    signs = np.where((u > 0.0) & (u < tab.plus), 1, np.where((u >= tab.lo) & (u < tab.hi), -1, 0))
    ratios = _kernels.gradual_ratios(signs.astype(np.float64), tab.keep, tab.fresh)
    return CounterexamplePath(signs.astype(np.int64), ratios, tab.T)


# ---------------------------------------------------------------- trajectories
def dump_trajectory(path: Sequence[int], checkpoints: Sequence[int] | None, fh: BinaryIO) -> int:
    """Write positions (after step ``t`` for each checkpoint ``t >= 1``) as int64 little-endian.

    Returns the number of bytes written.
    """
    arr = np.asarray(path, dtype=np.int64)
    if checkpoints is not None:
        arr = arr[np.asarray(checkpoints, dtype=np.int64) - 1]
    data = arr.astype("<i8").tobytes()
    fh.write(data)
    return len(data)


def load_trajectory(data: bytes) -> np.ndarray:
    return np.frombuffer(data, dtype="<i8").astype(np.int64)
