"""Resampling maps and the schedule quantities derived from them.

A resampling map is stored as its increment rule ``k -> T_k`` (``k >= 1``),
with ``tau(n) = T_1 + ... + T_n``.  Increments are exact Python integers, so
schedules such as ``T_k = 4**k - 4**(k-1)`` or ``m_k = 2**(2**k)`` never
overflow.  An increment may be ``math.inf``: the environment is then never
refreshed again (the frozen map has ``T_1 = inf``).

Asymptotic notions (cooling, L1 convergence of the increment law, the
conditions S1/S2, the g-profile) are only ever reported as diagnostics over
an explicit finite window.
"""
from __future__ import annotations

import bisect
import decimal
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

INF = math.inf

IDENTITY = "identity"
POLYNOMIAL = "polynomial"
EXPONENTIAL = "exponential"
FROZEN = "frozen"
EXPLICIT = "explicit-list"
CUSTOM = "custom-rule"


class ResamplingMap:
    """Resampling map defined by its increments ``T_k``.

    Parameters
    ----------
    rule : callable
        ``rule(k)`` returns ``T_k`` for ``k >= 1``: a positive integer or
        ``math.inf``.  It must be pure.
    kind : str
        Tag used for reporting and config round-trips.
    params : dict
        Parameters of the kind (for reporting).
    """

    def __init__(self, rule: Callable[[int], int | float], kind: str = CUSTOM, params: dict | None = None):
        self._rule = rule
        self.kind = kind
        self.params = dict(params or {})
        self._inc: list = []
        self._tau: list = [0]

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"ResamplingMap({self.kind}{', ' if args else ''}{args})"

    # ------------------------------------------------------------ increments
    def _extend_to(self, k: int) -> None:
        while len(self._inc) < k:
            j = len(self._inc) + 1
            t = self._tau[-1]
            if t == INF:
                T = INF
            else:
                T = self._rule(j)
                if T != INF:
                    if int(T) != T or T < 1:
                        raise ValueError(f"increment T_{j}={T!r} must be a positive integer or inf")
                    T = int(T)
            self._inc.append(T)
            self._tau.append(INF if (t == INF or T == INF) else t + T)

    def increment(self, k: int):
        """``T_k`` for ``k >= 1``."""
        if k < 1:
            raise ValueError("increments are indexed from k = 1")
        self._extend_to(k)
        return self._inc[k - 1]

    def increments(self, count: int) -> list:
        self._extend_to(count)
        return self._inc[:count]

    def tau(self, k: int):
        """``tau(k)``; ``tau(0) = 0``."""
        if k < 0:
            raise ValueError("tau is defined on k >= 0")
        self._extend_to(k)
        return self._tau[k]

    def _cover(self, n: int) -> int:
        while self._tau[-1] <= n:
            self._extend_to(max(2 * len(self._inc), 16))
        return bisect.bisect_right(self._tau, n)

    # ------------------------------------------------------------ schedule
    def block_index(self, n: int) -> int:
        """``ell_n = inf{k : tau(k) > n}``."""
        if n < 0:
            raise ValueError("time must be nonnegative")
        return self._cover(n)

    def schedule_at(self, n: int) -> "BlockSchedule":
        """Partition of ``[0, n]`` into completed blocks and the boundary piece."""
        ell = self.block_index(n)
        lengths = tuple(self._inc[: ell - 1])
        boundary = n - self._tau[ell - 1]
        return BlockSchedule(n=int(n), ell=ell, lengths=lengths, boundary=int(boundary))


@dataclass(frozen=True)
class BlockSchedule:
    """Time partition ``sum(lengths) + boundary == n`` up to horizon ``n``."""

    n: int
    ell: int
    lengths: tuple[int, ...]
    boundary: int

    @property
    def completed(self) -> int:
        return len(self.lengths)

    def weights(self) -> list[Fraction]:
        """``gamma_{k,n} = T_{k,n}/n`` over completed blocks (exact)."""
        if self.n == 0:
            return [Fraction(0)] * len(self.lengths)
        return [Fraction(t, self.n) for t in self.lengths]

    def pieces(self) -> np.ndarray:
        """Truncated block lengths ``T_{k,n}`` for k = 1..ell_n, zero boundary dropped."""
        out = list(self.lengths)
        if self.boundary > 0:
            out.append(self.boundary)
        return np.asarray(out, dtype=np.int64)

    def check(self) -> None:
        if sum(self.lengths) + self.boundary != self.n:
            raise AssertionError("time partition identity violated")


# ---------------------------------------------------------------- constructors
def identity_map() -> ResamplingMap:
    return ResamplingMap(lambda k: 1, IDENTITY)


def frozen_map() -> ResamplingMap:
    return ResamplingMap(lambda k: INF, FROZEN)


def polynomial_map(A: float = 1.0, a: float = 1.0) -> ResamplingMap:
    """Increments ``T_k = max(1, round(A * k**a))``."""
    if A <= 0 or a < 0:
        raise ValueError("polynomial map needs A > 0 and a >= 0")
    return ResamplingMap(lambda k: max(1, round(A * k ** a)), POLYNOMIAL, {"A": A, "a": a})


def exponential_map(B: float = 1.0, b: float = math.log(2.0)) -> ResamplingMap:
    """``tau(k) = round(B * exp(b k))`` for k >= 1 (forced strictly increasing).

    ``B = 1, b = log 2`` gives ``tau(k) = 2**k``.
    """
    if B <= 0 or b <= 0:
        raise ValueError("exponential map needs B > 0 and b > 0")
    base = math.exp(b)
    integral_base = round(base) if abs(base - round(base)) < 1e-12 else None

    def target(k):
        if integral_base is not None and float(B).is_integer():
            return int(B) * integral_base ** k
        try:
            return round(B * base ** k)
        except OverflowError:
            with decimal.localcontext() as ctx:
                ctx.prec = int(b * k / math.log(10)) + 30
                return int((decimal.Decimal(B) * (decimal.Decimal(b) * k).exp()).to_integral_value())

    taus = [0]

    def rule(k):
        while len(taus) <= k:
            taus.append(max(taus[-1] + 1, target(len(taus))))
        return taus[k] - taus[k - 1]

    return ResamplingMap(rule, EXPONENTIAL, {"B": B, "b": b})


def explicit_map(increments: Sequence[int]) -> ResamplingMap:
    """Increments from a list; once the list is exhausted the environment freezes."""
    incs = [int(t) for t in increments]
    if any(t < 1 for t in incs):
        raise ValueError("explicit increments must be positive integers")
    return ResamplingMap(lambda k: incs[k - 1] if k <= len(incs) else INF, EXPLICIT,
                         {"increments": incs})


def power_tau_map(base: int) -> ResamplingMap:
    """``tau(k) = base**k - 1``, i.e. ``T_k = base**k - base**(k-1)``."""
    return ResamplingMap(lambda k: base ** k - base ** (k - 1), CUSTOM, {"rule": f"{base}^k-{base}^(k-1)"})


def counterexample_map() -> ResamplingMap:
    """``T_k = 4**k - 4**(k-1)``, used by the strong-LLN counterexample."""
    m = power_tau_map(4)
    m.params = {"rule": "4^k-4^(k-1)"}
    return m


def double_exponential_map() -> ResamplingMap:
    """Masses ``m_k = 2**(2**k)``."""
    return ResamplingMap(lambda k: 2 ** (2 ** k), CUSTOM, {"rule": "2^(2^k)"})


def alternating_map() -> ResamplingMap:
    """``T_{2k-1} = 1, T_{2k} = k``: Cesaro-divergent but not cooling."""
    return ResamplingMap(lambda j: 1 if j % 2 else j // 2, CUSTOM, {"rule": "alternating(1,k)"})


# ---------------------------------------------------------------- mass measures
@dataclass(frozen=True)
class EmpiricalMassMeasure:
    """``mu_t = sum_k (m_{k,t}/t) delta_{m_{k,t}}`` and its frequency companion.

    ``mass`` and ``frequency`` map a piece length to its (exact) weight;
    zero-length pieces carry no mass but are counted by the frequency
    measure, which puts ``1/ell_t`` on each of the ``ell_t`` pieces.
    """

    t: int
    ell: int
    pieces: tuple[int, ...]
    mass: dict
    frequency: dict

    def total(self) -> Fraction:
        return sum(self.mass.values(), Fraction(0))


def empirical_mass(rmap: ResamplingMap, t: int) -> EmpiricalMassMeasure:
    if t < 1:
        raise ValueError("t must be >= 1")
    sched = rmap.schedule_at(t)
    pieces = list(sched.lengths) + [sched.boundary]
    mass: dict = {}
    for m in pieces:
        if m > 0:
            mass[m] = mass.get(m, Fraction(0)) + Fraction(m, t)
    freq = {m: Fraction(c, sched.ell) for m, c in Counter(pieces).items()}
    return EmpiricalMassMeasure(t, sched.ell, tuple(p for p in pieces if p > 0), mass, freq)


# ---------------------------------------------------------------- g-profile and phases
@dataclass(frozen=True)
class GProfile:
    n: int
    s: float
    x_grid: tuple[float, ...]
    values: tuple[float, ...]
    g_infinity: float


def g_profile(rmap: ResamplingMap, n: int, s: float, x_grid: Sequence[float]) -> GProfile:
    """Finite-``n`` estimate of the fraction of time in sub-critical blocks.

    ``g_n(x) = sum_{k<=n} T_k 1{T_k < x tau(n)**(1/s)} / tau(n)``; the
    estimate of ``g(inf)`` is the value at the largest grid point.
    """
    if not 1.0 < s < 2.0:
        raise ValueError("g-profile is defined for s in (1, 2)")
    if n < 1:
        raise ValueError("n must be >= 1")
    T = rmap.increments(n)
    if any(t == INF for t in T):
        raise ValueError("g-profile needs finite increments")
    if sum(T) > 2 ** 1000:
        raise ValueError("tau(n) exceeds the floating-point range of the profile")
    T = np.asarray(T, dtype=float)
    tau = T.sum()
    scale = tau ** (1.0 / s)
    Ts = np.sort(T)
    cum = np.concatenate([[0.0], np.cumsum(Ts)])
    xs = np.asarray(sorted(float(x) for x in x_grid))
    idx = np.searchsorted(Ts, xs * scale, side="left")
    vals = cum[idx] / tau
    return GProfile(n, s, tuple(xs), tuple(float(v) for v in vals), float(vals[-1]) if len(vals) else 0.0)


@dataclass(frozen=True)
class PolyPhase:
    phase: str  # "gaussian" | "critical" | "stable"
    beta: float | None
    critical_exponent: float
    scale_exponent: float


def critical_exponent(s: float) -> float:
    return 1.0 / (s - 1.0)


def classify_poly_phase(a: float, s: float) -> PolyPhase:
    """Fluctuation phase of RWCRE with ``T_k ~ A k**a`` and ``s`` in (1, 2)."""
    if a <= 0 or not 1.0 < s < 2.0:
        raise ValueError("need a > 0 and s in (1, 2)")
    ac = critical_exponent(s)
    if abs(a - ac) < 1e-12:
        return PolyPhase("critical", None, ac, 1.0 / s)
    if a < ac:
        beta = (a * (3.0 - s) + 1.0) / (2.0 * (a + 1.0))
        return PolyPhase("gaussian", beta, ac, beta)
    return PolyPhase("stable", None, ac, 1.0 / s)


@dataclass(frozen=True)
class CoolingDiagnostics:
    window: int
    tail_start: int
    tail_min: float
    cesaro_mean: float
    max_ratio_tau: float
    max_ratio_sqrt_tau: float
    l1_distance: float
    l2_distance: float


def cooling_diagnostics(rmap: ResamplingMap, window: int) -> CoolingDiagnostics:
    """Finite-window evidence for the regularity conditions on increments.

    Tail quantities range over ``k in [ceil(window/2), window]``; the L1/L2
    distances compare the empirical increment laws ``nu_window`` and
    ``nu_{window // 2}`` weighted by ``T`` and ``T**2``.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    T = rmap.increments(window)
    if any(t == INF for t in T):
        raise ValueError("cooling diagnostics need finite increments")
    Tf = np.asarray(T, dtype=float)
    tau = np.cumsum(Tf)
    start = (window + 1) // 2
    tail = slice(start - 1, window)
    half = window // 2

    def law(m):
        c = Counter(T[:m])
        return {t: v / m for t, v in c.items()}

    nu_w, nu_h = law(window), law(half)
    support = set(nu_w) | set(nu_h)
    diff = {t: abs(nu_w.get(t, 0.0) - nu_h.get(t, 0.0)) for t in support}
    return CoolingDiagnostics(
        window=window,
        tail_start=start,
        tail_min=float(Tf[tail].min()),
        cesaro_mean=float(tau[-1] / window),
        max_ratio_tau=float(np.max(Tf[tail] / tau[tail])),
        max_ratio_sqrt_tau=float(np.max(Tf[tail] / np.sqrt(tau[tail]))),
        l1_distance=float(sum(t * d for t, d in diff.items())),
        l2_distance=float(sum(t * t * d for t, d in diff.items())),
    )


@dataclass(frozen=True)
class StableConditions:
    """Windowed proxies for the stable-limit conditions S1 and S2."""

    n: int
    s1_sup: float
    s1_remainders: dict
    s2_value: float
    s1_holds: bool
    s2_holds: bool


def stable_conditions(rmap: ResamplingMap, n: int, s: float, cutoffs=(2, 8, 32),
                      remainder_tol: float = 0.05, s2_tol: float = 0.05) -> StableConditions:
    """S1: ``sup_m sum_{k<=m} (T_k/tau(m))**(1/s)`` and small-block remainders at ``n``.
    S2: ``max_{k<=n} T_k (log T_k)**(4s) / tau(n)``.

    The booleans compare the values at horizon ``n`` with the given
    tolerances; they are evidence, not proofs.
    """
    T = np.asarray(rmap.increments(n), dtype=float)
    tau = np.cumsum(T)
    root = T ** (1.0 / s)
    sums = np.cumsum(root) / tau ** (1.0 / s)
    rem = {m: float(root[T < m].sum() / tau[-1] ** (1.0 / s)) for m in cutoffs}
    s2 = float(np.max(T * np.log(T) ** (4 * s)) / tau[-1])
    return StableConditions(
        n=n,
        s1_sup=float(sums.max()),
        s1_remainders=rem,
        s2_value=s2,
        s1_holds=bool(max(rem.values()) < remainder_tol),
        s2_holds=bool(s2 < s2_tol),
    )


@dataclass(frozen=True)
class PhaseReport:
    cooling: CoolingDiagnostics
    profile: GProfile | None
    conditions: StableConditions | None
    poly_phase: PolyPhase | None


def phase_report(rmap: ResamplingMap, window: int, s: float | None = None,
                 x_grid: Sequence[float] = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0)) -> PhaseReport:
    cool = cooling_diagnostics(rmap, window)
    prof = cond = poly = None
    if s is not None and 1.0 < s < 2.0:
        prof = g_profile(rmap, window, s, x_grid)
        cond = stable_conditions(rmap, window, s)
        if rmap.kind == POLYNOMIAL:
            poly = classify_poly_phase(rmap.params["a"], s)
    return PhaseReport(cool, prof, cond, poly)
