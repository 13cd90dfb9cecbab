"""Site laws of the random environment and the fluctuation parameter ``s``.

A site law ``alpha`` is the distribution of ``omega``, the probability of a
right jump.  Everything regime-related is read off ``rho = (1 - omega)/omega``:
the sign of ``E[log rho]`` decides recurrence versus transience, and for
transient laws the root ``s > 0`` of ``E[rho**s] = 1`` selects the fluctuation
regime:

=============  ======================
``s``          regime
=============  ======================
0              Sinai
(0, 1)         sub-ballistic
1              Cauchy-boundary
(1, 2)         ballistic-stable
2              critically-diffusive
> 2            diffusive
=============  ======================

Non-lattice condition.  The classical fluctuation limits assume the law of
``log rho`` is non-lattice.  A two-point law is lattice exactly when its two
``log rho`` values are rationally related, which is a number-theoretic
property we do not try to decide; the flag ``non_lattice`` is an assertion
made by the caller and is carried along untouched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import BracketFailure, ConfigError, DegenerateLaw, EllipticityViolation

FINITE = "finite-support"
CONTINUOUS = "clipped-continuous"

SINAI = "Sinai"
SUB_BALLISTIC = "sub-ballistic"
CAUCHY = "Cauchy-boundary"
BALLISTIC_STABLE = "ballistic-stable"
CRITICAL_DIFFUSIVE = "critically-diffusive"
DIFFUSIVE = "diffusive"

RECURRENT = "recurrent"
RIGHT = "right-transient"
LEFT = "left-transient"

WEIGHT_TOL = 1e-12
ZERO_DRIFT_TOL = 1e-10
BOUNDARY_TOL = 1e-9
QUAD_PANELS = 2048
QUANTILE_POINTS = 1 << 14


@dataclass(frozen=True)
class EnvironmentLaw:
    """Law ``alpha`` of a single site's right-jump probability.

    Construct through :func:`make_two_point_law`, :func:`finite_law` or
    :func:`clipped_beta_law`, which validate the invariants.
    """

    kind: str
    atoms: tuple[tuple[float, float], ...] = ()
    ellipticity: float = 0.5
    non_lattice: bool = False
    beta: tuple[float, float] | None = None

    @property
    def non_degenerate(self) -> bool:
        return self.kind == CONTINUOUS or len({w for w, _ in self.atoms}) >= 2

    # quadrature nodes/weights (normalised) for the continuous kind
    @cached_property
    def _nodes(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == FINITE:
            omega = np.array([a for a, _ in self.atoms])
            weight = np.array([p for _, p in self.atoms])
            return omega, weight
        c = self.ellipticity
        edges = np.linspace(c, 1.0 - c, QUAD_PANELS + 1)
        x, w = np.polynomial.legendre.leggauss(4)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        omega = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weight = (half[:, None] * w[None, :]).ravel() * stats.beta.pdf(omega, *self.beta)
        return omega, weight / weight.sum()

    def expect(self, f) -> float:
        """``E[f(omega)]`` (exact for finite support, quadrature otherwise)."""
        omega, weight = self._nodes
        return float(np.dot(weight, f(omega)))

    @property
    def mean_omega(self) -> float:
        return self.expect(lambda w: w)

    @property
    def log_rho_mean(self) -> float:
        return self.expect(lambda w: np.log1p(-w) - np.log(w))

    @property
    def rho_support(self) -> tuple[float, ...]:
        if self.kind != FINITE:
            raise ValueError("rho support is only tabulated for finite-support laws")
        return tuple((1.0 - w) / w for w, _ in self.atoms)

    def mirrored(self) -> "EnvironmentLaw":
        """Law of ``1 - omega``."""
        if self.kind == FINITE:
            return finite_law([(1.0 - w, p) for w, p in reversed(self.atoms)], non_lattice=self.non_lattice)
        a, b = self.beta
        return clipped_beta_law(b, a, self.ellipticity, non_lattice=self.non_lattice)

    def kernel_tables(self) -> tuple[int, np.ndarray, np.ndarray]:
        """Arrays consumed by the compiled walker.

        Finite laws are passed as ``(0, values, cdf)``.  Continuous laws are
        passed as ``(1, quantile_table, empty)``; the walker interpolates the
        quantile function linearly between ``QUANTILE_POINTS`` nodes.
        """
        if self.kind == FINITE:
            values = np.array([w for w, _ in self.atoms], dtype=np.float64)
            cdf = np.cumsum([p for _, p in self.atoms]).astype(np.float64)
            cdf[-1] = 1.0
            return 0, values, cdf
        return 1, self._quantile_table, np.zeros(0)

    @cached_property
    def _quantile_table(self) -> np.ndarray:
        c = self.ellipticity
        dist = stats.beta(*self.beta)
        lo, hi = dist.cdf(c), dist.cdf(1.0 - c)
        u = np.linspace(0.0, 1.0, QUANTILE_POINTS + 1)
        table = dist.ppf(lo + u * (hi - lo))
        return np.clip(table, c, 1.0 - c)


@dataclass(frozen=True)
class RegimeInfo:
    log_rho_mean: float
    s: float
    regime: str
    direction: str


# ------------------------------------------------------------------ builders
def finite_law(atoms: Sequence[tuple[float, float]], non_lattice: bool = False) -> EnvironmentLaw:
    """Finite-support law from ``(omega, weight)`` pairs; equal atoms are merged."""
    if len(atoms) == 0:
        raise ConfigError("law needs at least one atom", "atoms")
    merged: dict[float, float] = {}
    for i, pair in enumerate(atoms):
        try:
            w, p = (float(v) for v in pair)
        except (TypeError, ValueError):
            raise ConfigError("atom must be a pair (omega, weight)", f"atoms[{i}]") from None
        if not (0.0 < w < 1.0) or not math.isfinite(w):
            raise EllipticityViolation(f"omega={w} must lie strictly inside (0, 1)", f"atoms[{i}]", index=i)
        if p < 0 or not math.isfinite(p):
            raise ConfigError(f"weight {p} must be nonnegative", f"atoms[{i}]")
        merged[w] = merged.get(w, 0.0) + p
    if abs(sum(merged.values()) - 1.0) > WEIGHT_TOL:
        raise ConfigError(f"weights sum to {sum(merged.values())!r}, not 1", "atoms")
    kept = tuple(sorted((w, p) for w, p in merged.items() if p > 0))
    if len(kept) < 2:
        raise DegenerateLaw("law must charge at least two distinct values of omega", "atoms")
    c = min(min(w, 1.0 - w) for w, _ in kept)
    return EnvironmentLaw(FINITE, kept, ellipticity=c, non_lattice=bool(non_lattice))


def make_two_point_law(p_low: float, p_high: float, weight_low: float,
                       non_lattice: bool = False) -> EnvironmentLaw:
    """``alpha = weight_low * delta_{p_low} + (1 - weight_low) * delta_{p_high}``."""
    for i, p in enumerate((p_low, p_high)):
        if not 0.0 < p < 1.0:
            raise EllipticityViolation(f"omega={p} must lie strictly inside (0, 1)", f"atoms[{i}]", index=i)
    if p_low == p_high:
        raise DegenerateLaw("p_low == p_high gives a degenerate law")
    if p_low > p_high:
        raise ConfigError("need p_low <= p_high", "p_low")
    if not 0.0 < weight_low < 1.0:
        raise ConfigError("weight_low must lie in (0, 1)", "weight_low")
    return finite_law([(p_low, weight_low), (p_high, 1.0 - weight_low)], non_lattice=non_lattice)


def law_from_rho(rho_values: Sequence[float], weights: Sequence[float],
                 non_lattice: bool = False) -> EnvironmentLaw:
    """Finite law specified through ``rho = (1 - omega)/omega``."""
    return finite_law([(1.0 / (1.0 + r), p) for r, p in zip(rho_values, weights)], non_lattice)


def clipped_beta_law(a: float, b: float, ellipticity: float, non_lattice: bool = True) -> EnvironmentLaw:
    """Beta(a, b) density restricted to ``[c, 1 - c]``."""
    if not 0.0 < ellipticity < 0.5:
        raise EllipticityViolation("ellipticity constant must lie in (0, 1/2)", "ellipticity")
    if a <= 0 or b <= 0:
        raise ConfigError("Beta parameters must be positive", "beta")
    return EnvironmentLaw(CONTINUOUS, (), ellipticity=float(ellipticity),
                          non_lattice=bool(non_lattice), beta=(float(a), float(b)))


# ------------------------------------------------------------------ moments
def rho_moment(law: EnvironmentLaw, s: float) -> float:
    """``E[rho**s]``."""
    if s == 0:
        return 1.0
    return law.expect(lambda w: np.exp(s * (np.log1p(-w) - np.log(w))))


def _rho_moment_dlog(law: EnvironmentLaw, s: float) -> float:
    """``E[rho**s log rho]``, the derivative of :func:`rho_moment` in ``s``."""
    def f(w):
        lr = np.log1p(-w) - np.log(w)
        return np.exp(s * lr) * lr
    return law.expect(f)


def classify_s(s: float) -> str:
    if s == 0:
        return SINAI
    if math.isinf(s):
        return DIFFUSIVE
    for edge, name in ((1.0, CAUCHY), (2.0, CRITICAL_DIFFUSIVE)):
        if abs(s - edge) < BOUNDARY_TOL:
            return name
    if s < 1:
        return SUB_BALLISTIC
    if s < 2:
        return BALLISTIC_STABLE
    return DIFFUSIVE


def solve_s(law: EnvironmentLaw, tol: float = 1e-13, s_max: float = 64.0,
            strict: bool = False) -> RegimeInfo:
    """Fluctuation parameter by bracketed bisection on ``log E[rho**s]``.

    Left-transient laws are mirrored first.  If ``E[rho**s] - 1`` does not
    change sign below ``s_max`` the root is reported as ``inf`` (diffusive),
    or :class:`BracketFailure` is raised when ``strict``.
    """
    m = law.log_rho_mean
    if abs(m) <= ZERO_DRIFT_TOL:
        return RegimeInfo(m, 0.0, SINAI, RECURRENT)
    if m > 0:
        inner = solve_s(law.mirrored(), tol=tol, s_max=s_max, strict=strict)
        return RegimeInfo(m, inner.s, inner.regime, LEFT)

    def f(s):
        return math.log(rho_moment(law, s))

    lo, hi = 0.0, 1.0
    while f(hi) <= 0:
        lo, hi = hi, 2.0 * hi
        if hi > s_max:
            if strict:
                raise BracketFailure(f"E[rho^s] - 1 has no sign change on (0, {s_max}]")
            return RegimeInfo(m, math.inf, DIFFUSIVE, RIGHT)
    # f < 0 on (0, root) and f > 0 beyond it (log-convexity, f(0)=0, f'(0)<0)
    while True:
        mid = 0.5 * (lo + hi)
        val = rho_moment(law, mid) - 1.0
        if abs(val) < tol or hi - lo < 1e-15 * max(1.0, hi):
            break
        if val < 0:
            lo = mid
        else:
            hi = mid
    return RegimeInfo(m, mid, classify_s(mid), RIGHT)


def solve_s_newton(law: EnvironmentLaw, start: float | None = None, tol: float = 1e-14,
                   max_iter: int = 200) -> float:
    """Newton iteration for ``E[rho**s] = 1`` on a right-transient law.

    Independent of :func:`solve_s`; started right of the root, where the
    convexity of ``s -> E[rho**s]`` makes the iterates decrease monotonically.
    """
    if law.log_rho_mean >= 0:
        raise ValueError("Newton solver expects a right-transient law")
    s = start
    if s is None:
        s = 1.0
        while rho_moment(law, s) <= 1.0:
            s *= 2.0
            if s > 1e4:
                raise BracketFailure("no root found for Newton start")
    for _ in range(max_iter):
        g = rho_moment(law, s) - 1.0
        step = g / _rho_moment_dlog(law, s)
        s -= step
        if abs(step) < tol * max(1.0, s):
            return s
    raise BracketFailure("Newton iteration did not converge")


def sample_site(law: EnvironmentLaw, rng: np.random.Generator) -> float:
    """One draw of ``omega`` from ``law``."""
    if law.kind == FINITE:
        u = rng.random()
        acc = 0.0
        for w, p in law.atoms:
            acc += p
            if u < acc:
                return w
        return law.atoms[-1][0]
    c = law.ellipticity
    while True:
        w = rng.beta(*law.beta)
        if c <= w <= 1.0 - c:
            return float(w)
