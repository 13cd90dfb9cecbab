"""Reference samplers for the fluctuation limits of RWCRE.

Stable law
----------
The totally left-skewed stable law ``W`` used here has characteristic function
``E[exp(iuW)] = exp(-b |u|**s (1 + i sgn(u) tan(pi s / 2)))`` with
``1 < s < 2``.  In the ``S(alpha, beta, sigma, mu)`` parametrisation, whose
log-characteristic function is
``-sigma**alpha |u|**alpha (1 - i beta sgn(u) tan(pi alpha / 2)) + i mu u``,
matching the two exponents term by term gives

    alpha = s,   beta = -1,   sigma = b**(1/s),   mu = 0,

and ``mu = 0`` is the mean because ``alpha > 1``.  Draws use the
Chambers-Mallows-Stuck transformation of ``V ~ U(-pi/2, pi/2)`` and
``E ~ Exp(1)``:

    B = arctan(beta tan(pi alpha/2)) / alpha
    S = (1 + beta**2 tan(pi alpha/2)**2) ** (1/(2 alpha))
    X = S sin(alpha (V + B)) / cos(V)**(1/alpha)
          * (cos(V - alpha (V + B)) / E) ** ((1 - alpha)/alpha)

and ``W = sigma X``.

Tempered stable laws
--------------------
For a one-sided Levy density ``lambda`` on ``(-inf, 0)`` the law ``W_lambda``
has ``log E[exp(iuW)] = int (e^{iux} - 1 - iux) lambda(x) dx``.  It is
sampled as compensated compound-Poisson jumps below ``-epsilon`` plus a
centred Gaussian carrying the variance ``int_{-epsilon}^0 x**2 lambda``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .environment import SINAI, EnvironmentLaw, solve_s
from .errors import QuadratureFailure
from .resampling import frozen_map
from .streams import AUX, derive_key
from .walker import simulate_batch

QUAD_RTOL = 1e-10
TABLE_POINTS = 1 << 12
JUMP_BATCH = 1 << 22
LOG_DEPTH = 60.0


# ---------------------------------------------------------------- stable
@dataclass(frozen=True)
class StableParams:
    s: float
    b: float = 1.0

    def __post_init__(self):
        if not 1.0 < self.s < 2.0:
            raise ValueError("stability index must lie in (1, 2)")
        if not (0.0 < self.b < math.inf):
            raise ValueError("scale b must be finite and positive")

    def characteristic_function(self, u):
        u = np.asarray(u, dtype=np.float64)
        t = math.tan(math.pi * self.s / 2)
        return np.exp(-self.b * np.abs(u) ** self.s * (1 + 1j * np.sign(u) * t))


def sample_stable(params: StableParams, rng: np.random.Generator, size=None):
    """Mean-zero, totally left-skewed stable draws (see module notes)."""
    a = params.s
    beta = -1.0
    sigma = params.b ** (1.0 / a)
    t = math.tan(math.pi * a / 2)
    B = math.atan(beta * t) / a
    S = (1 + beta * beta * t * t) ** (1 / (2 * a))
    V = rng.uniform(-math.pi / 2, math.pi / 2, size)
    E = rng.standard_exponential(size)
    X = S * np.sin(a * (V + B)) / np.cos(V) ** (1 / a) * (np.cos(V - a * (V + B)) / E) ** ((1 - a) / a)
    return sigma * X


# ---------------------------------------------------------------- Levy densities
def _quad(f, a, b, what):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=500)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(f"{what}: {exc}") from None
    if not math.isfinite(val):
        raise QuadratureFailure(f"{what} is not finite")
    return val


@dataclass(frozen=True)
class LevyDensity:
    """One-sided Levy density ``x -> lambda(x)`` on ``[-support, 0)``.

    Build with :func:`critical_density` or :func:`profile_density`.
    ``breaks`` are the values of ``t = -x`` where ``lambda`` jumps; quadrature
    is split there, and the piece touching 0 is integrated in ``log t``.
    """

    kind: str
    rule: Callable[[float], float]
    support: float
    breaks: tuple[float, ...] = ()
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.rule(x)

    def _pieces(self, lo: float, hi: float):
        """Sub-intervals of ``[lo, hi]`` in ``t = -x`` split at the break points."""
        pts = sorted({lo, hi, *[b for b in self.breaks if lo < b < hi]})
        return list(zip(pts[:-1], pts[1:]))

    def moment(self, f: Callable[[float], float], lo: float = 0.0, hi: float | None = None) -> float:
        """``int_{-hi}^{-lo} f(x) lambda(x) dx`` over ``t = -x in [lo, hi]``."""
        hi = self.support if hi is None else min(hi, self.support)
        if hi <= lo:
            return 0.0
        total = 0.0
        for a, b in self._pieces(lo, hi):
            if a == 0.0:
                # log variables near the origin
                g = lambda y: f(-math.exp(y)) * self.rule(-math.exp(y)) * math.exp(y)  # noqa: E731
                y0 = math.log(b) - LOG_DEPTH
                part = _quad(g, y0, math.log(b), "moment near 0")
                # the integrand must have died out where the log-range is cut
                if abs(g(y0)) > 1e-10 * max(1.0, abs(part)):
                    raise QuadratureFailure("moment diverges at the origin")
                total += part
            else:
                total += _quad(lambda t: f(-t) * self.rule(-t), a, b, "moment")
        return total

    @cached_property
    def second_moment(self) -> float:
        return self.moment(lambda x: x * x)

    def log_characteristic(self, u: float) -> complex:
        """``int (e^{iux} - 1 - iux) lambda(x) dx`` by quadrature."""
        def re(x):
            ux = u * x
            if abs(ux) < 1e-4:
                return -ux * ux / 2 + ux ** 4 / 24
            return math.cos(ux) - 1.0

        def im(x):
            ux = u * x
            if abs(ux) < 1e-4:
                return -ux ** 3 / 6
            return math.sin(ux) - ux

        return complex(self.moment(re), self.moment(im))

    def characteristic_function(self, u: float) -> complex:
        return complex(np.exp(self.log_characteristic(u)))

    def approximate_characteristic(self, u: float, epsilon: float) -> complex:
        """Characteristic function of the ``epsilon``-truncated sampler."""
        def re(x):
            return math.cos(u * x) - 1.0

        def im(x):
            return math.sin(u * x) - u * x

        big = complex(self.moment(re, epsilon), self.moment(im, epsilon))
        small = self.moment(lambda x: x * x, 0.0, epsilon)
        return complex(np.exp(big - 0.5 * u * u * small))


def critical_density(c: float, r: float, s: float) -> LevyDensity:
    """``lambda_{c,r}(x) = c |x|**(-s-1) (1 + x/r)_+`` for ``x < 0``."""
    if c < 0 or r <= 0 or not 1.0 < s < 2.0:
        raise ValueError("need c >= 0, r > 0 and s in (1, 2)")

    def rule(x):
        if x >= 0 or x <= -r:
            return 0.0
        return c * (-x) ** (-s - 1) * (1 + x / r)

    return LevyDensity("critical", rule, r, (), {"c": c, "r": r, "s": s})


def profile_density(K0: float, nu: float, s: float, atoms: Sequence[float], masses: Sequence[float],
                    check_points: int = 4096) -> LevyDensity:
    """Density generated by a step profile ``g = sum_j masses[j] delta_{atoms[j]}``.

    ``lambda(-t) = K0 t**(-s) sum_{atoms[j] >= t/nu} (nu**s/t - (s-1)/atoms[j]) masses[j]``.
    ``K0`` and ``nu`` are free inputs.  Raises ``ValueError`` when the
    resulting density is negative somewhere.
    """
    if K0 < 0 or nu <= 0 or not 1.0 < s < 2.0:
        raise ValueError("need K0 >= 0, nu > 0 and s in (1, 2)")
    xs = np.asarray(atoms, dtype=np.float64)
    ms = np.asarray(masses, dtype=np.float64)
    if xs.shape != ms.shape or np.any(xs <= 0) or np.any(ms < 0):
        raise ValueError("atoms must be positive and masses nonnegative")
    order = np.argsort(xs)
    xs, ms = xs[order], ms[order]
    # suffix sums over atoms >= t/nu
    suf_m = np.concatenate([np.cumsum(ms[::-1])[::-1], [0.0]])
    suf_inv = np.concatenate([np.cumsum((ms / xs)[::-1])[::-1], [0.0]])
    nus = nu ** s

    def rule(x):
        if x >= 0:
            return 0.0
        t = -x
        j = int(np.searchsorted(xs, t / nu, side="left"))
        return K0 * t ** (-s) * (nus / t * suf_m[j] - (s - 1) * suf_inv[j])

    support = float(nu * xs[-1]) if len(xs) else 0.0
    breaks = tuple(float(nu * x) for x in xs)
    dens = LevyDensity("profile", rule, support, breaks,
                       {"K0": K0, "nu": nu, "s": s, "atoms": tuple(xs), "masses": tuple(ms)})
    # on each segment lambda(-t) has the sign of (A/t - B), which is monotone in t,
    # so checking just below every break point suffices; the grid is a safety net
    probe = [b * (1 - 1e-12) for b in breaks] + list(np.linspace(support / check_points, support, check_points))
    if any(rule(-t) < -1e-12 * max(1.0, abs(rule(-t / 2))) for t in probe if t > 0):
        raise ValueError("profile density is negative somewhere; adjust K0/nu/s or the profile")
    return dens


class _JumpTable:
    """Inverse-CDF table of the jump law ``lambda`` restricted to ``t in [epsilon, support]``."""

    def __init__(self, density: LevyDensity, epsilon: float, points: int = TABLE_POINTS):
        lo, hi = math.log(epsilon), math.log(density.support)
        grid = np.linspace(lo, hi, points + 1)
        mids = []
        for a, b in zip(grid[:-1], grid[1:]):
            f = lambda y: density.rule(-math.exp(y)) * math.exp(y)  # noqa: E731
            mids.append(_quad(f, a, b, "jump table"))
        mass = np.concatenate([[0.0], np.cumsum(mids)])
        self.intensity = float(mass[-1])
        self.cdf = mass / self.intensity if self.intensity > 0 else mass
        self.grid = grid
        self.mean = -density.moment(lambda x: -x, epsilon) / self.intensity if self.intensity > 0 else 0.0

    def draw(self, u: np.ndarray) -> np.ndarray:
        return -np.exp(np.interp(u, self.cdf, self.grid))


def sample_tempered_stable(density: LevyDensity, epsilon: float, rng: np.random.Generator, size=None):
    """Draws of ``W_lambda`` with small jumps (``|x| < epsilon``) replaced by a Gaussian."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    shape = () if size is None else size
    count = int(np.prod(shape))
    out = np.zeros(count)
    if density.support > 0:
        small_var = density.moment(lambda x: x * x, 0.0, epsilon)
        out += math.sqrt(small_var) * rng.standard_normal(count)
        if density.support > epsilon:
            tab = _JumpTable(density, epsilon)
            if tab.intensity > 0:
                n = rng.poisson(tab.intensity, count)
                # bound memory: about JUMP_BATCH jumps per pass
                step = max(1, int(JUMP_BATCH / max(tab.intensity, 1.0)))
                for lo in range(0, count, step):
                    nn = n[lo:lo + step]
                    jumps = tab.draw(rng.random(int(nn.sum())))
                    owner = np.repeat(np.arange(len(nn)), nn)
                    out[lo:lo + step] += np.bincount(owner, weights=jumps, minlength=len(nn))
                out -= tab.intensity * tab.mean
    if size is None:
        return float(out[0])
    return out.reshape(shape)


# ---------------------------------------------------------------- Sinai oracle
@dataclass(frozen=True)
class SinaiOracle:
    """Normalised annealed RWRE displacements at depth ``T``.

    ``mean`` and ``sd`` are estimated once from ``calibration`` replicas on a
    stream independent of the draws.
    """

    law: EnvironmentLaw
    depth: int
    seed: int
    calibration: int
    mean: float
    sd: float

    def raw(self, count: int, start: int = 0, workers: int | None = None) -> np.ndarray:
        """Unnormalised displacements of replicas ``start .. start + count - 1``."""
        batch = simulate_batch(self.law, frozen_map(), self.depth, count, self.seed, workers=workers, offset=start)
        return batch.positions.astype(np.float64)

    def sample(self, count: int, start: int = 0, workers: int | None = None) -> np.ndarray:
        return (self.raw(count, start, workers) - self.mean) / self.sd


def sinai_oracle(law: EnvironmentLaw, depth: int = 1 << 20, seed: int = 0, calibration: int = 4096,
                 workers: int | None = None) -> SinaiOracle:
    if solve_s(law).regime != SINAI:
        raise ValueError("the Sinai oracle needs a recurrent (s = 0) law")
    if depth < 1 or calibration < 2:
        raise ValueError("need depth >= 1 and calibration >= 2")
    cal_seed = derive_key(seed, AUX, 1)
    x = simulate_batch(law, frozen_map(), depth, calibration, cal_seed, workers=workers).positions
    x = x.astype(np.float64)
    sd = float(x.std(ddof=1))
    if sd == 0:
        raise ValueError("calibration variance vanishes")
    return SinaiOracle(law, depth, derive_key(seed, AUX, 2), calibration, float(x.mean()), sd)


def sample_sinai_oracle(law: EnvironmentLaw, depth: int = 1 << 20, count: int = 1, seed: int = 0,
                        oracle: SinaiOracle | None = None, workers: int | None = None) -> np.ndarray:
    """``count`` draws of the normalised deep-RWRE displacement."""
    oracle = oracle or sinai_oracle(law, depth, seed, workers=workers)
    return oracle.sample(count, workers=workers)


# ---------------------------------------------------------------- mixtures
TAIL_CUTOFF = 1e-8


@dataclass(frozen=True)
class MixtureSpec:
    """Nonincreasing weights ``lambda*`` with Gaussian completion ``a(lambda*)``.

    Squares are kept as exact rationals, so
    ``completion_sq + sum(lambda_sq) == 1`` holds exactly.
    """

    lambda_sq: tuple[Fraction, ...]
    base: str = "gaussian"

    def __post_init__(self):
        if any(v < 0 for v in self.lambda_sq):
            raise ValueError("weights must be nonnegative")
        if any(a < b for a, b in zip(self.lambda_sq, self.lambda_sq[1:])):
            raise ValueError("weights must be nonincreasing")
        if sum(self.lambda_sq, Fraction(0)) > 1:
            raise ValueError("weights must have l2 norm at most 1")

    @classmethod
    def from_weights(cls, weights: Sequence[float], base: str = "gaussian", sort: bool = True) -> "MixtureSpec":
        sq = [Fraction(abs(float(w))) ** 2 for w in weights]
        if sort:
            sq.sort(reverse=True)
        total = sum(sq, Fraction(0))
        if 1 < total <= 1 + Fraction(1, 10 ** 12):
            # absorb rounding from weights that were normalised in floating point
            sq = [v / total for v in sq]
        return cls(tuple(sq), base)

    @classmethod
    def from_squares(cls, squares: Sequence[Fraction], base: str = "gaussian") -> "MixtureSpec":
        return cls(tuple(sorted((Fraction(v) for v in squares), reverse=True)), base)

    @property
    def lambdas(self) -> np.ndarray:
        return np.sqrt(np.array([float(v) for v in self.lambda_sq]))

    @property
    def completion_sq(self) -> Fraction:
        return 1 - sum(self.lambda_sq, Fraction(0))

    @property
    def completion(self) -> float:
        return math.sqrt(self.completion_sq)

    def active(self) -> int:
        """Number of leading weights kept: the l2 tail beyond them is below ``TAIL_CUTOFF``."""
        tail = sum(self.lambda_sq, Fraction(0))
        cut = Fraction(TAIL_CUTOFF) ** 2
        for j, v in enumerate(self.lambda_sq):
            if tail < cut:
                return j
            tail -= v
        return len(self.lambda_sq)


def sample_mixture(spec: MixtureSpec, base_sampler: Callable[[int], np.ndarray], rng: np.random.Generator,
                   size: int = 1) -> np.ndarray:
    """``sum_j lambda*(j) B_j + a(lambda*) N`` with unit-variance base draws ``B_j``.

    ``base_sampler(count)`` must return ``count`` independent unit-variance
    draws of the base law.
    """
    k = spec.active()
    lam = spec.lambdas[:k]
    out = np.zeros(size)
    if k:
        draws = np.asarray(base_sampler(k * size), dtype=np.float64).reshape(size, k)
        out += draws @ lam
    a = spec.completion
    if a > 0:
        out += a * rng.standard_normal(size)
    return out
