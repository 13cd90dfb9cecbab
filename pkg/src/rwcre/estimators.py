"""Monte Carlo estimators and exact transforms built on the walker.

Two routes are available for single-block quantities such as ``E[Z_T]``,
``Var(Z_T)`` and ``log E[exp(a Z_T)]``:

* Monte Carlo over replicas (:func:`mc_moments`, ``scgf_estimate(method="mc")``);
* the annealed block law (:func:`block_law`), obtained by running the exact
  quenched forward recursion over ``[-T, T]`` and averaging over
  environments.  When the finite law has few enough environments on the
  ``2T - 1`` sites a block can visit before its last step, the average is an
  exact enumeration; otherwise ``R`` environments are sampled and the Monte
  Carlo error is reported.

Because annealed blocks are independent, ``log E[exp(theta X_n)]`` is the sum
of the single-block log-MGFs over the truncated schedule; this is the
``"block"`` route of :func:`scgf_estimate`.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from . import _kernels
from .environment import FINITE, EnvironmentLaw
from .errors import BudgetTooSmall, ConfigError, EffectiveSampleCollapse, RwcreError, UnboundedSupport
from .resampling import INF, ResamplingMap
from .streams import numpy_rng
from .walker import ANNEALED, BatchResult, omega_from_uniforms, simulate_batch

THETA_MAX = 3.0
COLLAPSE = 0.99
BLOCK_SAMPLES = 256
MAX_ENUMERATION = 1 << 16

CSV_COLUMNS = ("name", "n", "grid_value", "estimate", "std_error", "replicas", "seed")


@dataclass(frozen=True)
class Row:
    """One CSV record."""

    name: str
    n: int
    grid_value: float
    estimate: float
    std_error: float
    replicas: int
    seed: int

    def key(self):
        return (self.name, self.n, self.grid_value, self.estimate, self.std_error, self.replicas, self.seed)


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def rows_to_csv(rows: Iterable[Row]) -> str:
    """CSV text with a header and rows in lexicographic order of the columns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in sorted(rows, key=Row.key):
        w.writerow([_fmt(v) for v in r.key()])
    return buf.getvalue()


# ---------------------------------------------------------------- moments
def _exact_var(total: int, total_sq: int, R: int) -> Fraction:
    """Unbiased sample variance from exact integer sums."""
    return Fraction(R * total_sq - total * total, R * (R - 1))


@dataclass(frozen=True)
class MomentReport:
    n: int
    replicas: int
    seed: int
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    lengths: tuple[int, ...]
    block_variances: tuple[float, ...]
    boundary_length: int
    boundary_variance: float
    exact_block_variances: tuple[Fraction, ...] = field(repr=False, default=())

    def rows(self, name: str = "moments") -> list[Row]:
        return [
            Row(f"{name}.mean", self.n, 0.0, self.mean, self.mean_se, self.replicas, self.seed),
            Row(f"{name}.variance", self.n, 0.0, self.variance, self.variance_se, self.replicas, self.seed),
        ]


def _sample_moments(x: np.ndarray) -> tuple[float, float, float, float]:
    R = len(x)
    mean = float(x.mean())
    d = x - mean
    var = float(d @ d / (R - 1))
    sq = d * d
    var_se = float(math.sqrt(sq.var(ddof=1) / R))
    return mean, math.sqrt(var / R), var, var_se


def moments_from_batch(batch: BatchResult) -> MomentReport:
    R = batch.replicas
    if R < 2:
        raise BudgetTooSmall("at least 2 replicas are needed")
    x = batch.positions.astype(np.float64)
    mean, mean_se, var, var_se = _sample_moments(x)
    exact = tuple(_exact_var(s, q, R) for s, q in zip(batch.block_sum, batch.block_sumsq))
    pieces = tuple(int(t) for t in batch.pieces)
    if batch.has_boundary:
        lengths, blen, bvar = pieces[:-1], pieces[-1], float(exact[-1])
        block = exact[:-1]
    else:
        lengths, blen, bvar, block = pieces, 0, 0.0, exact
    return MomentReport(batch.n, R, batch.seed, mean, mean_se, var, var_se, lengths,
                        tuple(float(v) for v in block), blen, bvar, exact)


def mc_moments(law: EnvironmentLaw, rmap: ResamplingMap, n: int, replicas: int, seed: int = 0,
               mode: str = ANNEALED, workers: int | None = None) -> MomentReport:
    """Mean and variance of ``X_n`` with standard errors, plus per-block ``Var(Y_k)``."""
    if replicas < 2:
        raise BudgetTooSmall("at least 2 replicas are needed")
    return moments_from_batch(simulate_batch(law, rmap, n, replicas, seed, mode, workers=workers))


# ---------------------------------------------------------------- variance profile
@dataclass(frozen=True)
class MassProfile:
    """Per-piece ``lambda_k = sd(Y_k)/sd_total`` with ``sum lambda_k**2 = 1``.

    ``lambda_sq`` holds the exact squares (ratios of exact variance
    estimates); ``lambdas`` covers every piece of the truncated schedule, the
    boundary piece last when ``has_boundary``.
    """

    n: int
    replicas: int
    seed: int
    lengths: tuple[int, ...]
    lambda_sq: tuple[Fraction, ...]
    has_boundary: bool

    @property
    def lambdas(self) -> np.ndarray:
        return np.sqrt(np.array([float(v) for v in self.lambda_sq]))

    @property
    def boundary(self) -> float:
        return float(math.sqrt(self.lambda_sq[-1])) if self.has_boundary else 0.0

    @property
    def sorted(self) -> np.ndarray:
        return np.sort(self.lambdas)[::-1]

    def rows(self, name: str = "profile") -> list[Row]:
        return [Row(name, self.n, float(k + 1), float(v), 0.0, self.replicas, self.seed)
                for k, v in enumerate(self.lambdas)]


def profile_from_batch(batch: BatchResult) -> MassProfile:
    R = batch.replicas
    if R < 2:
        raise BudgetTooSmall("at least 2 replicas are needed")
    var = [_exact_var(s, q, R) for s, q in zip(batch.block_sum, batch.block_sumsq)]
    total = sum(var, Fraction(0))
    if total == 0:
        raise RwcreError("all block variance estimates vanish")
    return MassProfile(batch.n, R, batch.seed, tuple(int(t) for t in batch.pieces),
                       tuple(v / total for v in var), batch.has_boundary)


def variance_profile(law: EnvironmentLaw, rmap: ResamplingMap, n: int, replicas: int, seed: int = 0,
                     mode: str = ANNEALED, workers: int | None = None) -> MassProfile:
    if replicas < 2:
        raise BudgetTooSmall("at least 2 replicas are needed")
    return profile_from_batch(simulate_batch(law, rmap, n, replicas, seed, mode, workers=workers))


# ---------------------------------------------------------------- single-block law
@dataclass(frozen=True)
class BlockLaw:
    """Annealed law of ``Z_T`` on ``-T..T`` as a weighted family of quenched laws."""

    T: int
    quenched: np.ndarray  # (environments, 2T + 1)
    weights: np.ndarray  # sums to 1
    exact: bool

    @property
    def support(self) -> np.ndarray:
        return np.arange(-self.T, self.T + 1)

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights @ self.quenched

    def mean(self) -> float:
        return float(self.probabilities @ self.support)

    def variance(self) -> float:
        p = self.probabilities
        z = self.support.astype(float)
        m = p @ z
        return float(p @ (z - m) ** 2)

    def log_mgf(self, a: float) -> float:
        """``log E[exp(a Z_T)]``, normalised so that ``a = 0`` gives exactly 0."""
        with np.errstate(divide="ignore"):
            lp = np.log(self.probabilities)
        return float(logsumexp(lp + a * self.support) - logsumexp(lp))

    def log_mgf_se(self, a: float) -> float:
        """Monte Carlo standard error of :meth:`log_mgf` (0 for exact laws)."""
        if self.exact or len(self.weights) < 2:
            return 0.0
        shift = a * self.T if a >= 0 else -a * self.T
        m = self.quenched @ np.exp(a * self.support - shift)
        return float(m.std(ddof=1) / math.sqrt(len(m)) / m.mean())


def _environment_count(law: EnvironmentLaw, T: int) -> float:
    if law.kind != FINITE:
        return math.inf
    return float(len(law.atoms)) ** max(0, 2 * T - 1)


def block_law(law: EnvironmentLaw, T: int, samples: int = BLOCK_SAMPLES, seed: int = 0,
              max_enumeration: int = MAX_ENUMERATION) -> BlockLaw:
    """Annealed law of a single block of length ``T``.

    Exact when the number of environments on the ``2T - 1`` reachable sites
    is at most ``max_enumeration``; otherwise an average over ``samples``
    environments drawn from the stream ``(seed, "block-law", T)``.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    if T == 0:
        return BlockLaw(0, np.ones((1, 1)), np.ones(1), True)
    sites = 2 * T - 1
    if _environment_count(law, T) <= max_enumeration:
        vals = np.array([w for w, _ in law.atoms])
        probs = np.array([p for _, p in law.atoms])
        idx = np.array(list(itertools.product(range(len(vals)), repeat=sites)))
        envs = vals[idx]
        weights = np.prod(probs[idx], axis=1)
        exact = True
    else:
        rng = numpy_rng(seed, "block-law", T)
        envs = omega_from_uniforms(rng.random((samples, sites)), *law.kernel_tables())
        weights = np.full(samples, 1.0 / samples)
        exact = False
    laws = np.empty((len(envs), 2 * T + 1))
    for i, env in enumerate(envs):
        laws[i] = _kernels.quenched_block_law(np.ascontiguousarray(env), T)
    return BlockLaw(T, laws, weights / weights.sum(), exact)


# ---------------------------------------------------------------- s.c.g.f.
@dataclass(frozen=True)
class ScgfTable:
    """``Lambda_hat(theta) = (1/n) log E[exp(theta X_n)]`` on a grid."""

    n: int
    theta: np.ndarray
    values: np.ndarray
    std_error: np.ndarray
    method: str
    replicas: int
    seed: int
    concentration: np.ndarray | None = None

    def midpoint_convex(self, slack: float = 0.0) -> bool:
        """Midpoint convexity over every equally spaced grid triple."""
        th, v = self.theta, self.values
        index = {float(t): i for i, t in enumerate(th)}
        for i, j in itertools.combinations(range(len(th)), 2):
            k = index.get(float((th[i] + th[j]) / 2))
            if k is not None and v[k] > (v[i] + v[j]) / 2 + slack:
                return False
        return True

    def derivative_at_zero(self) -> float:
        """Central difference of ``Lambda_hat`` at the grid points bracketing 0."""
        i = int(np.searchsorted(self.theta, 0.0))
        if i == 0 or i >= len(self.theta) - 1 or self.theta[i] != 0.0:
            raise ValueError("grid must contain 0 with neighbours on both sides")
        return float((self.values[i + 1] - self.values[i - 1]) / (self.theta[i + 1] - self.theta[i - 1]))

    def rows(self, name: str = "scgf") -> list[Row]:
        return [Row(name, self.n, float(t), float(v), float(e), self.replicas, self.seed)
                for t, v, e in zip(self.theta, self.values, self.std_error)]


def _validate_theta(theta_grid, theta_max: float) -> np.ndarray:
    th = np.asarray(sorted(float(t) for t in theta_grid))
    if len(th) == 0:
        raise ConfigError("theta grid is empty", "theta_grid")
    bad = np.nonzero(np.abs(th) > theta_max)[0]
    if len(bad):
        raise ConfigError(f"|theta| must not exceed {theta_max}, got {th[bad[0]]}", "theta_grid")
    return th


def scgf_from_positions(x: np.ndarray, n: int, theta_grid, seed: int = 0,
                        theta_max: float = THETA_MAX) -> ScgfTable:
    """Log-mean-exp estimator over replica positions with max shifting."""
    th = _validate_theta(theta_grid, theta_max)
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    R = len(x)
    vals, ses, conc = [], [], []
    for t in th:
        a = t * x
        m = a.max()
        w = np.exp(a - m)
        total = w.sum()
        c = float(w.max() / total)
        if c > COLLAPSE:
            raise EffectiveSampleCollapse(
                f"weight concentration {c:.4f} at theta={t} exceeds {COLLAPSE}; reduce |theta| or raise replicas")
        mean_w = total / R
        vals.append(float((m + math.log(mean_w)) / n))
        ses.append(float(w.std(ddof=1) / math.sqrt(R) / mean_w / n) if R > 1 else math.inf)
        conc.append(c)
    return ScgfTable(n, th, np.array(vals), np.array(ses), "mc", R, seed, np.array(conc))


def scgf_estimate(law: EnvironmentLaw, rmap: ResamplingMap, n: int, theta_grid, replicas: int,
                  seed: int = 0, method: str = "mc", theta_max: float = THETA_MAX,
                  workers: int | None = None, samples: int = BLOCK_SAMPLES) -> ScgfTable:
    """Annealed s.c.g.f. at horizon ``n``.

    ``method="mc"`` uses log-mean-exp over ``replicas`` simulated positions.
    ``method="block"`` sums exact (or environment-sampled) single-block
    log-MGFs over the truncated schedule; ``replicas`` is then unused and
    the table records the number of sampled environments (0 when exact).
    """
    th = _validate_theta(theta_grid, theta_max)
    if method == "mc":
        batch = simulate_batch(law, rmap, n, replicas, seed, workers=workers)
        return scgf_from_positions(batch.positions, n, th, seed, theta_max)
    if method != "block":
        raise ConfigError(f"unknown scgf method {method!r}", "method")
    counts = Counter(int(t) for t in rmap.schedule_at(n).pieces())
    laws = {T: block_law(law, T, samples, seed) for T in counts}
    vals = np.array([sum(c * laws[T].log_mgf(t) for T, c in counts.items()) / n for t in th])
    ses = np.array([math.sqrt(sum((c * laws[T].log_mgf_se(t)) ** 2 for T, c in counts.items())) / n
                    for t in th])
    exact = all(b.exact for b in laws.values())
    return ScgfTable(n, th, vals, ses, "block", 0 if exact else samples, seed)


# ---------------------------------------------------------------- Legendre transform
@dataclass(frozen=True)
class RateFunctionTable:
    x: np.ndarray
    values: np.ndarray
    theta_star: np.ndarray
    n: int = 0
    replicas: int = 0
    seed: int = 0

    def rows(self, name: str = "rate") -> list[Row]:
        return [Row(name, self.n, float(x), float(v), 0.0, self.replicas, self.seed)
                for x, v in zip(self.x, self.values)]


def convex_conjugate(theta: np.ndarray, values: np.ndarray, x_grid) -> tuple[np.ndarray, np.ndarray]:
    """``sup_theta (x theta - f(theta))`` by grid argmax and a three-point parabola."""
    th = np.asarray(theta, dtype=np.float64)
    f = np.asarray(values, dtype=np.float64)
    xs = np.asarray(x_grid, dtype=np.float64)
    out = np.empty(len(xs))
    arg = np.empty(len(xs))
    for j, x in enumerate(xs):
        g = x * th - f
        i = int(np.argmax(g))
        best, where = g[i], th[i]
        if 0 < i < len(th) - 1:
            t0, t1, t2 = th[i - 1], th[i], th[i + 1]
            g0, g1, g2 = g[i - 1], g[i], g[i + 1]
            den = (t0 - t1) * (t0 - t2) * (t1 - t2)
            a = (t2 * (g1 - g0) + t1 * (g0 - g2) + t0 * (g2 - g1)) / den
            b = (t2 * t2 * (g0 - g1) + t1 * t1 * (g2 - g0) + t0 * t0 * (g1 - g2)) / den
            if a < 0:
                tv = -b / (2 * a)
                if t0 <= tv <= t2:
                    c = g1 - a * t1 * t1 - b * t1
                    peak = a * tv * tv + b * tv + c
                    if peak > best:
                        best, where = peak, tv
        out[j] = best
        arg[j] = where
    return out, arg


def legendre_transform(table: ScgfTable, x_grid) -> RateFunctionTable:
    """Rate function ``I(x) = sup_theta (x theta - Lambda_hat(theta))`` on ``x_grid``."""
    if not np.all(np.isfinite(table.values)):
        raise ValueError("scgf table must be finite")
    vals, arg = convex_conjugate(table.theta, table.values, x_grid)
    return RateFunctionTable(np.asarray(x_grid, dtype=float), vals, arg, table.n, table.replicas, table.seed)


# ---------------------------------------------------------------- homogenization
@dataclass(frozen=True)
class HomogenizationSummary:
    """Limits for a map whose increment law converges to a finite-support ``nu``.

    ``cumulant(a) = sum_T nu(T) log E[exp(a Z_T)] / T_bar`` is the limiting
    s.c.g.f.; ``J`` and ``I`` are its unnormalised and normalised tables on
    ``a_grid``.
    """

    nu: dict
    T_bar: float
    v: float
    sigma_star_sq: float
    sigma_sq: float
    a_grid: np.ndarray
    J: np.ndarray
    I: np.ndarray
    exact: bool
    laws: dict = field(repr=False)

    def cumulant(self, a: float) -> float:
        return sum(p * self.laws[T].log_mgf(a) for T, p in self.nu.items()) / self.T_bar


def _finite_nu(nu) -> dict:
    if not isinstance(nu, Mapping):
        raise UnboundedSupport("nu must be given as a finite mapping T -> probability")
    out = {}
    for T, p in nu.items():
        if T == INF or not float(T).is_integer() or T < 1:
            raise UnboundedSupport(f"support point {T!r} is not a finite block length")
        if p < 0:
            raise ValueError("nu must be nonnegative")
        if p > 0:
            out[int(T)] = float(p)
    total = sum(out.values())
    if not out or abs(total - 1.0) > 1e-12:
        raise ValueError("nu must be a probability distribution")
    return out


def homogenization_summary(law: EnvironmentLaw, nu, a_grid: Sequence[float] = tuple(np.linspace(-2, 2, 41)),
                           samples: int = BLOCK_SAMPLES, seed: int = 0) -> HomogenizationSummary:
    nu = _finite_nu(nu)
    laws = {T: block_law(law, T, samples, seed) for T in nu}
    T_bar = sum(T * p for T, p in nu.items())
    v = sum(laws[T].mean() * p for T, p in nu.items()) / T_bar
    s2 = sum(laws[T].variance() * p for T, p in nu.items())
    a = np.asarray(a_grid, dtype=float)
    J = np.array([sum(p * laws[T].log_mgf(x) for T, p in nu.items()) for x in a])
    return HomogenizationSummary(nu, float(T_bar), float(v), float(s2), float(s2 / T_bar), a, J, J / T_bar,
                                 all(b.exact for b in laws.values()), laws)


# ---------------------------------------------------------------- recurrence trace
@dataclass(frozen=True)
class RecurrenceRow:
    n: int
    ratio: float
    std_error: float
    mean: float
    mean_se: float
    replicas: int
    seed: int

    def row(self, name: str = "recurrence") -> Row:
        return Row(name, self.n, 0.0, self.ratio, self.std_error, self.replicas, self.seed)


def ratio_with_se(x: np.ndarray) -> tuple[float, float]:
    """``|mean|/sd`` with a delta-method standard error."""
    x = np.asarray(x, dtype=np.float64)
    R = len(x)
    m = x.mean()
    d = x - m
    var = d @ d / (R - 1)
    if var == 0:
        raise RwcreError("sample variance vanishes")
    sd = math.sqrt(var)
    mu3 = float(np.mean(d ** 3))
    mu4 = float(np.mean(d ** 4))
    gm = math.copysign(1.0, m) / sd
    gv = -abs(m) / (2 * sd ** 3)
    v = (var * gm * gm + 2 * mu3 * gm * gv + (mu4 - var * var) * gv * gv) / R
    return float(abs(m) / sd), float(math.sqrt(max(v, 0.0)))


def recurrence_diagnostic(law: EnvironmentLaw, rmap: ResamplingMap, n_list: Sequence[int], replicas: int,
                          seed: int = 0, workers: int | None = None) -> list[RecurrenceRow]:
    """Trace of ``|E_hat[X_n]|/sd_hat(X_n)`` over horizons; no verdict is drawn."""
    if replicas < 3:
        raise BudgetTooSmall("at least 3 replicas are needed")
    out = []
    for n in n_list:
        if n < 1:
            raise ValueError("horizons must be >= 1")
        x = simulate_batch(law, rmap, n, replicas, seed, workers=workers).positions.astype(np.float64)
        r, se = ratio_with_se(x)
        out.append(RecurrenceRow(int(n), r, se, float(x.mean()), float(x.std(ddof=1) / math.sqrt(replicas)),
                                 replicas, seed))
    return out


# ---------------------------------------------------------------- gradual sums
def gradual_sum_expected(masses, v_function: Callable[[int, int], float], t: int):
    """``E[S_t] = sum_k (m_{k,t}/t) v(k, m_{k,t})`` over the pieces at time ``t``.

    ``masses`` is a :class:`ResamplingMap` or a sequence ``m_1, m_2, ...``
    (frozen after the last entry).  The result is an exact ``Fraction`` when
    ``v_function`` returns integers or fractions.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if not isinstance(masses, ResamplingMap):
        from .resampling import explicit_map

        masses = explicit_map(masses)
    sched = masses.schedule_at(t)
    pieces = list(sched.lengths) + ([sched.boundary] if sched.boundary > 0 else [])
    total = Fraction(0)
    for k, m in enumerate(pieces, start=1):
        v = v_function(k, m)
        if isinstance(v, float):
            v = Fraction(v)
        total += Fraction(m, t) * v
    return total


# ---------------------------------------------------------------- distances
KS = "KS"
W1 = "Wasserstein1"


def distribution_distance(sample_a, sample_b_or_cdf, kind: str = KS) -> float:
    """Kolmogorov-Smirnov (one- or two-sample) or empirical 1-Wasserstein distance."""
    a = np.asarray(sample_a, dtype=np.float64)
    if a.size == 0:
        raise ValueError("samples must be nonempty")
    if kind == KS:
        if callable(sample_b_or_cdf):
            return float(stats.kstest(a, sample_b_or_cdf).statistic)
        b = np.asarray(sample_b_or_cdf, dtype=np.float64)
        if b.size == 0:
            raise ValueError("samples must be nonempty")
        return float(stats.ks_2samp(a, b).statistic)
    if kind == W1:
        if callable(sample_b_or_cdf):
            raise ValueError("Wasserstein1 is implemented for two samples")
        b = np.asarray(sample_b_or_cdf, dtype=np.float64)
        if b.size == 0:
            raise ValueError("samples must be nonempty")
        return float(stats.wasserstein_distance(a, b))
    raise ValueError(f"unknown distance {kind!r}")


# ---------------------------------------------------------------- shift inequality
def homogeneous_log_masses(p: float, n: int) -> dict[int, float]:
    """``log P(X_n = x)`` for the walk with constant right probability ``p``."""
    lp, lq = math.log(p), math.log1p(-p)
    return {2 * k - n: math.log(math.comb(n, k)) + k * lp + (n - k) * lq for k in range(n + 1)}


@dataclass(frozen=True)
class ShiftRecord:
    n: int
    m: int
    x: int
    x_prime: int
    log_earlier: float  # log P(X_{n-m} = x)
    log_later: float  # log P(X_n = x')
    m_log_c: float


def shift_records(p: float, n_max: int) -> list[ShiftRecord]:
    """All ``(n, m, x, x')`` with ``n <= n_max``, ``1 <= m <= n``, ``x`` reachable
    at time ``n - m`` and ``x' = x +- m``, with the exact log point masses.
    ``c = min(p, 1 - p)`` is the ellipticity constant of the walk.
    """
    c = min(p, 1.0 - p)
    tables = [homogeneous_log_masses(p, n) for n in range(n_max + 1)]
    out = []
    for n in range(1, n_max + 1):
        for m in range(1, n + 1):
            for x, la in tables[n - m].items():
                for xp in (x - m, x + m):
                    out.append(ShiftRecord(n, m, x, xp, la, tables[n][xp], m * math.log(c)))
    return out
