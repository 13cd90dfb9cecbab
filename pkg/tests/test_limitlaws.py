import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from rwcre.environment import make_two_point_law
from rwcre.errors import QuadratureFailure
from rwcre.limitlaws import (LevyDensity, MixtureSpec, StableParams, critical_density, profile_density,
                             sample_mixture, sample_sinai_oracle, sample_stable, sample_tempered_stable,
                             sinai_oracle)

SYM = make_two_point_law(0.25, 0.75, 0.5)
U = (-1.0, -0.5, 0.5, 1.0)


def ecf(x, u):
    return complex(np.mean(np.exp(1j * u * x)))


def quad_cf(density, u):
    """exp(int (e^{iux} - 1 - iux) lambda(x) dx) by direct quadrature in t = -x."""
    def part(fn):
        pts = sorted({0.0, *density.breaks, density.support})
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            if a == 0.0:
                # t = w**2 removes the integrable singularity at the origin
                g = lambda w: 2 * w * fn(w * w) * density.rule(-w * w)  # noqa: E731
                total += integrate.quad(g, 0.0, math.sqrt(b), limit=400, epsabs=1e-12)[0]
            else:
                total += integrate.quad(lambda t: fn(t) * density.rule(-t), a, b, limit=400, epsabs=1e-12)[0]
        return total
    re = part(lambda t: -2 * math.sin(u * t / 2) ** 2)
    im = part(lambda t: -math.sin(u * t) + u * t)
    return complex(np.exp(re + 1j * im))


# ---------------------------------------------------------------- stable
@pytest.mark.parametrize("s,b", [(1.5, 1.0), (1.2, 0.7), (1.8, 2.0)])
def test_stable_ecf_matches_characteristic_exponent(s, b):
    params = StableParams(s, b)
    x = sample_stable(params, np.random.default_rng(1), 10 ** 6)
    for u in U:
        got, want = ecf(x, u), complex(params.characteristic_function(u))
        assert abs(abs(got) - abs(want)) < 0.01
        assert abs(np.angle(got) - np.angle(want)) < 0.01


def test_stable_mean_zero_and_left_skew():
    x = sample_stable(StableParams(1.5), np.random.default_rng(2), 10 ** 6)
    # heavy tails make the plain SE unreliable; compare with a wide Monte Carlo band
    assert abs(x.mean()) < 0.05
    assert np.sum(x < -10) > 20 * max(1, np.sum(x > 10))


def test_stable_params_validation():
    for s, b in ((1.0, 1.0), (2.0, 1.0), (1.5, 0.0), (1.5, math.inf)):
        with pytest.raises(ValueError):
            StableParams(s, b)


# ---------------------------------------------------------------- tempered stable
def test_zero_density_gives_zero():
    dens = critical_density(0.0, 1.0, 1.5)
    assert np.all(sample_tempered_stable(dens, 0.1, np.random.default_rng(1), 100) == 0)


def test_critical_density_variance_and_ecf():
    dens = critical_density(1.0, 2.0, 1.5)
    x = sample_tempered_stable(dens, 0.05, np.random.default_rng(3), 10 ** 6)
    var = integrate.quad(lambda t: t * t * t ** -2.5 * (1 - t / 2), 0, 2)[0]
    assert dens.second_moment == pytest.approx(var, rel=1e-8)
    assert x.var() == pytest.approx(var, rel=0.02)
    assert abs(x.mean()) < 4 * math.sqrt(var / len(x))
    for u in U:
        assert abs(ecf(x, u) - quad_cf(dens, u)) < 0.02
        assert abs(dens.characteristic_function(u) - quad_cf(dens, u)) < 1e-8


def test_truncation_insensitivity():
    dens = critical_density(1.0, 2.0, 1.5)
    for u in (0.5, 1.0):
        a = dens.approximate_characteristic(u, 0.05)
        b = dens.approximate_characteristic(u, 0.025)
        assert abs(a - b) < 1e-3
        assert abs(b - dens.characteristic_function(u)) < 1e-3


def test_profile_density_shape():
    dens = profile_density(1.0, 1.0, 1.5, [1.0, 2.0], [0.5, 0.5])
    t = 0.7
    want = t ** -1.5 * ((1 / t - 0.5 / 1.0) * 0.5 + (1 / t - 0.5 / 2.0) * 0.5)
    assert dens(-t) == pytest.approx(want, rel=1e-14)
    assert dens(-1.5) == pytest.approx(1.5 ** -1.5 * (1 / 1.5 - 0.25) * 0.5, rel=1e-14)
    assert dens(-2.5) == 0.0
    x = sample_tempered_stable(dens, 0.05, np.random.default_rng(4), 2 * 10 ** 5)
    for u in U:
        assert abs(ecf(x, u) - quad_cf(dens, u)) < 0.02
    with pytest.raises(ValueError):
        profile_density(1.0, 0.1, 1.9, [1.0], [1.0])


def test_quadrature_failure_is_reported():
    bad = LevyDensity("custom", lambda x: 0.0 if x >= 0 else (-x) ** -3.5, 1.0)
    with pytest.raises(QuadratureFailure):
        bad.second_moment


# ---------------------------------------------------------------- Sinai oracle
@pytest.fixture(scope="module")
def oracle():
    return sinai_oracle(SYM, depth=2 ** 12, seed=5, calibration=8000)


def test_oracle_normalisation(oracle):
    z = oracle.sample(8000)
    assert abs(z.mean()) < 3 * 1 / math.sqrt(len(z)) + 0.03
    assert z.var() == pytest.approx(1.0, abs=0.06)


def test_oracle_depth_stability(oracle):
    deeper = sinai_oracle(SYM, depth=2 ** 13, seed=6, calibration=8000)
    assert stats.ks_2samp(oracle.sample(5000), deeper.sample(5000)).statistic < 0.05


def test_oracle_symmetry(oracle):
    z = oracle.sample(8000, start=8000)
    assert stats.ks_2samp(z, -z).statistic < 0.05


def test_oracle_needs_sinai_law():
    with pytest.raises(ValueError):
        sinai_oracle(make_two_point_law(0.4, 0.8, 0.5), depth=16)
    draws = sample_sinai_oracle(SYM, depth=64, count=10, seed=1)
    assert draws.shape == (10,)


# ---------------------------------------------------------------- mixtures
@given(st.lists(st.fractions(0, 1), min_size=0, max_size=12))
def test_mixture_weight_identity(raw):
    total = sum(raw, Fraction(0))
    sq = [v / total for v in raw] if total > 1 else raw
    spec = MixtureSpec.from_squares(sq)
    assert spec.completion_sq + sum(spec.lambda_sq, Fraction(0)) == 1
    assert np.all(np.diff(spec.lambdas) <= 0)


def test_mixture_from_weights_absorbs_rounding():
    w = np.full(7, 1 / math.sqrt(7))
    spec = MixtureSpec.from_weights(w)
    assert spec.completion_sq >= 0
    with pytest.raises(ValueError):
        MixtureSpec.from_weights([1.0, 0.5])


def _uniform_base(rng):
    return lambda k: rng.uniform(-math.sqrt(3), math.sqrt(3), k)


def test_pure_base_and_pure_gaussian():
    rng = np.random.default_rng(1)
    spec = MixtureSpec.from_weights([1.0])
    assert spec.completion == 0.0
    x = sample_mixture(spec, _uniform_base(rng), rng, 10 ** 5)
    assert np.abs(x).max() <= math.sqrt(3)
    x = sample_mixture(MixtureSpec.from_weights([]), _uniform_base(rng), rng, 10 ** 5)
    assert stats.kstest(x, stats.norm.cdf).statistic < 0.01


@pytest.mark.parametrize("weights", [[0.8, 0.6], [0.5, 0.5, 0.5], [0.3, 0.2, 0.1]])
def test_gaussian_base_mixture_is_standard_normal(weights):
    rng = np.random.default_rng(7)
    x = sample_mixture(MixtureSpec.from_weights(weights), rng.standard_normal, rng, 10 ** 5)
    assert stats.kstest(x, stats.norm.cdf).statistic < 0.01


@pytest.mark.parametrize("weights", [[0.9], [0.6, 0.6, 0.2], [0.3]])
def test_mixture_unit_variance(weights):
    rng = np.random.default_rng(8)
    x = sample_mixture(MixtureSpec.from_weights(weights), _uniform_base(rng), rng, 10 ** 5)
    se = math.sqrt(np.var((x - x.mean()) ** 2) / len(x))
    assert abs(x.var() - 1) < 3 * se


def test_mixture_truncates_negligible_tail():
    sq = [Fraction(1, 2)] + [Fraction(1, 10 ** 20)] * 5
    spec = MixtureSpec.from_squares(sq)
    assert spec.active() == 1
