"""Acceptance criteria 1-12, each at its stated tolerance.

Every test records a single ``criterion N: PASS|FAIL`` line; the lines are
printed together in the terminal summary.  Run just this file with
``pytest tests/test_acceptance.py -v``.
"""
import math
import tempfile
from fractions import Fraction

import numpy as np
from scipy import stats

from rwcre.cli import run
from rwcre.environment import law_from_rho, make_two_point_law, rho_moment, solve_s, solve_s_newton
from rwcre.estimators import (gradual_sum_expected, homogenization_summary, legendre_transform,
                              profile_from_batch, scgf_estimate, shift_records)
from rwcre.limitlaws import MixtureSpec, sample_mixture, sinai_oracle
from rwcre.presets import list_presets, resolve
from rwcre.resampling import (counterexample_map, double_exponential_map, exponential_map, frozen_map,
                              identity_map, polynomial_map)
from rwcre.streams import numpy_rng
from rwcre.walker import CounterexampleFamily, counterexample_tables, sample_counterexample_path, simulate_batch

LINES: dict[int, str] = {}

HOMOGENEOUS = make_two_point_law(0.4, 0.8, 0.5)  # mean omega 0.6
BALLISTIC = law_from_rho([1.5, 0.25], [0.5, 0.5])
STABLE_15 = law_from_rho([0.25, 1.875 ** (2 / 3)], [0.5, 0.5])  # E[rho**1.5] = 1
LOW_DISORDER = make_two_point_law(0.45, 0.75, 0.5)
SINAI = make_two_point_law(0.25, 0.75, 0.5)
PBAR = 0.6


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES[number] = line
    print(line)
    assert ok, line


def slope(ns, values):
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


def test_criterion_01_homogenization_clt():
    n, R = 10 ** 4, 10 ** 5
    h = homogenization_summary(HOMOGENEOUS, {1: 1.0})
    x = simulate_batch(HOMOGENEOUS, identity_map(), n, R, seed=101).positions
    z = (x - n * h.v) / math.sqrt(h.sigma_sq * n)
    ks = stats.kstest(z, stats.norm.cdf).statistic
    report(1, ks < 0.01, f"KS = {ks:.5f} (< 0.01), v = {h.v:.6f}, sigma^2 = {h.sigma_sq:.6f}")


def test_criterion_02_scgf_and_rate_function():
    n = 10 ** 4
    theta = np.linspace(-2, 2, 161)
    exact = np.log(PBAR * np.exp(theta) + (1 - PBAR) * np.exp(-theta))
    tab = scgf_estimate(HOMOGENEOUS, identity_map(), n, theta, 0, method="block")
    err = float(np.max(np.abs(tab.values - exact)))
    x = np.linspace(-0.9, 0.9, 73)
    rate = legendre_transform(tab, x)
    closed = (1 + x) / 2 * np.log((1 + x) / (2 * PBAR)) + (1 - x) / 2 * np.log((1 - x) / (2 * (1 - PBAR)))
    rerr = float(np.max(np.abs(rate.values - closed)))
    # Monte Carlo route on the window where 10^5 replicas keep the weights spread
    small = np.linspace(-0.02, 0.02, 9)
    mc = scgf_estimate(HOMOGENEOUS, identity_map(), n, small, 10 ** 5, seed=102)
    mc_exact = np.log(PBAR * np.exp(small) + (1 - PBAR) * np.exp(-small))
    mc_err = float(np.max(np.abs(mc.values - mc_exact)))
    report(2, err < 0.01 and rerr < 0.02 and mc_err < 0.01,
           f"block-route sup|Lambda error| = {err:.2e} (< 0.01), rate error = {rerr:.2e} (< 0.02), "
           f"MC cross-check on |theta| <= 0.02 = {mc_err:.2e}")


def test_criterion_03_speed_persistence():
    n, R = 10 ** 6, 1000
    cool = simulate_batch(BALLISTIC, polynomial_map(1.0, 1.0), n, R, seed=103).positions / n
    frozen = simulate_batch(BALLISTIC, frozen_map(), n, R, seed=203).positions / n
    m, se = frozen.mean(), frozen.std(ddof=1) / math.sqrt(R)
    lo, hi = m - 2.576 * se, m + 2.576 * se
    v = cool.mean()
    report(3, lo <= v <= hi,
           f"cooling speed {v:.5f} +- {cool.std(ddof=1) / math.sqrt(R):.5f}; frozen 99% CI [{lo:.5f}, {hi:.5f}]")


def test_criterion_04_s_solver():
    info = solve_s(BALLISTIC)
    newton = solve_s_newton(BALLISTIC)
    m1, m2 = rho_moment(BALLISTIC, 1), rho_moment(BALLISTIC, 2)
    ok = (abs(info.s - newton) < 1e-10 and 1 < info.s < 2 and abs(m1 - 0.875) < 1e-15
          and abs(m2 - 1.15625) < 1e-15 and m1 < 1 < m2)
    report(4, ok, f"bisection s = {info.s:.15f}, Newton s = {newton:.15f}, E[rho] = {m1}, E[rho^2] = {m2}")


def test_criterion_05_gaussian_mixture():
    s = solve_s(LOW_DISORDER).s
    n, R = 10 ** 5, 10 ** 4
    x = simulate_batch(LOW_DISORDER, polynomial_map(1.0, 1.0), n, R, seed=105).positions.astype(float)
    z = (x - x.mean()) / x.std(ddof=1)
    ks = stats.kstest(z, stats.norm.cdf).statistic
    report(5, s > 2 and ks < 0.02, f"s = {s:.4f} (> 2), KS = {ks:.5f} (< 0.02)")


def test_criterion_06_sinai_mixture():
    n, R = exponential_map().tau(12), 5000
    batch = simulate_batch(SINAI, exponential_map(), n, R, seed=106)
    x = batch.positions.astype(float)
    z = (x - x.mean()) / x.std(ddof=1)
    spec = MixtureSpec.from_squares(profile_from_batch(batch).lambda_sq, base="sinai")
    oracle = sinai_oracle(SINAI, depth=2 ** 16, seed=206)
    drawn = [0]

    def base(count):
        out = oracle.sample(count, start=drawn[0])
        drawn[0] += count
        return out

    mix = sample_mixture(spec, base, numpy_rng(206, "mixture", 0), R)
    ks = stats.ks_2samp(z, mix).statistic
    report(6, ks < 0.05, f"two-sample KS = {ks:.5f} (< 0.05); n = {n}, top lambda = {spec.lambdas[0]:.3f}, "
                         f"oracle depth 2^16")


def test_criterion_07_stable_variance_exponent():
    s = solve_s(STABLE_15).s
    ns = [10 ** 3, 10 ** 4, 10 ** 5]
    var = [simulate_batch(STABLE_15, frozen_map(), n, min(10 ** 8 // n, 10 ** 5), seed=107 + i)
           .positions.astype(float).var(ddof=1) for i, n in enumerate(ns)]
    b = slope(ns, var)
    report(7, abs(b - (3 - s)) <= 0.15, f"slope = {b:.4f}, target 3 - s = {3 - s:.4f} +- 0.15")


def test_criterion_08_polynomial_phase_scaling():
    s = solve_s(STABLE_15).s
    beta = (1 * (3 - s) + 1) / (2 * (1 + 1))
    ns = [10 ** 4, 10 ** 5, 10 ** 6]
    budgets = [10 ** 5, 10 ** 5, 10 ** 4]
    var = [simulate_batch(STABLE_15, polynomial_map(1.0, 1.0), n, R, seed=108 + i)
           .positions.astype(float).var(ddof=1) for i, (n, R) in enumerate(zip(ns, budgets))]
    b = slope(ns, var)
    report(8, abs(b - 2 * beta) <= 0.15, f"slope = {b:.4f}, target 2 beta = {2 * beta:.4f} +- 0.15")


def test_criterion_09_counterexample():
    fam, rmap, K, paths = CounterexampleFamily(), counterexample_map(), 10 ** 4, 500
    tab = counterexample_tables(fam, rmap, K)
    both, bound = 0, True
    for i in range(paths):
        p = sample_counterexample_path(fam, rmap, K, numpy_rng(109, "counterexample", i), tab)
        both += bool((p.ratios > 0.5).any() and (p.ratios < -0.5).any())
        bound &= p.deviation_bound_holds()
    freq = both / paths
    analytic = fam.both_signs_probability(rmap, K)
    report(9, abs(freq - analytic) <= 0.05 and bound,
           f"frequency = {freq:.4f}, product formula = {analytic:.4f} (+- 0.05), deviation bound on all paths: {bound}")


def test_criterion_10_game_of_mass():
    m = double_exponential_map()
    vals = {K: gradual_sum_expected(m, lambda k, _: (-1) ** k, m.tau(K)) for K in range(1, 7)}
    odd_ok = all(vals[K] <= Fraction(-4, 5) for K in (1, 3, 5))
    even_ok = all(vals[K] >= Fraction(4, 5) for K in (2, 4, 6))
    shown = ", ".join(f"K={K}: {float(v):.6f}" for K, v in vals.items())
    report(10, odd_ok and even_ok, shown)


def test_criterion_11_shift_inequality():
    violations, total, worst = 0, 0, None
    for p in (0.3, 0.5, 0.7):
        for r in shift_records(p, 20):
            total += 1
            gap = (r.log_earlier - r.log_later) - r.m_log_c
            if gap < -1e-12:
                violations += 1
                if worst is None or gap < worst[0]:
                    worst = (gap, p, r.n, r.m, r.x, r.x_prime)
    detail = f"{violations} of {total} records violate log P(X_(n-m)=x) - log P(X_n=x') >= m log c"
    if worst:
        detail += f"; e.g. p={worst[1]}, n={worst[2]}, m={worst[3]}, x={worst[4]}, x'={worst[5]}"
    report(11, violations == 0, detail)


def test_criterion_12_determinism():
    import json
    import os

    mismatched = []
    with tempfile.TemporaryDirectory() as tmp:
        for name, _ in list_presets():
            cfg_path = os.path.join(tmp, "preset.json")
            with open(cfg_path, "w") as fh:
                json.dump(resolve(name), fh)
            blobs = []
            for workers in (1, 4):
                out = os.path.join(tmp, f"w{workers}")
                code, files = run(cfg_path, workers=workers, out_dir=out)
                assert code == 0
                with open(files[0], "rb") as fh:
                    blobs.append(fh.read())
            if blobs[0] != blobs[1]:
                mismatched.append(name)
    report(12, not mismatched, f"{len(list_presets())} presets, workers 1 vs 4; mismatches: {mismatched or 'none'}")
