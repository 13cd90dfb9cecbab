"""Execution of validated experiment configs into CSV rows."""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy import stats

from .config import ExperimentConfig
from .estimators import (Row, distribution_distance, gradual_sum_expected, legendre_transform, moments_from_batch,
                         profile_from_batch, recurrence_diagnostic, scgf_estimate)
from .resampling import counterexample_map
from .streams import numpy_rng
from .walker import CounterexampleFamily, counterexample_tables, sample_counterexample_path, simulate_batch


def _moments(cfg: ExperimentConfig, workers) -> list[Row]:
    rows = []
    for n in cfg.horizons:
        batch = simulate_batch(cfg.law, cfg.rmap, n, cfg.replicas, cfg.seed, cfg.mode, cfg.env_seed, workers)
        rep = moments_from_batch(batch)
        rows += rep.rows()
        rows.append(Row("moments.speed", n, 0.0, rep.mean / n, rep.mean_se / n, rep.replicas, cfg.seed))
    return rows


def _profile(cfg: ExperimentConfig, workers) -> list[Row]:
    rows = []
    for n in cfg.horizons:
        batch = simulate_batch(cfg.law, cfg.rmap, n, cfg.replicas, cfg.seed, cfg.mode, cfg.env_seed, workers)
        rows += profile_from_batch(batch).rows()
    return rows


def _scgf(cfg: ExperimentConfig, workers, rate: bool = False) -> list[Row]:
    rows = []
    for n in cfg.horizons:
        tab = scgf_estimate(cfg.law, cfg.rmap, n, cfg.theta_grid, cfg.replicas, cfg.seed,
                            method=cfg.scgf_method, workers=workers)
        rows += tab.rows()
        if rate:
            rows += legendre_transform(tab, cfg.x_grid).rows()
    return rows


def _recurrence(cfg: ExperimentConfig, workers) -> list[Row]:
    return [r.row() for r in recurrence_diagnostic(cfg.law, cfg.rmap, cfg.horizons, cfg.replicas, cfg.seed, workers)]


def _fluctuation(cfg: ExperimentConfig, workers) -> list[Row]:
    rows = []
    for n in cfg.horizons:
        x = simulate_batch(cfg.law, cfg.rmap, n, cfg.replicas, cfg.seed, cfg.mode, cfg.env_seed,
                           workers).positions.astype(np.float64)
        z = (x - x.mean()) / x.std(ddof=1)
        rows.append(Row("fluctuation.ks_normal", n, 0.0, distribution_distance(z, stats.norm.cdf), 0.0,
                        cfg.replicas, cfg.seed))
    return rows


def _mass_game(cfg: ExperimentConfig, workers) -> list[Row]:
    vk = cfg.values.get("kind", "alternating")
    if vk == "constant":
        c = Fraction(cfg.values["value"])
        v = lambda k, m: c  # noqa: E731
    else:
        v = lambda k, m: (-1) ** k  # noqa: E731
    times = list(cfg.horizons) + [cfg.rmap.tau(K) for K in range(1, cfg.blocks + 1)]
    rows = []
    for t in sorted(set(times)):
        val = gradual_sum_expected(cfg.rmap, v, t)
        rows.append(Row("mass-game.expected", int(t), 0.0, float(val), 0.0, 0, cfg.seed))
    return rows


def _counterexample(cfg: ExperimentConfig, workers) -> list[Row]:
    rmap = cfg.rmap or counterexample_map()
    fam = CounterexampleFamily()
    K = cfg.blocks
    tab = counterexample_tables(fam, rmap, K)
    both = 0
    bound_ok = 0
    for i in range(cfg.replicas):
        path = sample_counterexample_path(fam, rmap, K, numpy_rng(cfg.seed, "counterexample", i), tab)
        both += bool((path.ratios > 0.5).any() and (path.ratios < -0.5).any())
        bound_ok += path.deviation_bound_holds()
    R = cfg.replicas
    freq = both / R
    return [
        Row("counterexample.both_signs_frequency", K, 0.0, freq, math.sqrt(freq * (1 - freq) / R), R, cfg.seed),
        Row("counterexample.both_signs_probability", K, 0.0, fam.both_signs_probability(rmap, K), 0.0, R, cfg.seed),
        Row("counterexample.deviation_bound_fraction", K, 0.0, bound_ok / R, 0.0, R, cfg.seed),
    ]


RUNNERS = {
    "moments": _moments,
    "profile": _profile,
    "scgf": _scgf,
    "rate-function": lambda cfg, w: _scgf(cfg, w, rate=True),
    "recurrence-trace": _recurrence,
    "fluctuation-test": _fluctuation,
    "mass-game": _mass_game,
    "counterexample": _counterexample,
}


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> list[Row]:
    return RUNNERS[cfg.experiment](cfg, workers)
