"""Shared independent oracles for the test suite.

Everything here recomputes expectations by brute force (lattice dynamic
programming, density quotients, grid search) without touching the code
paths under test.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import binom, norm


def lattice_crossing_probs(
    p_truth: float,
    n_events: int,
    log_threshold: float,
    step_treatment: float,
    step_control: float,
) -> tuple[float, float]:
    """Exact (ever, at-horizon) crossing probabilities of the betting walk.

    The walk takes ``step_treatment`` with probability ``p_truth`` and
    ``step_control`` otherwise; its position after m events with k
    treatment events is k*step_treatment + (m-k)*step_control, so the
    state space is the (m, k) lattice with absorption at the barrier.
    """
    prob = {0: 1.0}
    p_ever = 0.0
    for m in range(1, n_events + 1):
        nxt: dict[int, float] = {}
        for k, pr in prob.items():
            for dk, pp in ((1, p_truth), (0, 1.0 - p_truth)):
                kk = k + dk
                s = kk * step_treatment + (m - kk) * step_control
                if s >= log_threshold:
                    p_ever += pr * pp
                else:
                    nxt[kk] = nxt.get(kk, 0.0) + pr * pp
        prob = nxt
    denom = step_control - step_treatment
    k_star = math.floor((n_events * step_control - log_threshold) / denom + 1e-12)
    p_horizon = float(binom.cdf(k_star, n_events, p_truth))
    return p_ever, p_horizon


def density_ratio(z: float, n: int, mu1: float, mu0: float) -> float:
    """Quotient of two normal densities, the brute-force e-value oracle."""
    return float(norm.pdf(z, loc=mu1 * math.sqrt(n)) / norm.pdf(z, loc=mu0 * math.sqrt(n)))


def grid_confidence_set(
    z: float,
    n: int,
    alpha: float,
    delta: float,
    mu_divisor: float,
    grid: np.ndarray,
) -> np.ndarray:
    """Brute-force confidence set: keep every hazard ratio on the grid whose
    one-sided density-ratio tests both stay below 2/alpha."""
    mu0 = np.log(grid) / mu_divisor
    zz = np.full_like(mu0, float(z))
    rn = math.sqrt(n)
    kept = np.ones(len(grid), dtype=bool)
    for sign in (-1.0, +1.0):
        mu1 = mu0 + sign * delta
        log_e = rn * zz * (mu1 - mu0) - n * (mu1**2 - mu0**2) / 2.0
        kept &= log_e < math.log(2.0 / alpha)
    return grid[kept]


def binomial_band(p: float, n: int, z: float = 1.96) -> tuple[float, float]:
    """95% normal-approximation band around a reported Monte Carlo fraction."""
    half = z * math.sqrt(p * (1.0 - p) / n)
    return max(0.0, p - half), min(1.0, p + half)


def mc_se(p_hat: float, n: int) -> float:
    return math.sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / n)
