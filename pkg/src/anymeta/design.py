"""Study-design diagnostics for the event-betting game.

Everything here is exact arithmetic on the Bernoulli game: expected
per-event growth of the log score, the implied target of a planned
study, and expected event counts to reach an evidence threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .evalue_core import EffectScale, event_prob

__all__ = [
    "DesignSpec",
    "growth_rate",
    "log_growth_rate",
    "implied_target",
    "gaussian_implied_target",
    "expected_events_to_threshold",
    "events_to_threshold_grid",
    "remaining_target",
    "classical_proportion_interval",
]

# Sentinel for a game that is not favorable in expectation.
NEVER = float("inf")


@dataclass(frozen=True)
class DesignSpec:
    """A planned study: what it bets, what it assumes true, how long it runs."""

    alt_bet: EffectScale
    null: EffectScale
    truth: EffectScale | None = None
    n_planned: int = 1
    alpha: float = 0.025
    allocation_r: float = 1.0

    def __post_init__(self) -> None:
        if self.n_planned < 0:
            raise ConfigError(f"n_planned must be >= 0, got {self.n_planned}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must be in (0,1), got {self.alpha}")

    @property
    def assumed_truth(self) -> EffectScale:
        # The implied target is evaluated at the design's own bet by default.
        return self.truth if self.truth is not None else self.alt_bet


def log_growth_rate(
    truth: EffectScale,
    alt_bet: EffectScale,
    null: EffectScale,
    r: float = 1.0,
) -> float:
    """Expected per-event increment of the log betting score under ``truth``."""
    p_t = event_prob(truth, r)
    p1 = event_prob(alt_bet, r)
    p0 = event_prob(null, r)
    if not 0 < p1 < 1 or not 0 < p0 < 1:
        raise DomainError("degenerate betting probabilities")
    return p_t * math.log(p1 / p0) + (1.0 - p_t) * math.log((1.0 - p1) / (1.0 - p0))


def growth_rate(
    truth: EffectScale,
    alt_bet: EffectScale,
    null: EffectScale,
    r: float = 1.0,
) -> float:
    """Expected multiplicative growth per event; 1.029454 for the canonical
    truth 60% / bet 50% / null 30% efficacy example."""
    return math.exp(log_growth_rate(truth, alt_bet, null, r))


def implied_target(spec: DesignSpec) -> float:
    """Expected multiplicative contribution of the planned study,
    exp(n * E[log per-event ratio]) evaluated at the assumed truth."""
    g = log_growth_rate(spec.assumed_truth, spec.alt_bet, spec.null, spec.allocation_r)
    return math.exp(spec.n_planned * g)


def gaussian_implied_target(
    spec: DesignSpec,
    replications: int = 100_000,
    seed: int = 0,
) -> dict[str, float]:
    """Implied target of the summary-statistic (Gaussian) form of the bet.

    The expected log ratio under Z ~ N(mu_truth sqrt(n), 1) has the closed
    form n*(mu_t*(mu1-mu0) - (mu1^2-mu0^2)/2); the Monte Carlo value is
    reported alongside as a cross-check.  On the default drift scale this
    is not numerically close to the event-game target: the Gaussian form
    lives on the summary-statistic scale (see README, "Drift scale").
    """
    mu_t = spec.assumed_truth.mu
    mu1 = spec.alt_bet.mu
    mu0 = spec.null.mu
    n = spec.n_planned
    analytic_log = n * (mu_t * (mu1 - mu0) - (mu1 * mu1 - mu0 * mu0) / 2.0)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    zs = rng.normal(loc=mu_t * math.sqrt(n), size=replications)
    log_ratios = math.sqrt(n) * zs * (mu1 - mu0) - n * (mu1 * mu1 - mu0 * mu0) / 2.0
    return {
        "analytic": math.exp(analytic_log),
        "monte_carlo": math.exp(float(log_ratios.mean())),
        "mc_se_log": float(log_ratios.std(ddof=1) / math.sqrt(replications)),
    }


def expected_events_to_threshold(
    truth: EffectScale,
    alt_bet: EffectScale,
    null: EffectScale,
    alpha: float = 0.025,
    r: float = 1.0,
) -> float:
    """Expected number of events to reach a betting score of 1/alpha.

    Returns ``inf`` (never, in expectation) when the game is not
    favorable under ``truth``.
    """
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must be in (0,1), got {alpha}")
    g = log_growth_rate(truth, alt_bet, null, r)
    if g <= 0:
        return NEVER
    return math.log(1.0 / alpha) / g


def events_to_threshold_grid(
    truth_ves: list[float],
    bet_ves: list[float],
    null: EffectScale,
    alpha: float = 0.025,
    r: float = 1.0,
) -> list[dict[str, float]]:
    """Expected-events table over a truth-efficacy grid, one row per
    (truth, bet) pair; feeds the design CSV/plot."""
    rows = []
    for ve_t in truth_ves:
        truth = EffectScale.from_ve(ve_t)
        for ve_b in bet_ves:
            bet = EffectScale.from_ve(ve_b)
            rows.append(
                {
                    "truth_ve": ve_t,
                    "bet_ve": ve_b,
                    "expected_events": expected_events_to_threshold(truth, bet, null, alpha, r),
                }
            )
    return rows


def remaining_target(current_e: float, alpha: float) -> float:
    """Multiplication factor a new study must deliver to push the running
    score from ``current_e`` to the 1/alpha conclusion threshold."""
    if not current_e > 0:
        raise DomainError(f"current e-value must be positive, got {current_e}")
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must be in (0,1), got {alpha}")
    return (1.0 / alpha) / current_e


def classical_proportion_interval(
    n_treatment: int,
    n_control: int,
    z_level: float,
    allocation_r: float = 1.0,
) -> tuple[float, float]:
    """Fixed-sample normal-approximation interval for the hazard ratio.

    Wald interval for the event proportion p = n_t/n, mapped through
    hr = p / (r (1 - p)).  This is the textbook cross-check against the
    anytime-valid machinery, not itself anytime-valid.  Returns
    (hr_lower, hr_upper).
    """
    n = n_treatment + n_control
    if n < 1:
        raise DomainError("need at least one event")
    if z_level <= 0:
        raise ConfigError(f"z-level must be positive, got {z_level}")
    p = n_treatment / n
    se = math.sqrt(p * (1.0 - p) / n)
    lo = p - z_level * se
    hi = p + z_level * se
    if lo <= 0.0 or hi >= 1.0:
        raise DomainError("interval leaves the open unit interval; too few events")
    return lo / (allocation_r * (1.0 - lo)), hi / (allocation_r * (1.0 - hi))
