"""Seeded Monte Carlo engine for betting-score trajectories.

Replications are driven by numpy's counter-based Philox generator with a
per-replication child seed (``SeedSequence(seed, spawn_key=(i,))``), so
replication i can be reproduced on its own and results do not depend on
execution order.  A fixed plan (including the seed) yields byte-identical
serialized results.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .evalue_core import EffectScale, event_log_lr, event_prob

__all__ = ["SimPlan", "SimResult", "run", "null_calibration", "GENERATOR_NAME"]

GENERATOR_NAME = "philox4x64 (numpy Philox, per-replication spawn key)"


@dataclass(frozen=True)
class SimPlan:
    """One simulation study: truth, bet, horizon, replications, seed."""

    truth: EffectScale
    alt_bet: EffectScale
    null: EffectScale
    horizon_n: int
    replications: int
    alpha: float = 0.025
    allocation_r: float = 1.0
    seed: int = 0
    store_trajectories: int = 0
    thin_to: int = 512

    def __post_init__(self) -> None:
        if self.horizon_n < 1:
            raise ConfigError(f"horizon_n must be >= 1, got {self.horizon_n}")
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if not 0 < self.alpha < 1:
            raise ConfigError(
                f"alpha must be strictly inside (0,1) so the threshold exceeds 1, got {self.alpha}"
            )

    @property
    def threshold(self) -> float:
        return 1.0 / self.alpha

    @property
    def log_threshold(self) -> float:
        return math.log(self.threshold)

    def describe(self) -> dict:
        return {
            "truth_ve": self.truth.ve,
            "bet_ve": self.alt_bet.ve,
            "null_ve": self.null.ve,
            "allocation_r": self.allocation_r,
            "horizon_n": self.horizon_n,
            "replications": self.replications,
            "alpha": self.alpha,
            "seed": self.seed,
            "generator": GENERATOR_NAME,
        }


@dataclass
class SimResult:
    """Per-replication outcomes plus crossing summaries."""

    plan: SimPlan
    final_log_e: np.ndarray
    max_log_e: np.ndarray
    crossing_tick: np.ndarray          # first event index reaching the threshold, -1 if never
    trajectories: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    @property
    def frac_cross_ever(self) -> float:
        return float(np.mean(self.crossing_tick >= 0))

    @property
    def frac_cross_at_horizon(self) -> float:
        return float(np.mean(self.final_log_e >= self.plan.log_threshold))

    @property
    def mean_final_log_e(self) -> float:
        return float(np.mean(self.final_log_e))

    @property
    def mean_final_e(self) -> float:
        return float(np.mean(np.exp(self.final_log_e)))

    def stopping_time_histogram(self) -> dict[int, int]:
        ticks, counts = np.unique(self.crossing_tick[self.crossing_tick >= 0], return_counts=True)
        return {int(t): int(c) for t, c in zip(ticks, counts)}

    def to_json(self) -> str:
        """Canonical serialization; byte-identical for identical plans."""
        payload = {
            "plan": self.plan.describe(),
            "frac_cross_ever": repr(self.frac_cross_ever),
            "frac_cross_at_horizon": repr(self.frac_cross_at_horizon),
            "final_log_e": [repr(float(v)) for v in self.final_log_e],
            "crossing_tick": [int(v) for v in self.crossing_tick],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _replication_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _truth_prob(truth: EffectScale, r: float) -> float:
    # hr = 0 (100% effective treatment) is a legal truth: no treatment events.
    if truth.hr == 0.0:
        return 0.0
    return event_prob(truth, r)


def run(plan: SimPlan) -> SimResult:
    """Simulate betting-score trajectories under the plan's truth.

    Each replication draws ``horizon_n`` group labels with the truth's
    event probability and accumulates the per-event log likelihood
    ratios of the plan's bet.
    """
    p_t = _truth_prob(plan.truth, plan.allocation_r)
    step_treat = event_log_lr("treatment", plan.alt_bet, plan.null, plan.allocation_r)
    step_control = event_log_lr("control", plan.alt_bet, plan.null, plan.allocation_r)
    n = plan.horizon_n
    log_thr = plan.log_threshold

    final = np.empty(plan.replications)
    running_max = np.empty(plan.replications)
    crossing = np.full(plan.replications, -1, dtype=np.int64)
    trajectories: list[tuple[np.ndarray, np.ndarray]] = []

    keep = min(plan.store_trajectories, plan.replications)
    if keep:
        thin_idx = np.unique(np.linspace(0, n - 1, num=min(plan.thin_to, n)).astype(np.int64))

    for i in range(plan.replications):
        rng = _replication_rng(plan.seed, i)
        treat = rng.random(n) < p_t
        steps = np.where(treat, step_treat, step_control)
        traj = np.cumsum(steps)
        final[i] = traj[-1]
        running_max[i] = traj.max()
        hits = np.nonzero(traj >= log_thr)[0]
        if hits.size:
            crossing[i] = hits[0] + 1  # 1-based event index
        if i < keep:
            trajectories.append((thin_idx + 1, traj[thin_idx]))

    return SimResult(
        plan=plan,
        final_log_e=final,
        max_log_e=running_max,
        crossing_tick=crossing,
        trajectories=trajectories,
    )


def null_calibration(plan: SimPlan, alphas: tuple[float, ...] = (0.05, 0.025, 0.0025)) -> list[dict]:
    """Ever-crossing frequency against a grid of levels, truth at the null.

    One simulation pass serves every level: a replication crosses level
    alpha when its running maximum reaches log(1/alpha).  Each row
    reports the frequency, its Monte Carlo standard error and whether
    the frequency respects the alpha bound within 3 standard errors.
    """
    if plan.truth.hr != plan.null.hr:
        raise ConfigError("calibration requires truth == null")
    for a in alphas:
        if not 0 < a < 1:
            raise ConfigError(f"alpha must be strictly inside (0,1), got {a}")
    result = run(plan)
    rows = []
    for a in sorted(alphas, reverse=True):
        freq = float(np.mean(result.max_log_e >= math.log(1.0 / a)))
        se = math.sqrt(max(freq * (1.0 - freq), a * (1.0 - a)) / plan.replications)
        rows.append(
            {
                "alpha": a,
                "threshold": 1.0 / a,
                "frac_cross_ever": freq,
                "mc_se": se,
                "within_bound": freq <= a + 3.0 * se,
            }
        )
    return rows
