"""Anytime-valid confidence sequences for the hazard ratio.

Each candidate null hazard ratio theta0 is tested by a one-sided
Gaussian e-value (drift null mu0 = log(theta0)/divisor, fixed
alternative mu0 -/+ delta, each side at level alpha/2); the confidence
set keeps every theta0 whose e-values stay below 2/alpha.  That
inversion has the closed form

    mu in [ z/sqrt(n) - b,  z/sqrt(n) + b ],
    b = delta/2 + log(2/alpha) / (n * delta),

mapped back to the hazard-ratio scale.  Because the intervals are valid
at every event count simultaneously, their running intersection is too.

Event-count streams are summarised by the Haldane-corrected statistic
z = sqrt(n)/2 * log((n_t + 1/2)/(n_c + 1/2)), chosen so that the point
estimate recovers the empirical count ratio (see :func:`counts_to_z`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ConfigError, DomainError
from .evalue_core import DEFAULT_MU_DIVISOR, EffectScale, EventRecord, ZSummary

__all__ = [
    "DEFAULT_DELTA_DESIGN",
    "ConfSeqState",
    "counts_to_z",
    "peto_estimate",
    "cs_half_width",
    "cs_interval",
    "cs_stream",
    "stratified_summary",
]

# Default per-side drift offset: the minimal hazard ratio of interest 0.8
# expressed on the drift scale, |log(0.8)|/4.
DEFAULT_DELTA_DESIGN = abs(math.log(0.8)) / DEFAULT_MU_DIVISOR


@dataclass(frozen=True)
class ConfSeqState:
    """Interval and running intersection after one more betting round."""

    tick: int
    n: int
    estimate: EffectScale | None
    interval: tuple[float, float]          # hazard-ratio scale
    intersection: tuple[float, float]      # hazard-ratio scale
    alpha: float
    delta_design: float


def counts_to_z(n_treatment: int, n_control: int) -> ZSummary:
    """Summarise group counts as a z-statistic on n events.

    Uses the Haldane-Anscombe 1/2 correction so zero counts stay finite.
    The scaling is fixed so that ``peto_estimate(counts_to_z(t, c))``
    returns (t + 1/2)/(c + 1/2), the empirical hazard-ratio estimate.
    """
    n = n_treatment + n_control
    if n < 1:
        raise DomainError("need at least one event to form a summary")
    z = math.sqrt(n) / 2.0 * math.log((n_treatment + 0.5) / (n_control + 0.5))
    return ZSummary(z=z, n=n)


def peto_estimate(z: ZSummary, mu_divisor: float = DEFAULT_MU_DIVISOR) -> EffectScale:
    """Hazard-ratio point estimate from a logrank-type statistic.

    log(hr) = z / sqrt(V) with V = n/4 under balanced allocation,
    i.e. hr = exp(2 z / sqrt(n)).
    """
    hr = math.exp(2.0 * z.z / math.sqrt(z.n))
    return EffectScale.from_hr(hr, mu_divisor=mu_divisor)


def cs_half_width(n: int, alpha: float, delta_design: float) -> float:
    """Half width b of the drift-scale interval at n events."""
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must be in (0,1), got {alpha}")
    if not (delta_design > 0 and math.isfinite(delta_design)):
        raise ConfigError(f"delta_design must be positive and finite, got {delta_design}")
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    return delta_design / 2.0 + math.log(2.0 / alpha) / (n * delta_design)


def cs_interval(
    z: ZSummary,
    alpha: float = 0.1,
    delta_design: float = DEFAULT_DELTA_DESIGN,
    mu_divisor: float = DEFAULT_MU_DIVISOR,
) -> tuple[float, float]:
    """Anytime-valid interval for the hazard ratio at one betting round."""
    b = cs_half_width(z.n, alpha, delta_design)
    center = z.z / math.sqrt(z.n)
    return (
        math.exp(mu_divisor * (center - b)),
        math.exp(mu_divisor * (center + b)),
    )


def _full_range_state(alpha: float, delta_design: float) -> ConfSeqState:
    full = (0.0, float("inf"))
    return ConfSeqState(
        tick=0, n=0, estimate=None, interval=full, intersection=full,
        alpha=alpha, delta_design=delta_design,
    )


def cs_stream(
    stream: Iterable,
    alpha: float = 0.1,
    delta_design: float = DEFAULT_DELTA_DESIGN,
    mu_divisor: float = DEFAULT_MU_DIVISOR,
) -> list[ConfSeqState]:
    """Interval plus running intersection, one state per betting round.

    ``stream`` may contain group labels ("treatment"/"control"),
    :class:`EventRecord` instances, or :class:`ZSummary` instances (for
    summary-statistic updates).  The first element fixes the kind.  The
    leading state covers the full parameter range (no data yet); once a
    value leaves the intersection it never comes back.
    """
    states = [_full_range_state(alpha, delta_design)]
    inter_lo, inter_hi = states[0].intersection
    n_treatment = 0
    n_control = 0
    tick = 0
    for item in stream:
        tick += 1
        if isinstance(item, ZSummary):
            summary = item
            item_tick = tick
        else:
            if isinstance(item, EventRecord):
                group, item_tick = item.group, item.tick
            else:
                group, item_tick = item, tick
            if group == "treatment":
                n_treatment += 1
            elif group == "control":
                n_control += 1
            else:
                raise DomainError(f"unknown group label {group!r}")
            summary = counts_to_z(n_treatment, n_control)
        lo, hi = cs_interval(summary, alpha, delta_design, mu_divisor)
        inter_lo = max(inter_lo, lo)
        inter_hi = min(inter_hi, hi)
        states.append(
            ConfSeqState(
                tick=item_tick,
                n=summary.n,
                estimate=peto_estimate(summary, mu_divisor),
                interval=(lo, hi),
                intersection=(inter_lo, inter_hi),
                alpha=alpha,
                delta_design=delta_design,
            )
        )
    return states


def stratified_summary(summaries: Sequence[ZSummary]) -> ZSummary:
    """Combine per-trial summaries into one stratified statistic.

    z = sum(z_i * sqrt(n_i)) / sqrt(sum(n_i)) on n = sum(n_i) events;
    feeding this through the same interval machinery yields the
    experimental "typical hazard ratio" sequence for a meta-analysis.
    """
    if not summaries:
        raise DomainError("need at least one summary")
    n = sum(s.n for s in summaries)
    z = sum(s.z * math.sqrt(s.n) for s in summaries) / math.sqrt(n)
    return ZSummary(z=z, n=n)
