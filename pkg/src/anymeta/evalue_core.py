"""Per-event betting scores (e-values) for two-group event data.

The building block is a bet on whether the next event lands in the
treatment or the control group.  Under a hazard ratio ``hr`` and a
follow-up-time ratio ``r`` (treatment:control), the probability that an
event is a treatment event is ``r*hr / (1 + r*hr)``.  Betting the
likelihood of an alternative effect against the likelihood of a null
effect multiplies the running score by a per-event likelihood ratio;
the product over events is an e-value for the null.

All accumulation happens in natural-log space so that scores like 1e8
(and far larger meta products) never overflow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

from .errors import DomainError, LedgerError

__all__ = [
    "DEFAULT_MU_DIVISOR",
    "EffectScale",
    "EventRecord",
    "BettingState",
    "ZSummary",
    "DegenerateAlternativeWarning",
    "event_prob",
    "event_lr",
    "event_log_lr",
    "accumulate",
    "gaussian_lr",
    "gaussian_log_lr",
    "conservative_p",
    "anytime_p_sequence",
    "evalue_str",
]

# Divisor in the hazard-ratio -> Gaussian-drift map mu = log(hr)/divisor.
# The value 4 matches the reference analyses this package reproduces;
# note that the conventional local-alternative drift of a 1:1 logrank
# statistic corresponds to divisor 2.  Configurable everywhere it is used;
# see README ("Drift scale") before changing it.
DEFAULT_MU_DIVISOR = 4.0

Group = Literal["treatment", "control"]

_GROUPS = ("treatment", "control")


class DegenerateAlternativeWarning(UserWarning):
    """The alternative puts zero probability on an observed outcome."""


def _check_finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class EffectScale:
    """One treatment effect in three equivalent encodings.

    ve : vaccine efficacy, ``1 - hr``, in (-inf, 1]
    hr : hazard ratio, in [0, inf); 0 encodes a 100% effective treatment
    mu : Gaussian drift per sqrt(event), ``log(hr)/mu_divisor``
    """

    ve: float
    hr: float
    mu: float
    mu_divisor: float = DEFAULT_MU_DIVISOR

    @classmethod
    def from_ve(cls, ve: float, mu_divisor: float = DEFAULT_MU_DIVISOR) -> "EffectScale":
        _check_finite("ve", ve)
        if ve > 1.0:
            raise DomainError(f"vaccine efficacy must be <= 1, got {ve}")
        hr = 1.0 - ve
        return cls(ve=float(ve), hr=hr, mu=_mu_of_hr(hr, mu_divisor), mu_divisor=mu_divisor)

    @classmethod
    def from_hr(cls, hr: float, mu_divisor: float = DEFAULT_MU_DIVISOR) -> "EffectScale":
        _check_finite("hr", hr)
        if hr < 0.0:
            raise DomainError(f"hazard ratio must be >= 0, got {hr}")
        return cls(ve=1.0 - hr, hr=float(hr), mu=_mu_of_hr(hr, mu_divisor), mu_divisor=mu_divisor)

    @classmethod
    def from_mu(cls, mu: float, mu_divisor: float = DEFAULT_MU_DIVISOR) -> "EffectScale":
        hr = math.exp(mu_divisor * mu) if math.isfinite(mu) else 0.0
        return cls(ve=1.0 - hr, hr=hr, mu=float(mu), mu_divisor=mu_divisor)

    @property
    def is_null_effect(self) -> bool:
        return self.hr == 1.0


def _mu_of_hr(hr: float, mu_divisor: float) -> float:
    if mu_divisor <= 0:
        raise DomainError(f"mu divisor must be positive, got {mu_divisor}")
    if hr == 0.0:
        return float("-inf")
    return math.log(hr) / mu_divisor


@dataclass(frozen=True)
class EventRecord:
    """One observed endpoint event."""

    trial_id: str
    endpoint_id: str
    tick: int
    group: Group

    def __post_init__(self) -> None:
        if self.group not in _GROUPS:
            raise DomainError(f"group must be one of {_GROUPS}, got {self.group!r}")
        if self.tick < 0:
            raise DomainError(f"tick must be nonnegative, got {self.tick}")


@dataclass(frozen=True)
class ZSummary:
    """A summary z-statistic based on ``n`` events."""

    z: float
    n: int

    def __post_init__(self) -> None:
        _check_finite("z", self.z)
        if self.n < 1:
            raise DomainError(f"summary event count must be >= 1, got {self.n}")


@dataclass(frozen=True)
class BettingState:
    """Running log e-value of one event-by-event bet (a pure fold).

    ``log_e`` is always the sum of the per-event log likelihood ratios of
    the events processed so far; it is 0 (e-value 1) before any event.
    """

    alt: EffectScale
    null: EffectScale
    allocation_r: float = 1.0
    n_treatment: int = 0
    n_control: int = 0
    log_e: float = 0.0
    history: tuple[tuple[int, float], ...] = field(default_factory=tuple)

    @property
    def n_events(self) -> int:
        return self.n_treatment + self.n_control

    @property
    def e_value(self) -> float:
        return math.exp(self.log_e)

    @property
    def last_tick(self) -> int | None:
        return self.history[-1][0] if self.history else None


def event_prob(effect: EffectScale, allocation_r: float = 1.0) -> float:
    """Probability that the next event is a treatment event.

    Equals ``r*hr / (1 + r*hr)``; for r = 1 and efficacy v this is
    ``(1-v)/(2-v)``, e.g. 70/170 for a 30% effect.
    """
    _check_finite("allocation_r", allocation_r)
    if allocation_r <= 0:
        raise DomainError(f"allocation ratio must be positive, got {allocation_r}")
    if not math.isfinite(effect.hr) or effect.hr <= 0:
        raise DomainError(f"hazard ratio must be positive and finite, got {effect.hr}")
    x = allocation_r * effect.hr
    return x / (1.0 + x)


def event_log_lr(group: Group, alt: EffectScale, null: EffectScale, r: float = 1.0) -> float:
    """Log likelihood ratio of one event under ``alt`` versus ``null``.

    A treatment event contributes log(p1/p0), a control event
    log((1-p1)/(1-p0)), with p the per-event treatment probabilities.
    An alternative with hr = 0 assigns probability zero to treatment
    events; observing one then returns -inf (the bet is lost for good)
    and raises :class:`DegenerateAlternativeWarning`.
    """
    if group not in _GROUPS:
        raise DomainError(f"group must be one of {_GROUPS}, got {group!r}")
    p0 = event_prob(null, r)
    if alt.hr == 0.0:
        if group == "treatment":
            warnings.warn(
                "alternative with hr=0 observed a treatment event; "
                "betting score is absorbed at 0",
                DegenerateAlternativeWarning,
                stacklevel=2,
            )
            return float("-inf")
        return math.log(1.0) - math.log1p(-p0)
    p1 = event_prob(alt, r)
    if group == "treatment":
        return math.log(p1) - math.log(p0)
    return math.log1p(-p1) - math.log1p(-p0)


def event_lr(group: Group, alt: EffectScale, null: EffectScale, r: float = 1.0) -> float:
    """Per-event likelihood ratio (the multiplication factor of the stake)."""
    return math.exp(event_log_lr(group, alt, null, r))


def accumulate(state: BettingState, event: EventRecord) -> BettingState:
    """Reinvest the running score in one more event; returns a new state."""
    last = state.last_tick
    if last is not None and event.tick < last:
        raise LedgerError(
            f"out-of-order tick {event.tick} after {last} "
            f"for trial {event.trial_id!r}/{event.endpoint_id!r}"
        )
    step = event_log_lr(event.group, state.alt, state.null, state.allocation_r)
    log_e = state.log_e + step
    return replace(
        state,
        n_treatment=state.n_treatment + (event.group == "treatment"),
        n_control=state.n_control + (event.group == "control"),
        log_e=log_e,
        history=state.history + ((event.tick, log_e),),
    )


def gaussian_log_lr(summary: ZSummary, mu1: float, mu0: float) -> float:
    """Log ratio of unit-variance normal densities with means mu1*sqrt(n)
    and mu0*sqrt(n), evaluated at the observed z."""
    _check_finite("mu1", mu1)
    _check_finite("mu0", mu0)
    rn = math.sqrt(summary.n)
    return rn * summary.z * (mu1 - mu0) - summary.n * (mu1 * mu1 - mu0 * mu0) / 2.0


def gaussian_lr(summary: ZSummary, mu1: float, mu0: float) -> float:
    """E-value of a z-statistic bet on drift ``mu1`` against null ``mu0``."""
    return math.exp(gaussian_log_lr(summary, mu1, mu0))


def conservative_p(e: float) -> float:
    """Inverse of an e-value, capped at 1.  Anytime-valid when applied to
    the running maximum of a betting-score sequence."""
    if not (e > 0) or not math.isfinite(e):
        if e == float("inf"):
            return 0.0
        raise DomainError(f"e-value must be positive, got {e!r}")
    return min(1.0, 1.0 / e)


def anytime_p_sequence(history: Sequence[float]) -> tuple[list[float], list[float]]:
    """Instantaneous and running-minimum p-values from log e-values.

    Returns ``(instantaneous, running_min)``.  The running minimum is the
    headline anytime-valid p-value; it is nonincreasing by construction.
    """
    if len(history) == 0:
        raise DomainError("history must be nonempty")
    instantaneous: list[float] = []
    running: list[float] = []
    best = 1.0
    for log_e in history:
        p = min(1.0, math.exp(-log_e))
        best = min(best, p)
        instantaneous.append(p)
        running.append(best)
    return instantaneous, running


_LOG10 = math.log(10.0)


def evalue_str(log_e: float, digits: int = 6) -> str:
    """Decimal rendering of exp(log_e) that never overflows.

    Values of moderate size print plainly ("1.84"); extreme values print
    in scientific notation computed in log space ("1.17974e+08").
    """
    if log_e == float("-inf"):
        return "0"
    if not math.isfinite(log_e):
        return "inf"
    log10 = log_e / _LOG10
    if abs(log10) < 6:
        return f"{math.exp(log_e):.{digits}g}"
    exponent = math.floor(log10)
    mantissa = 10.0 ** (log10 - exponent)
    return f"{mantissa:.{digits - 1}f}e{exponent:+03d}"
