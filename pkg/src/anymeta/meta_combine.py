"""Cross-trial combination of betting scores with anytime-valid monitoring.

Evidence multiplies across trials within each side (benefit / harm); the
two sides are then mixed by a weighted average, and co-primary endpoints
are combined by alpha-weighted averaging.  The monitored decision latches
permanently once a threshold is crossed.

A trial contributes to the combined score only after an explicit
inclusion transition, which must happen before any of its data is
combined (inclusion-before-unblinding).  Trials excluded after having
contributed keep (freeze) their contribution as of the exclusion tick;
trials excluded before inclusion never contribute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping

from .errors import ConfigError, LedgerError
from .evalue_core import (
    BettingState,
    EffectScale,
    EventRecord,
    ZSummary,
    accumulate,
    gaussian_log_lr,
)

__all__ = [
    "Side",
    "TrialStream",
    "EndpointPlan",
    "CoPrimaryReport",
    "MetaState",
    "meta_product",
    "two_sided_log",
    "two_sided",
    "co_primary",
    "monitor",
]

Side = Literal["left", "right"]
Status = Literal["pending", "included", "excluded"]

DEFAULT_ENDPOINT = "primary"


def _logaddexp(a: float, b: float) -> float:
    if a == float("-inf"):
        return b
    if b == float("-inf"):
        return a
    m = max(a, b)
    return m + math.log(math.exp(a - m) + math.exp(b - m))


@dataclass
class TrialStream:
    """One trial's evidence stream for one endpoint, bet on both sides.

    Data arrives either as individual events (folded through
    :class:`BettingState`) or as interim z-summaries (the latest summary
    fully determines the contribution); the two kinds cannot be mixed
    within one stream.
    """

    trial_id: str
    endpoint_id: str
    alt_left: EffectScale
    alt_right: EffectScale
    null: EffectScale
    allocation_r: float = 1.0
    status: Status = "pending"
    left: BettingState = None  # type: ignore[assignment]
    right: BettingState = None  # type: ignore[assignment]
    zsummary: ZSummary | None = None
    data_kind: Literal["events", "zsummary"] | None = None
    frozen: tuple[float, float] | None = None  # (log left, log right) at exclusion

    def __post_init__(self) -> None:
        if self.left is None:
            self.left = BettingState(alt=self.alt_left, null=self.null, allocation_r=self.allocation_r)
        if self.right is None:
            self.right = BettingState(alt=self.alt_right, null=self.null, allocation_r=self.allocation_r)

    @property
    def n_events(self) -> int:
        if self.data_kind == "zsummary":
            return self.zsummary.n if self.zsummary else 0
        return self.left.n_events

    def log_e(self, side: Side) -> float:
        """Current log e-value of this stream on one side (1 if no data)."""
        if self.data_kind == "zsummary" and self.zsummary is not None:
            alt = self.alt_left if side == "left" else self.alt_right
            return gaussian_log_lr(self.zsummary, alt.mu, self.null.mu)
        state = self.left if side == "left" else self.right
        return state.log_e

    def contribution(self, side: Side) -> float:
        """Log e-value this stream adds to the meta product."""
        if self.status == "included":
            return self.log_e(side)
        if self.status == "excluded" and self.frozen is not None:
            return self.frozen[0] if side == "left" else self.frozen[1]
        return 0.0

    def add_event(self, event: EventRecord) -> None:
        if self.data_kind == "zsummary":
            raise LedgerError(
                f"trial {self.trial_id!r}/{self.endpoint_id!r} already carries "
                "z-summaries; cannot mix in per-event data"
            )
        self.data_kind = "events"
        self.left = accumulate(self.left, event)
        self.right = accumulate(self.right, event)

    def set_zsummary(self, summary: ZSummary) -> None:
        if self.data_kind == "events":
            raise LedgerError(
                f"trial {self.trial_id!r}/{self.endpoint_id!r} already carries "
                "per-event data; cannot mix in z-summaries"
            )
        if self.zsummary is not None and summary.n < self.zsummary.n:
            raise LedgerError(
                f"z-summary event count decreased ({self.zsummary.n} -> {summary.n}) "
                f"for trial {self.trial_id!r}"
            )
        self.data_kind = "zsummary"
        self.zsummary = summary


def meta_product(streams: Iterable[TrialStream], side: Side) -> float:
    """Log of the product of the streams' e-values on one side.

    Included streams contribute their current log e-value, excluded
    streams their frozen value (or nothing if never included), pending
    streams nothing; an empty collection gives log 1 = 0.
    """
    return math.fsum(s.contribution(side) for s in streams)


def two_sided_log(
    left_log_e: float,
    right_log_e: float,
    weights: tuple[float, float] = (0.5, 0.5),
) -> float:
    """Log of the weighted average of the two side products.

    The mixture of e-values with weights summing to 1 is itself an
    e-value; computed with log-sum-exp so huge one-sided products are fine.
    """
    wl, wr = weights
    if wl < 0 or wr < 0 or abs(wl + wr - 1.0) > 1e-12:
        raise ConfigError(f"side weights must be nonnegative and sum to 1, got {weights}")
    terms = []
    if wl > 0:
        terms.append(math.log(wl) + left_log_e)
    if wr > 0:
        terms.append(math.log(wr) + right_log_e)
    if not terms:
        raise ConfigError("at least one side weight must be positive")
    out = terms[0]
    for t in terms[1:]:
        out = _logaddexp(out, t)
    return out


def two_sided(
    left_log_e: float,
    right_log_e: float,
    weights: tuple[float, float] = (0.5, 0.5),
) -> float:
    """Two-sided e-value; see :func:`two_sided_log` for the stable core."""
    return math.exp(two_sided_log(left_log_e, right_log_e, weights))


@dataclass(frozen=True)
class EndpointPlan:
    """Alpha budget of one co-primary endpoint: ``alpha_share`` per side."""

    endpoint_id: str
    alpha_share: float
    mode: Literal["separate", "averaged"] = "separate"

    def __post_init__(self) -> None:
        if not 0 < self.alpha_share < 1:
            raise ConfigError(f"alpha share must be in (0,1), got {self.alpha_share}")

    @property
    def threshold(self) -> float:
        return 1.0 / self.alpha_share


@dataclass(frozen=True)
class CoPrimaryReport:
    """Outcome of a co-primary combination at one look."""

    mode: str
    per_endpoint: dict[str, dict[str, float | bool]]
    rejected_endpoints: tuple[str, ...]
    combined_e: float | None
    combined_threshold: float | None
    reject_conjunction: bool | None
    note: str


def co_primary(
    endpoint_e: Mapping[str, float],
    plan: list[EndpointPlan],
    mode: Literal["separate", "averaged"] | None = None,
) -> CoPrimaryReport:
    """Combine per-endpoint e-values under an alpha-share plan.

    separate : each endpoint is tested against its own 1/alpha_share
        threshold and its null can be rejected individually.
    averaged : the e-values are averaged with weights alpha_share/alpha
        (remaining weight sits on the unreported sides, which are
        nonnegative, so the decision is conservative); crossing
        1/alpha rejects only the conjunction of the endpoint nulls,
        the component identities are not inferential.
    """
    if mode is None:
        modes = {p.mode for p in plan}
        if len(modes) != 1:
            raise ConfigError(f"plan entries disagree on combination mode: {sorted(modes)}")
        mode = modes.pop()
    if mode not in ("separate", "averaged"):
        raise ConfigError(f"unknown co-primary mode {mode!r}")
    missing = [p.endpoint_id for p in plan if p.endpoint_id not in endpoint_e]
    if missing:
        raise ConfigError(f"no e-value supplied for endpoint(s) {missing}")

    per_endpoint: dict[str, dict[str, float | bool]] = {}
    rejected = []
    for p in plan:
        e = float(endpoint_e[p.endpoint_id])
        hit = e >= p.threshold
        per_endpoint[p.endpoint_id] = {
            "e_value": e,
            "alpha_share": p.alpha_share,
            "threshold": p.threshold,
            "rejected": hit,
        }
        if hit:
            rejected.append(p.endpoint_id)

    if mode == "separate":
        return CoPrimaryReport(
            mode=mode,
            per_endpoint=per_endpoint,
            rejected_endpoints=tuple(rejected),
            combined_e=None,
            combined_threshold=None,
            reject_conjunction=None,
            note="each endpoint tested at its own alpha share",
        )

    # Averaged mode: alpha budget counts both sides of every endpoint.
    alpha_total = 2.0 * sum(p.alpha_share for p in plan)
    combined = sum(
        (p.alpha_share / alpha_total) * float(endpoint_e[p.endpoint_id]) for p in plan
    )
    threshold = 1.0 / alpha_total
    return CoPrimaryReport(
        mode=mode,
        per_endpoint=per_endpoint,
        rejected_endpoints=(),
        combined_e=combined,
        combined_threshold=threshold,
        reject_conjunction=combined >= threshold,
        note=(
            "averaged mode rejects only the conjunction null; per-endpoint "
            "e-values are reported for description, not inference"
        ),
    )


@dataclass
class MetaState:
    """Time-indexed combined evidence over all registered trials.

    ``alpha`` is the global level; each endpoint runs the default
    monitored statistic (one-sided products at alpha/2 per side, i.e.
    threshold 2/alpha per side) unless an :class:`EndpointPlan` sets its
    own share.  The decision latches: once any monitored side crosses its
    threshold the state reports reject_null forever.
    """

    alpha: float = 0.05
    weights: tuple[float, float] = (0.5, 0.5)
    tick: int = -1
    trials: dict[str, dict] = field(default_factory=dict)
    streams: dict[tuple[str, str], TrialStream] = field(default_factory=dict)
    plans: dict[str, EndpointPlan] = field(default_factory=dict)
    decision: Literal["continue", "reject_null"] = "continue"
    rejection_tick: int | None = None
    rejected_endpoints: set[str] = field(default_factory=set)
    history: list[dict] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must be in (0,1), got {self.alpha}")

    # -- registration -------------------------------------------------

    def register_trial(
        self,
        trial_id: str,
        alt_left: EffectScale,
        alt_right: EffectScale | None = None,
        null: EffectScale | None = None,
        allocation_r: float = 1.0,
        tick: int = 0,
    ) -> None:
        if trial_id in self.trials:
            raise LedgerError(f"trial {trial_id!r} already registered")
        if null is None:
            null = EffectScale.from_hr(1.0)
        if alt_right is None:
            if alt_left.hr <= 0:
                raise ConfigError(
                    "harm-side alternative must be given explicitly when the "
                    "benefit alternative has hazard ratio 0"
                )
            # Harm side mirrors the benefit side on the hazard-ratio scale.
            alt_right = EffectScale.from_hr(1.0 / alt_left.hr)
        self.trials[trial_id] = {
            "alt_left": alt_left,
            "alt_right": alt_right,
            "null": null,
            "allocation_r": allocation_r,
            "status": "pending",
            "registered_tick": tick,
            "included_tick": None,
        }

    def set_status(self, trial_id: str, status: Status, tick: int) -> None:
        info = self._trial(trial_id)
        if status == "included":
            if info["status"] == "excluded":
                raise LedgerError(f"trial {trial_id!r} was excluded and cannot be re-included")
            if self._has_data(trial_id):
                raise LedgerError(
                    f"trial {trial_id!r} has already supplied data; inclusion must "
                    "be decided before results are seen"
                )
            info["included_tick"] = tick
        if status == "excluded" and info["status"] == "included":
            for (tid, _), stream in self.streams.items():
                if tid == trial_id:
                    stream.frozen = (stream.log_e("left"), stream.log_e("right"))
        info["status"] = status
        for (tid, _), stream in self.streams.items():
            if tid == trial_id:
                stream.status = status

    def set_endpoint_plan(self, plan: EndpointPlan) -> None:
        self.plans[plan.endpoint_id] = plan
        # both sides of every planned endpoint draw on the global budget
        total = 2.0 * sum(p.alpha_share for p in self.plans.values())
        if total > self.alpha + 1e-12:
            raise ConfigError(
                f"endpoint alpha shares (2 x {total / 2:g}) exceed the global alpha {self.alpha}"
            )

    def _trial(self, trial_id: str) -> dict:
        if trial_id not in self.trials:
            raise LedgerError(f"unknown trial {trial_id!r}")
        return self.trials[trial_id]

    def _has_data(self, trial_id: str) -> bool:
        return any(
            s.n_events > 0 for (tid, _), s in self.streams.items() if tid == trial_id
        )

    def _stream(self, trial_id: str, endpoint_id: str) -> TrialStream:
        key = (trial_id, endpoint_id)
        if key not in self.streams:
            info = self._trial(trial_id)
            self.streams[key] = TrialStream(
                trial_id=trial_id,
                endpoint_id=endpoint_id,
                alt_left=info["alt_left"],
                alt_right=info["alt_right"],
                null=info["null"],
                allocation_r=info["allocation_r"],
                status=info["status"],
            )
        return self.streams[key]

    # -- evidence views ------------------------------------------------

    @property
    def endpoint_ids(self) -> list[str]:
        ids = {eid for (_, eid) in self.streams} | set(self.plans)
        return sorted(ids) if ids else [DEFAULT_ENDPOINT]

    def side_share(self, endpoint_id: str) -> float:
        plan = self.plans.get(endpoint_id)
        return plan.alpha_share if plan is not None else self.alpha / 2.0

    def endpoint_streams(self, endpoint_id: str) -> list[TrialStream]:
        return [s for (_, eid), s in sorted(self.streams.items()) if eid == endpoint_id]

    def log_product(self, endpoint_id: str, side: Side) -> float:
        return meta_product(self.endpoint_streams(endpoint_id), side)

    def log_two_sided(self, endpoint_id: str) -> float:
        return two_sided_log(
            self.log_product(endpoint_id, "left"),
            self.log_product(endpoint_id, "right"),
            self.weights,
        )

    # -- monitoring ----------------------------------------------------

    def _apply(self, record: EventRecord) -> None:
        info = self._trial(record.trial_id)
        if record.tick < self.tick:
            raise LedgerError(
                f"event tick {record.tick} precedes already-monitored tick {self.tick}"
            )
        stream = self._stream(record.trial_id, record.endpoint_id)
        stream.status = info["status"]
        stream.add_event(record)

    def _apply_zsummary(
        self, trial_id: str, endpoint_id: str, summary: ZSummary, tick: int
    ) -> None:
        info = self._trial(trial_id)
        if tick < self.tick:
            raise LedgerError(f"z-summary tick {tick} precedes tick {self.tick}")
        stream = self._stream(trial_id, endpoint_id)
        stream.status = info["status"]
        stream.set_zsummary(summary)

    def update_zsummary(
        self, trial_id: str, endpoint_id: str, summary: ZSummary, tick: int
    ) -> None:
        """Replace a trial's interim z-summary and record the tick."""
        self._apply_zsummary(trial_id, endpoint_id, summary, tick)
        self._record_tick(tick)

    def _record_tick(self, tick: int) -> None:
        self.tick = tick
        for endpoint_id in self.endpoint_ids:
            share = self.side_share(endpoint_id)
            log_threshold = math.log(1.0 / share)
            log_left = self.log_product(endpoint_id, "left")
            log_right = self.log_product(endpoint_id, "right")
            log_ts = two_sided_log(log_left, log_right, self.weights)
            if log_left >= log_threshold or log_right >= log_threshold:
                self.rejected_endpoints.add(endpoint_id)
                if self.decision == "continue":
                    self.decision = "reject_null"
                    self.rejection_tick = tick
            self.history.append(
                {
                    "tick": tick,
                    "endpoint_id": endpoint_id,
                    "log_left": log_left,
                    "log_right": log_right,
                    "log_two_sided": log_ts,
                    "side_threshold": 1.0 / share,
                    "decision": self.decision,
                    "trials": {
                        s.trial_id: (s.contribution("left"), s.contribution("right"))
                        for s in self.endpoint_streams(endpoint_id)
                    },
                }
            )


def monitor(meta: MetaState, events: Iterable[EventRecord]) -> MetaState:
    """Fold new events (ordered by tick) into the meta state.

    Simultaneous events at one tick are treated as consecutive bets in
    ledger order; the history records one row per endpoint per tick with
    the post-tick value.  The rejection decision, once latched, is
    permanent regardless of later evidence.
    """
    pending_tick: int | None = None
    for event in events:
        if pending_tick is not None and event.tick != pending_tick:
            if event.tick < pending_tick:
                raise LedgerError(
                    f"events not ordered by tick: {event.tick} after {pending_tick}"
                )
            meta._record_tick(pending_tick)
        meta._apply(event)
        pending_tick = event.tick
    if pending_tick is not None:
        meta._record_tick(pending_tick)
    return meta
