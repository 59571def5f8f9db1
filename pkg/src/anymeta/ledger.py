"""Append-only analysis ledger: the single source of truth for a meta-analysis.

One JSON object per line, each carrying a checksum of its own canonical
serialization.  Replaying a ledger from scratch is a pure function of its
bytes, so the resulting state hash is reproducible and re-ingesting is
idempotent.

Record types (flat key-value objects):

    config           analysis settings; must precede all data records
    trial_registered trial id plus its betting configuration
    trial_included / trial_excluded   inclusion workflow transitions
    event            one endpoint event: tick, trial, endpoint, group
    zsummary         interim summary statistic: tick, trial, endpoint, z, n
    endpoint_plan    alpha share for one co-primary endpoint

Confidence sequences emitted by replay are estimation summaries over the
currently included trials (an excluded trial drops out of the estimate;
its frozen test contribution is handled by the combination layer).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from . import confseq as cs
from .errors import ConfigError, LedgerError, LedgerIntegrityError
from .evalue_core import DEFAULT_MU_DIVISOR, EffectScale, EventRecord, ZSummary
from .meta_combine import DEFAULT_ENDPOINT, EndpointPlan, MetaState

__all__ = [
    "RECORD_TYPES",
    "DEFAULT_CONFIG",
    "make_record",
    "append_records",
    "read_ledger",
    "IngestResult",
    "replay",
    "ingest",
    "state_hash",
]

RECORD_TYPES = (
    "config",
    "trial_registered",
    "trial_included",
    "trial_excluded",
    "event",
    "zsummary",
    "endpoint_plan",
)

DEFAULT_CONFIG = {
    "alpha": 0.05,
    "side_weights": [0.5, 0.5],
    "cs_alpha": 0.1,
    "delta_design": cs.DEFAULT_DELTA_DESIGN,
    "mu_divisor": DEFAULT_MU_DIVISOR,
    "rng": "philox4x64",
    "seed": 0,
}

_REQUIRED_FIELDS = {
    "config": (),
    "trial_registered": ("trial_id",),
    "trial_included": ("trial_id", "tick"),
    "trial_excluded": ("trial_id", "tick"),
    "event": ("trial_id", "endpoint_id", "tick", "group"),
    "zsummary": ("trial_id", "endpoint_id", "tick", "z", "n"),
    "endpoint_plan": ("endpoint_id", "alpha_share"),
}


def canonical_json(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def line_checksum(record: dict) -> str:
    body = {k: v for k, v in record.items() if k != "checksum"}
    return hashlib.sha256(canonical_json(body).encode()).hexdigest()[:16]


def make_record(record_type: str, **fields) -> dict:
    """Build a checksummed ledger record."""
    if record_type not in RECORD_TYPES:
        raise LedgerError(f"unknown record type {record_type!r}")
    record = {"record_type": record_type, **fields}
    for name in _REQUIRED_FIELDS[record_type]:
        if name not in record:
            raise LedgerError(f"{record_type} record is missing field {name!r}")
    record["checksum"] = line_checksum(record)
    return record


def append_records(path: str | Path, records: Iterable[dict]) -> None:
    """Append checksummed records to the ledger file (created if absent)."""
    lines = []
    for record in records:
        if "checksum" not in record:
            record = make_record(record["record_type"], **{k: v for k, v in record.items() if k != "record_type"})
        lines.append(canonical_json(record))
    with open(path, "a", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def read_ledger(path: str | Path) -> list[dict]:
    """Parse and checksum-validate every line; errors carry line numbers."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LedgerIntegrityError(f"line {lineno}: malformed record ({exc.msg})") from exc
            if not isinstance(record, dict) or "record_type" not in record:
                raise LedgerIntegrityError(f"line {lineno}: not a ledger record")
            if record.get("checksum") != line_checksum(record):
                raise LedgerIntegrityError(f"line {lineno}: checksum mismatch")
            if record["record_type"] not in RECORD_TYPES:
                raise LedgerIntegrityError(
                    f"line {lineno}: unknown record type {record['record_type']!r}"
                )
            for name in _REQUIRED_FIELDS[record["record_type"]]:
                if name not in record:
                    raise LedgerIntegrityError(
                        f"line {lineno}: {record['record_type']} record is missing {name!r}"
                    )
            records.append(record)
    return records


@dataclass
class IngestResult:
    """Everything a replay produces: combined state, confidence sequences."""

    meta: MetaState
    confseq: dict[str, list[cs.ConfSeqState]]
    config: dict
    n_records: int = 0

    @property
    def decision(self) -> str:
        return self.meta.decision


def _effect_from_record(record: dict, key_ve: str, key_hr: str, mu_divisor: float) -> EffectScale | None:
    if key_ve in record:
        return EffectScale.from_ve(float(record[key_ve]), mu_divisor=mu_divisor)
    if key_hr in record:
        return EffectScale.from_hr(float(record[key_hr]), mu_divisor=mu_divisor)
    return None


class _CsTracker:
    """Stratified per-endpoint confidence sequence over included trials."""

    def __init__(self, alpha: float, delta: float, mu_divisor: float) -> None:
        self.alpha = alpha
        self.delta = delta
        self.mu_divisor = mu_divisor
        self.states: dict[str, list[cs.ConfSeqState]] = {}
        self._intersections: dict[str, tuple[float, float]] = {}

    def record(self, meta: MetaState, tick: int) -> None:
        for endpoint_id in meta.endpoint_ids:
            summaries = []
            for stream in meta.endpoint_streams(endpoint_id):
                if stream.status != "included" or stream.n_events == 0:
                    continue
                if stream.data_kind == "zsummary":
                    summaries.append(stream.zsummary)
                else:
                    summaries.append(cs.counts_to_z(stream.left.n_treatment, stream.left.n_control))
            if not summaries:
                continue
            summary = cs.stratified_summary(summaries)
            lo, hi = cs.cs_interval(summary, self.alpha, self.delta, self.mu_divisor)
            ilo, ihi = self._intersections.get(endpoint_id, (0.0, float("inf")))
            ilo, ihi = max(ilo, lo), min(ihi, hi)
            self._intersections[endpoint_id] = (ilo, ihi)
            self.states.setdefault(endpoint_id, []).append(
                cs.ConfSeqState(
                    tick=tick,
                    n=summary.n,
                    estimate=cs.peto_estimate(summary, self.mu_divisor),
                    interval=(lo, hi),
                    intersection=(ilo, ihi),
                    alpha=self.alpha,
                    delta_design=self.delta,
                )
            )


def replay(records: list[dict]) -> IngestResult:
    """Fold validated records into a fresh meta-analysis state."""
    config = dict(DEFAULT_CONFIG)
    meta: MetaState | None = None
    tracker: _CsTracker | None = None
    last_data_tick = -1
    pending_tick: int | None = None

    def ensure_state() -> tuple[MetaState, _CsTracker]:
        nonlocal meta, tracker
        if meta is None:
            meta = MetaState(alpha=float(config["alpha"]), weights=tuple(config["side_weights"]))
            tracker = _CsTracker(
                alpha=float(config["cs_alpha"]),
                delta=float(config["delta_design"]),
                mu_divisor=float(config["mu_divisor"]),
            )
        return meta, tracker

    def flush() -> None:
        nonlocal pending_tick
        if pending_tick is not None:
            meta._record_tick(pending_tick)
            tracker.record(meta, pending_tick)
            pending_tick = None

    for record in records:
        kind = record["record_type"]
        if kind == "config":
            if meta is not None:
                raise LedgerError("config record must precede all other records")
            for key, value in record.items():
                if key in ("record_type", "checksum"):
                    continue
                if key not in DEFAULT_CONFIG:
                    raise ConfigError(f"unknown config key {key!r}")
                config[key] = value
            continue

        state, _ = ensure_state()
        mu_divisor = float(config["mu_divisor"])

        if kind == "trial_registered":
            flush()
            alt = _effect_from_record(record, "alt_ve", "alt_hr", mu_divisor)
            if alt is None:
                raise LedgerError(f"trial_registered for {record['trial_id']!r} needs alt_ve or alt_hr")
            alt_right = _effect_from_record(record, "alt_ve_harm", "alt_hr_harm", mu_divisor)
            null = _effect_from_record(record, "null_ve", "null_hr", mu_divisor)
            state.register_trial(
                record["trial_id"],
                alt_left=alt,
                alt_right=alt_right,
                null=null,
                allocation_r=float(record.get("allocation_r", 1.0)),
                tick=int(record.get("tick", 0)),
            )
        elif kind in ("trial_included", "trial_excluded"):
            flush()
            status = "included" if kind == "trial_included" else "excluded"
            state.set_status(record["trial_id"], status, int(record["tick"]))
        elif kind == "endpoint_plan":
            flush()
            state.set_endpoint_plan(
                EndpointPlan(
                    endpoint_id=record["endpoint_id"],
                    alpha_share=float(record["alpha_share"]),
                    mode=record.get("mode", "separate"),
                )
            )
        elif kind == "event":
            tick = int(record["tick"])
            if tick < last_data_tick:
                raise LedgerError(f"out-of-order tick {tick} after {last_data_tick}")
            if pending_tick is not None and tick != pending_tick:
                flush()
            state._apply(
                EventRecord(
                    trial_id=record["trial_id"],
                    endpoint_id=record.get("endpoint_id", DEFAULT_ENDPOINT),
                    tick=tick,
                    group=record["group"],
                )
            )
            pending_tick = tick
            last_data_tick = tick
        elif kind == "zsummary":
            tick = int(record["tick"])
            if tick < last_data_tick:
                raise LedgerError(f"out-of-order tick {tick} after {last_data_tick}")
            if pending_tick is not None and tick != pending_tick:
                flush()
            state._apply_zsummary(
                record["trial_id"],
                record.get("endpoint_id", DEFAULT_ENDPOINT),
                ZSummary(z=float(record["z"]), n=int(record["n"])),
                tick,
            )
            pending_tick = tick
            last_data_tick = tick

    if meta is None:
        meta, tracker = ensure_state()
    flush()
    return IngestResult(
        meta=meta,
        confseq=tracker.states,
        config=config,
        n_records=len(records),
    )


def ingest(path: str | Path) -> IngestResult:
    """Validate and replay a ledger file."""
    return replay(read_ledger(path))


def _snapshot(result: IngestResult) -> dict:
    meta = result.meta
    streams = {}
    for (tid, eid), s in sorted(meta.streams.items()):
        streams[f"{tid}/{eid}"] = {
            "status": s.status,
            "kind": s.data_kind,
            "n_treatment": s.left.n_treatment,
            "n_control": s.left.n_control,
            "log_left": s.log_e("left"),
            "log_right": s.log_e("right"),
            "zsummary": [s.zsummary.z, s.zsummary.n] if s.zsummary else None,
            "frozen": list(s.frozen) if s.frozen else None,
        }
    history = [
        {k: (sorted(v.items()) if isinstance(v, dict) else v) for k, v in row.items()}
        for row in meta.history
    ]
    confseq = {
        eid: [
            [st.tick, st.n, st.interval[0], st.interval[1], st.intersection[0], st.intersection[1]]
            for st in states
        ]
        for eid, states in sorted(result.confseq.items())
    }
    return {
        "config": {k: result.config[k] for k in sorted(result.config)},
        "tick": meta.tick,
        "decision": meta.decision,
        "rejection_tick": meta.rejection_tick,
        "trials": {
            tid: {
                "status": info["status"],
                "alt_ve": info["alt_left"].ve,
                "alt_ve_harm": info["alt_right"].ve,
                "null_ve": info["null"].ve,
                "allocation_r": info["allocation_r"],
            }
            for tid, info in sorted(meta.trials.items())
        },
        "streams": streams,
        "history": history,
        "confseq": confseq,
    }


def state_hash(result: IngestResult) -> str:
    """Deterministic digest of the replayed state."""
    return hashlib.sha256(json.dumps(_snapshot(result), sort_keys=True).encode()).hexdigest()
