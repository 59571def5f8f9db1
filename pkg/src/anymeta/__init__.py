"""Anytime-valid e-value meta-analysis for two-group event data.

Betting scores per event, multiplicative combination across trials with
type-I error control at any look, confidence sequences with running
intersection, design diagnostics, and a ledger-driven CLI.
"""

from .confseq import (
    DEFAULT_DELTA_DESIGN,
    ConfSeqState,
    counts_to_z,
    cs_interval,
    cs_stream,
    peto_estimate,
    stratified_summary,
)
from .design import (
    DesignSpec,
    classical_proportion_interval,
    expected_events_to_threshold,
    gaussian_implied_target,
    growth_rate,
    implied_target,
    remaining_target,
)
from .errors import AnymetaError, ConfigError, DomainError, LedgerError, LedgerIntegrityError
from .evalue_core import (
    DEFAULT_MU_DIVISOR,
    BettingState,
    EffectScale,
    EventRecord,
    ZSummary,
    accumulate,
    anytime_p_sequence,
    conservative_p,
    evalue_str,
    event_lr,
    event_log_lr,
    event_prob,
    gaussian_lr,
    gaussian_log_lr,
)
from .ledger import IngestResult, ingest, state_hash
from .meta_combine import (
    CoPrimaryReport,
    EndpointPlan,
    MetaState,
    TrialStream,
    co_primary,
    meta_product,
    monitor,
    two_sided,
    two_sided_log,
)
from .simulate import SimPlan, SimResult, null_calibration, run

__version__ = "0.1.0"
