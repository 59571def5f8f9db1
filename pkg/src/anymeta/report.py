"""Evidence tables, SVG figures and the reference artifact bundle.

All figures are SVG with a pinned hash salt and no embedded timestamps,
so identical inputs produce identical bytes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "anymeta"

import matplotlib.pyplot as plt
import numpy as np

from . import confseq as cs
from . import design, simulate, worked_examples as wx
from .errors import ConfigError, DomainError
from .evalue_core import EffectScale, conservative_p, evalue_str
from .ledger import IngestResult
from .simulate import SimResult

__all__ = [
    "ReportBundle",
    "evidence_table",
    "write_csv",
    "emit_report",
    "fig_trajectories",
    "fig_expected_events",
    "fig_confseq",
    "fig_dashboard",
    "reproduce_reference_artifacts",
]

_SAVEFIG_KW = {"format": "svg", "metadata": {"Date": None}}

# Display clamp for unbounded hazard-ratio interval endpoints.
HR_DISPLAY_BOUNDS = (1e-2, 1e2)


@dataclass(frozen=True)
class ReportBundle:
    """Paths of everything one report emission produced."""

    csv_path: Path | None
    figure_paths: tuple[Path, ...]


def _fmt(value: float) -> str:
    # Full-precision floats so a re-parsed CSV reproduces the table exactly.
    return repr(float(value))


def evidence_table(result: IngestResult) -> tuple[list[str], list[list]]:
    """Per-tick evidence table: one row per (tick, endpoint)."""
    meta = result.meta
    trials = sorted(meta.trials)
    header = (
        ["tick", "endpoint_id", "meta_log_e_left", "meta_log_e_right", "meta_e_left",
         "meta_e_right", "meta_log_e_two_sided", "side_threshold", "anytime_p",
         "decision"]
        + [f"{tid}_log_e_left" for tid in trials]
        + [f"{tid}_log_e_right" for tid in trials]
        + ["cs_lower_hr", "cs_upper_hr", "cs_inter_lower_hr", "cs_inter_upper_hr"]
    )
    cs_by_key = {
        (state.tick, eid): state
        for eid, states in result.confseq.items()
        for state in states
    }
    rows: list[list] = []
    running_p: dict[str, float] = {}
    for entry in meta.history:
        eid = entry["endpoint_id"]
        log_best = max(entry["log_left"], entry["log_right"])
        p = conservative_p(math.exp(min(log_best, 700.0)))
        running_p[eid] = min(running_p.get(eid, 1.0), p)
        state = cs_by_key.get((entry["tick"], eid))
        row = (
            [entry["tick"], eid, _fmt(entry["log_left"]), _fmt(entry["log_right"]),
             evalue_str(entry["log_left"]), evalue_str(entry["log_right"]),
             _fmt(entry["log_two_sided"]), _fmt(entry["side_threshold"]),
             _fmt(running_p[eid]), entry["decision"]]
            + [_fmt(entry["trials"].get(tid, (0.0, 0.0))[0]) for tid in trials]
            + [_fmt(entry["trials"].get(tid, (0.0, 0.0))[1]) for tid in trials]
        )
        if state is not None:
            row += [_fmt(state.interval[0]), _fmt(state.interval[1]),
                    _fmt(state.intersection[0]), _fmt(state.intersection[1])]
        else:
            row += ["", "", "", ""]
        rows.append(row)
    return header, rows


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _new_axes(width: float = 7.0, height: float = 4.2):
    fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)
    return path


def fig_trajectories(
    result: SimResult,
    path: str | Path,
    title: str,
    implied_target: float | None = None,
    growth_ray: float | None = None,
    max_lines: int = 100,
) -> Path:
    """Betting-score trajectories on a log evidence axis, with the final
    score histogram at the right and the 1/alpha threshold dashed."""
    if not result.trajectories:
        raise DomainError("plan stored no trajectories; set store_trajectories")
    fig, (ax, axh) = plt.subplots(
        1, 2, figsize=(8.4, 4.2), sharey=True, width_ratios=[4, 1]
    )
    for ticks, values in result.trajectories[:max_lines]:
        ax.plot(ticks, np.exp(values), color="#86b0d4", linewidth=0.6, alpha=0.6)
    ax.axhline(result.plan.threshold, linestyle="--", color="black",
               label=f"threshold 1/alpha = {result.plan.threshold:g}")
    if implied_target is not None:
        ax.axhline(implied_target, linestyle="-", color="#d55e00",
                   label=f"implied target = {implied_target:.6g}")
    if growth_ray is not None:
        n = result.plan.horizon_n
        ax.plot([1, n], [math.exp(growth_ray), math.exp(growth_ray * n)],
                color="#d55e00", linewidth=1.4, label="expected growth")
    ax.set_yscale("log")
    ax.set_xlabel("betting round (events)")
    ax.set_ylabel("betting score (e-value)")
    ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8)
    finals = np.exp(result.final_log_e)
    lo, hi = finals.min(), finals.max()
    bins = np.geomspace(max(lo, 1e-300), max(hi, lo * 10), 40)
    axh.hist(finals, bins=bins, orientation="horizontal", color="#86b0d4")
    axh.axhline(result.plan.threshold, linestyle="--", color="black")
    axh.set_xlabel("runs")
    fig.tight_layout()
    return _save(fig, path)


def fig_expected_events(
    null: EffectScale,
    path: str | Path,
    alpha: float = 0.025,
    bet_ves: tuple[float, ...] = (0.4, 0.5, 0.6),
    truth_grid: tuple[float, float] = (0.35, 0.80),
    points: int = 91,
) -> Path:
    """Expected events to the 1/alpha threshold against the true efficacy,
    one curve per betting choice."""
    fig, ax = _new_axes()
    grid = np.linspace(truth_grid[0], truth_grid[1], points)
    styles = ["-", ":", "--"]
    for ve_bet, style in zip(bet_ves, styles):
        bet = EffectScale.from_ve(ve_bet)
        ys = np.array([
            design.expected_events_to_threshold(EffectScale.from_ve(v), bet, null, alpha)
            for v in grid
        ])
        ys[~np.isfinite(ys)] = np.nan  # unfavorable region: no expected count
        ax.plot(grid * 100, ys, style, label=f"bet {ve_bet:.0%} VE")
    ax.set_xlabel("true vaccine efficacy (%)")
    ax.set_ylabel(f"expected events to reach 1/alpha = {1 / alpha:g}")
    ax.set_title("Expected events needed, by betting strategy")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def _clamped(values: list[float]) -> np.ndarray:
    lo, hi = HR_DISPLAY_BOUNDS
    return np.clip(np.asarray(values, dtype=float), lo, hi)


def fig_confseq(states: list[cs.ConfSeqState], path: str | Path, title: str) -> Path:
    """Interval and running intersection per betting round, hazard-ratio scale."""
    data = [s for s in states if s.n > 0]
    if not data:
        raise DomainError("confidence sequence has no data ticks")
    fig, ax = _new_axes()
    ns = [s.n for s in data]
    ax.fill_between(ns, _clamped([s.interval[0] for s in data]),
                    _clamped([s.interval[1] for s in data]),
                    color="#c6dbef", label="interval")
    ax.fill_between(ns, _clamped([s.intersection[0] for s in data]),
                    _clamped([s.intersection[1] for s in data]),
                    color="#6baed6", alpha=0.7, label="running intersection")
    ax.plot(ns, _clamped([s.estimate.hr for s in data]), color="black",
            linewidth=1.0, label="estimate")
    ax.axhline(1.0, linestyle=":", color="gray")
    ax.set_yscale("log")
    ax.set_xlabel("betting round (events)")
    ax.set_ylabel("hazard ratio")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def fig_dashboard(result: IngestResult, path: str | Path, endpoint_id: str | None = None) -> Path:
    """Per-trial and combined evidence over time with the decision threshold."""
    meta = result.meta
    if not meta.history:
        raise DomainError("no monitored ticks to plot")
    if endpoint_id is None:
        endpoint_id = meta.endpoint_ids[0]
    rows = [r for r in meta.history if r["endpoint_id"] == endpoint_id]
    ticks = [r["tick"] for r in rows]
    fig, ax = _new_axes()
    trials = sorted(meta.trials)
    for tid in trials:
        ys = [math.exp(r["trials"].get(tid, (0.0, 0.0))[0]) for r in rows]
        ax.plot(ticks, ys, linewidth=1.0, label=f"trial {tid}")
    ax.plot(ticks, [math.exp(min(r["log_left"], 700)) for r in rows],
            color="#1f4e79", linewidth=2.0, label="combined (benefit side)")
    ax.axhline(rows[0]["side_threshold"], linestyle=":", color="black",
               label=f"threshold {rows[0]['side_threshold']:g}")
    if meta.rejection_tick is not None:
        ax.axvline(meta.rejection_tick, color="#d55e00", linewidth=1.0,
                   label=f"rejected at tick {meta.rejection_tick}")
    ax.set_yscale("log")
    ax.set_xlabel("tick")
    ax.set_ylabel("e-value")
    ax.set_title(f"evidence over time: endpoint {endpoint_id}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def emit_report(result: IngestResult, outdir: str | Path, formats: tuple[str, ...] = ("csv", "svg")) -> ReportBundle:
    """Write the evidence table and dashboard figure for an ingested ledger."""
    for fmt in formats:
        if fmt not in ("csv", "svg"):
            raise ConfigError(f"unknown report format {fmt!r}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = None
    figures: list[Path] = []
    if "csv" in formats:
        header, rows = evidence_table(result)
        csv_path = write_csv(outdir / "evidence.csv", header, rows)
    if "svg" in formats and result.meta.history:
        figures.append(fig_dashboard(result, outdir / "dashboard.svg"))
        for eid, states in sorted(result.confseq.items()):
            figures.append(
                fig_confseq(states, outdir / f"confseq_{eid}.svg", f"confidence sequence: {eid}")
            )
    return ReportBundle(csv_path=csv_path, figure_paths=tuple(figures))


def _worked_example_rows() -> list[list[str]]:
    bet, null = wx.GAME_BET, wx.GAME_NULL
    rows: list[list[str]] = [["name", "value", "detail"]]

    def add(name: str, value, detail: str) -> None:
        rows.append([name, value if isinstance(value, str) else f"{value:.10g}", detail])

    nt, nc = wx.PFIZER_EVENTS
    log_e = nt * math.log(17 / 21) + nc * math.log(17 / 15)
    add("large_trial_e_value", evalue_str(log_e), f"{nt} treatment / {nc} control events, bet 50% vs null 30% VE")
    add("large_trial_log_e", log_e, "natural log of the betting score")

    nt, nc = wx.CUREVAC_EVENTS
    log_e = nt * math.log(17 / 21) + nc * math.log(17 / 15)
    add("underpowered_trial_e_value", evalue_str(log_e), f"{nt} treatment / {nc} control events")
    add("underpowered_trial_conservative_p", conservative_p(math.exp(log_e)), "1 / e-value, capped at 1")
    est = cs.peto_estimate(cs.counts_to_z(nt, nc))
    add("underpowered_trial_ve_estimate", est.ve, "point estimate from the count summary")
    hr_lo, hr_hi = design.classical_proportion_interval(nt, nc, _z_quantile(wx.CUREVAC_FINAL_LEVEL))
    add("underpowered_trial_classical_ve_interval",
        f"[{(1 - hr_hi) * 100:.1f}%, {(1 - hr_lo) * 100:.1f}%]",
        f"fixed-sample normal approximation at one-sided level {wx.CUREVAC_FINAL_LEVEL}")

    g = design.growth_rate(wx.CUREVAC_DESIGN_TRUTH, bet, null)
    add("growth_rate_truth60", g, "expected per-event growth, truth 60% VE")
    add("implied_target_160", g ** wx.CUREVAC_PLANNED_EVENTS, "growth^160")
    add("remaining_target_from_8", design.remaining_target(8.0, wx.META_ALPHA),
        "factor still needed after a score of 8 at alpha 0.0025")
    add("expected_events_truth60", design.expected_events_to_threshold(
        wx.CUREVAC_DESIGN_TRUTH, bet, null, wx.GAME_ALPHA), "to reach the threshold of 40")
    return rows


def _z_quantile(one_sided_level: float) -> float:
    from scipy.stats import norm

    return float(norm.ppf(1.0 - one_sided_level))


def reproduce_reference_artifacts(outdir: str | Path) -> list[Path]:
    """Regenerate the six reference artifacts from scratch.

    Output: betting-score trajectory figures under the null and the
    powered alternative (with final-score histograms and target lines),
    the expected-events design figure, the shuffled-stream confidence
    sequence figure, and the worked-example table.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []

    null_result = simulate.run(wx.null_game_plan(store=100))
    paths.append(fig_trajectories(
        null_result, outdir / "fig1_null_trajectories.svg",
        "betting scores under the null (30% VE truth)",
    ))

    paths.append(fig_expected_events(wx.GAME_NULL, outdir / "fig2_expected_events.svg",
                                     alpha=wx.GAME_ALPHA))

    rng = np.random.default_rng(wx.REFERENCE_SEED)
    nt, nc = wx.CUREVAC_EVENTS
    labels = np.array(["treatment"] * nt + ["control"] * nc)
    rng.shuffle(labels)
    states = cs.cs_stream(labels.tolist(), alpha=0.1)
    paths.append(fig_confseq(states, outdir / "fig3_confidence_sequence.svg",
                             "90% confidence sequence, shuffled event stream"))

    alt_result = simulate.run(wx.powered_game_plan(replications=1000, store=100))
    target = design.implied_target(design.DesignSpec(
        alt_bet=wx.GAME_BET, null=wx.GAME_NULL, truth=wx.CUREVAC_DESIGN_TRUTH,
        n_planned=wx.CUREVAC_PLANNED_EVENTS, alpha=wx.GAME_ALPHA,
    ))
    paths.append(fig_trajectories(
        alt_result, outdir / "fig4_powered_distribution.svg",
        "betting scores under a 60% VE truth", implied_target=target,
    ))
    paths.append(fig_trajectories(
        alt_result, outdir / "fig5_powered_trajectories.svg",
        "betting scores under a 60% VE truth, expected growth",
        growth_ray=design.log_growth_rate(wx.CUREVAC_DESIGN_TRUTH, wx.GAME_BET, wx.GAME_NULL),
    ))

    table = outdir / "worked_examples.csv"
    with open(table, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(_worked_example_rows())
    paths.append(table)
    return paths
