"""Command-line surface: ledger workflow, simulations, design diagnostics.

Exit codes: 0 success, 1 usage or domain error, 2 ledger integrity error,
3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import confseq as csq
from . import design, ledger, report, simulate, worked_examples as wx
from .errors import ConfigError, DomainError, LedgerError
from .evalue_core import EffectScale, evalue_str
from .meta_combine import DEFAULT_ENDPOINT

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INTEGRITY = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def effect_arg(text: str) -> EffectScale:
    """Parse an effect: plain float is vaccine efficacy, 'hr=0.7' a hazard ratio."""
    try:
        if text.startswith("hr="):
            return EffectScale.from_hr(float(text[3:]))
        return EffectScale.from_ve(float(text))
    except (ValueError, DomainError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _fmtnum(value: float) -> str:
    return f"{value:.6g}"


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="anymeta", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a new ledger with a config record")
    p.add_argument("ledger", type=Path)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--cs-alpha", type=float, default=0.1)
    p.add_argument("--delta-design", type=float, default=csq.DEFAULT_DELTA_DESIGN)
    p.add_argument("--mu-divisor", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("add-trial", help="register a trial and its betting configuration")
    p.add_argument("ledger", type=Path)
    p.add_argument("--trial-id", required=True)
    p.add_argument("--alt", type=effect_arg, required=True, help="benefit alternative (VE or hr=..)")
    p.add_argument("--alt-harm", type=effect_arg, default=None)
    p.add_argument("--null", type=effect_arg, default=None, help="default: no effect (hr=1)")
    p.add_argument("--r", type=float, default=1.0, help="follow-up time ratio")
    p.add_argument("--tick", type=int, default=0)

    p = sub.add_parser("include", help="record an inclusion (or exclusion) decision")
    p.add_argument("ledger", type=Path)
    p.add_argument("--trial-id", required=True)
    p.add_argument("--tick", type=int, default=0)
    p.add_argument("--exclude", action="store_true")

    p = sub.add_parser("ingest", help="validate and replay a ledger, print state and hash")
    p.add_argument("ledger", type=Path)
    p.add_argument("--append", type=Path, default=None,
                   help="CSV of events (tick,trial_id,endpoint_id,group) to checksum and append first")

    p = sub.add_parser("report", help="emit the evidence table and figures")
    p.add_argument("ledger", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--formats", default="csv,svg")

    p = sub.add_parser("simulate", help="seeded Monte Carlo of betting-score trajectories")
    p.add_argument("--truth", type=effect_arg, required=True)
    p.add_argument("--bet", type=effect_arg, required=True)
    p.add_argument("--null", type=effect_arg, required=True)
    p.add_argument("--n", type=int, required=True, help="events per replication")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.025)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=wx.REFERENCE_SEED)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("design", help="growth rate, implied target and expected events")
    p.add_argument("--truth", type=effect_arg, default=None)
    p.add_argument("--bet", type=effect_arg, required=True)
    p.add_argument("--null", type=effect_arg, required=True)
    p.add_argument("--n", type=int, default=None, help="planned events")
    p.add_argument("--alpha", type=float, default=0.025)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--current-e", type=float, default=None,
                   help="running score; prints the remaining multiplication target")
    p.add_argument("--out", type=Path, default=None,
                   help="also write the expected-events grid (CSV + SVG)")

    p = sub.add_parser("confseq", help="confidence sequence from counts or an event CSV")
    p.add_argument("--counts", default=None, help="treatment,control totals, e.g. 83,145")
    p.add_argument("--events-csv", type=Path, default=None,
                   help="CSV with a 'group' column of treatment/control labels")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--delta-design", type=float, default=csq.DEFAULT_DELTA_DESIGN)
    p.add_argument("--mu-divisor", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=wx.REFERENCE_SEED, help="shuffle seed for --counts")
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("reproduce-paper",
                       help="regenerate the reference figures and worked-example table")
    p.add_argument("--out", type=Path, required=True)

    return parser


def cmd_init(args) -> int:
    if args.ledger.exists():
        raise LedgerError(f"{args.ledger} already exists")
    args.ledger.parent.mkdir(parents=True, exist_ok=True)
    ledger.append_records(args.ledger, [ledger.make_record(
        "config",
        alpha=args.alpha,
        cs_alpha=args.cs_alpha,
        delta_design=args.delta_design,
        mu_divisor=args.mu_divisor,
        seed=args.seed,
    )])
    print(f"initialized ledger {args.ledger}")
    return EXIT_OK


def cmd_add_trial(args) -> int:
    record = {"trial_id": args.trial_id, "tick": args.tick,
              "alt_ve": args.alt.ve, "allocation_r": args.r}
    if args.alt_harm is not None:
        record["alt_ve_harm"] = args.alt_harm.ve
    if args.null is not None:
        record["null_ve"] = args.null.ve
    ledger.append_records(args.ledger, [ledger.make_record("trial_registered", **record)])
    print(f"registered trial {args.trial_id!r}")
    return EXIT_OK


def cmd_include(args) -> int:
    kind = "trial_excluded" if args.exclude else "trial_included"
    ledger.append_records(args.ledger, [ledger.make_record(
        kind, trial_id=args.trial_id, tick=args.tick)])
    print(f"recorded {kind} for {args.trial_id!r}")
    return EXIT_OK


def _append_events_csv(ledger_path: Path, events_path: Path) -> int:
    records = []
    with open(events_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            records.append(ledger.make_record(
                "event",
                tick=int(row["tick"]),
                trial_id=row["trial_id"],
                endpoint_id=row.get("endpoint_id") or DEFAULT_ENDPOINT,
                group=row["group"],
            ))
    ledger.append_records(ledger_path, records)
    return len(records)


def cmd_ingest(args) -> int:
    if args.append is not None:
        n = _append_events_csv(args.ledger, args.append)
        print(f"appended {n} event records")
    result = ledger.ingest(args.ledger)
    meta = result.meta
    print(f"records: {result.n_records}  ticks monitored through: {meta.tick}")
    for endpoint_id in meta.endpoint_ids:
        log_l = meta.log_product(endpoint_id, "left")
        log_r = meta.log_product(endpoint_id, "right")
        print(
            f"endpoint {endpoint_id}: e_left={evalue_str(log_l)} (log {log_l:.6f})  "
            f"e_right={evalue_str(log_r)} (log {log_r:.6f})  "
            f"threshold {_fmtnum(1.0 / meta.side_share(endpoint_id))}"
        )
    print(f"decision: {meta.decision}"
          + (f" (latched at tick {meta.rejection_tick})" if meta.rejection_tick is not None else ""))
    print(f"state hash: {ledger.state_hash(result)}")
    return EXIT_OK


def cmd_report(args) -> int:
    formats = tuple(f.strip() for f in args.formats.split(",") if f.strip())
    unknown = [f for f in formats if f not in ("csv", "svg")]
    if unknown:
        raise DomainError(f"unknown report format(s) {unknown}; choose from csv, svg")
    result = ledger.ingest(args.ledger)
    bundle = report.emit_report(result, args.out, formats)
    for path in filter(None, [bundle.csv_path, *bundle.figure_paths]):
        print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    plan = simulate.SimPlan(
        truth=args.truth, alt_bet=args.bet, null=args.null,
        horizon_n=args.n, replications=args.reps, alpha=args.alpha,
        allocation_r=args.r, seed=args.seed,
        store_trajectories=100 if args.out else 0,
    )
    result = simulate.run(plan)
    print(f"generator: {simulate.GENERATOR_NAME}  seed: {plan.seed}")
    print(f"ever crossed {_fmtnum(plan.threshold)}: {_fmtnum(result.frac_cross_ever)}")
    print(f"crossed at horizon n={plan.horizon_n}: {_fmtnum(result.frac_cross_at_horizon)}")
    print(f"mean final log e-value: {result.mean_final_log_e:.6f}")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        meta_path = args.out / "simulation.csv"
        with open(meta_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            for key, value in plan.describe().items():
                writer.writerow([f"# {key}", value])
            writer.writerow(["replication", "final_log_e", "max_log_e", "crossing_tick"])
            for i in range(plan.replications):
                writer.writerow([i, repr(float(result.final_log_e[i])),
                                 repr(float(result.max_log_e[i])), int(result.crossing_tick[i])])
        report.fig_trajectories(result, args.out / "trajectories.svg",
                                "simulated betting scores")
        print(f"wrote {meta_path} and trajectories.svg")
    return EXIT_OK


def cmd_design(args) -> int:
    if args.current_e is not None:
        target = design.remaining_target(args.current_e, args.alpha)
        print(f"remaining multiplication target: {_fmtnum(target)} (log {math.log(target):.6f})")
    truth = args.truth if args.truth is not None else args.bet
    g = design.growth_rate(truth, args.bet, args.null, args.r)
    print(f"growth rate per event: {g:.6f} (log {math.log(g):.7f})")
    expected = design.expected_events_to_threshold(truth, args.bet, args.null, args.alpha, args.r)
    if math.isinf(expected):
        print("expected events to threshold: never (non-favorable game)")
    else:
        print(f"expected events to reach 1/alpha={_fmtnum(1 / args.alpha)}: "
              f"{expected:.1f} (plan for {math.ceil(expected)})")
    if args.n is not None:
        spec = design.DesignSpec(alt_bet=args.bet, null=args.null, truth=args.truth,
                                 n_planned=args.n, alpha=args.alpha, allocation_r=args.r)
        target = design.implied_target(spec)
        print(f"implied target at n={args.n}: {_fmtnum(target)} "
              f"(log {args.n * math.log(g):.6f}, rounded {round(target)})")
        gauss = design.gaussian_implied_target(spec, replications=20_000)
        print(f"summary-statistic form: analytic {_fmtnum(gauss['analytic'])}, "
              f"monte carlo {_fmtnum(gauss['monte_carlo'])} (drift scale, see README)")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        rows = design.events_to_threshold_grid(
            [round(0.35 + 0.05 * i, 2) for i in range(10)], [0.4, 0.5, 0.6],
            args.null, args.alpha, args.r)
        grid_path = args.out / "expected_events.csv"
        with open(grid_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["truth_ve", "bet_ve", "expected_events"])
            for row in rows:
                writer.writerow([row["truth_ve"], row["bet_ve"], _fmtnum(row["expected_events"])])
        report.fig_expected_events(args.null, args.out / "expected_events.svg", alpha=args.alpha)
        print(f"wrote {grid_path} and expected_events.svg")
    return EXIT_OK


def cmd_confseq(args) -> int:
    if (args.counts is None) == (args.events_csv is None):
        raise ConfigError("provide exactly one of --counts or --events-csv")
    if args.counts is not None:
        try:
            nt, nc = (int(part) for part in args.counts.split(","))
        except ValueError as exc:
            raise ConfigError(f"--counts expects 'treatment,control', got {args.counts!r}") from exc
        labels = np.array(["treatment"] * nt + ["control"] * nc)
        np.random.default_rng(args.seed).shuffle(labels)
        stream = labels.tolist()
    else:
        with open(args.events_csv, newline="", encoding="utf-8") as fh:
            stream = [row["group"] for row in csv.DictReader(fh)]
    states = csq.cs_stream(stream, args.alpha, args.delta_design, args.mu_divisor)
    last = states[-1]
    if last.estimate is not None:
        print(f"events: {last.n}  estimate hr={last.estimate.hr:.6f} (VE {last.estimate.ve:.4f})")
    print(f"interval hr: [{_fmtnum(last.interval[0])}, {_fmtnum(last.interval[1])}]")
    print(f"running intersection hr: [{_fmtnum(last.intersection[0])}, {_fmtnum(last.intersection[1])}]")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        csv_path = args.out / "confseq.csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tick", "n", "estimate_hr", "lower", "upper", "inter_lower", "inter_upper"])
            for s in states:
                writer.writerow([
                    s.tick, s.n,
                    repr(s.estimate.hr) if s.estimate else "",
                    repr(s.interval[0]), repr(s.interval[1]),
                    repr(s.intersection[0]), repr(s.intersection[1]),
                ])
        report.fig_confseq(states, args.out / "confseq.svg", "confidence sequence")
        print(f"wrote {csv_path} and confseq.svg")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    paths = report.reproduce_reference_artifacts(args.out)
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "init": cmd_init,
    "add-trial": cmd_add_trial,
    "include": cmd_include,
    "ingest": cmd_ingest,
    "report": cmd_report,
    "simulate": cmd_simulate,
    "design": cmd_design,
    "confseq": cmd_confseq,
    "reproduce-paper": cmd_reproduce,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except LedgerError as exc:
        print(f"ledger error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
