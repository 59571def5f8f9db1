import math

import numpy as np
import pytest

from anymeta.confseq import (
    DEFAULT_DELTA_DESIGN,
    counts_to_z,
    cs_half_width,
    cs_interval,
    cs_stream,
    peto_estimate,
    stratified_summary,
)
from anymeta.errors import ConfigError, DomainError
from anymeta.evalue_core import ZSummary
from helpers import grid_confidence_set, mc_se


class TestPetoEstimate:
    def test_no_imbalance(self):
        assert peto_estimate(ZSummary(z=0.0, n=12)).hr == pytest.approx(1.0)

    def test_closed_form(self):
        # exp(2 * 1 / sqrt(4)) = e
        assert peto_estimate(ZSummary(z=1.0, n=4)).hr == pytest.approx(math.e, rel=1e-14)

    def test_underpowered_trial_estimate(self):
        est = peto_estimate(counts_to_z(83, 145))
        assert est.ve * 100 == pytest.approx(43.0, abs=0.5)

    def test_count_encoding_recovers_ratio(self):
        # the z encoding is pinned so the estimate is the corrected count ratio
        est = peto_estimate(counts_to_z(30, 60))
        assert est.hr == pytest.approx(30.5 / 60.5, rel=1e-12)

    def test_zero_counts_stay_finite(self):
        assert math.isfinite(counts_to_z(0, 1).z)
        assert math.isfinite(counts_to_z(5, 0).z)
        with pytest.raises(DomainError):
            counts_to_z(0, 0)


class TestInterval:
    def test_half_width_limit(self):
        # in the long run the width approaches the design offset itself
        assert cs_half_width(10**9, 0.1, DEFAULT_DELTA_DESIGN) == pytest.approx(
            DEFAULT_DELTA_DESIGN / 2, rel=1e-4
        )

    def test_config_errors(self):
        with pytest.raises(ConfigError):
            cs_half_width(10, 0.1, 0.0)
        with pytest.raises(ConfigError):
            cs_half_width(10, 1.2, 0.1)

    def test_single_event_interval_contains_estimate(self):
        for counts in ((1, 0), (0, 1)):
            summary = counts_to_z(*counts)
            lo, hi = cs_interval(summary, alpha=0.1)
            assert lo < peto_estimate(summary).hr < hi

    def test_grid_oracle_agreement(self):
        # closed form versus brute-force inversion of the e-value tests on a
        # 10^4-point log-spaced hazard-ratio grid; at small n the true
        # endpoints fall outside the grid, so (delta, alpha) are chosen per n
        # to keep them interior
        grid = np.geomspace(0.01, 100.0, 10_000)
        log_step = math.log(grid[1] / grid[0])
        divisor = 4.0
        for n, z, alpha, delta in (
            (5, 0.0, 0.2, 0.96),
            (50, -2.4, 0.1, 0.3),
            (500, 3.1, 0.1, DEFAULT_DELTA_DESIGN),
        ):
            kept = grid_confidence_set(z, n, alpha, delta, divisor, grid)
            lo, hi = cs_interval(ZSummary(z=z, n=n), alpha, delta, divisor)
            assert grid[0] < lo < hi < grid[-1]
            assert abs(math.log(kept[0]) - math.log(lo)) <= log_step
            assert abs(math.log(kept[-1]) - math.log(hi)) <= log_step

    def test_grid_oracle_membership_at_default_design(self):
        # with the default offset the small-n intervals swallow the whole
        # grid; membership must still agree point by point
        grid = np.geomspace(0.01, 100.0, 10_000)
        log_step = math.log(grid[1] / grid[0])
        alpha, delta, divisor = 0.1, DEFAULT_DELTA_DESIGN, 4.0
        for n, z in ((5, -0.8), (50, -2.4), (500, 3.1)):
            kept = set(grid_confidence_set(z, n, alpha, delta, divisor, grid))
            lo, hi = cs_interval(ZSummary(z=z, n=n), alpha, delta, divisor)
            for theta in grid:
                near_edge = (
                    abs(math.log(theta) - math.log(lo)) <= log_step
                    or abs(math.log(theta) - math.log(hi)) <= log_step
                )
                if not near_edge:
                    assert (theta in kept) == (lo < theta < hi)

    def test_duality_with_e_value_tests(self):
        # theta0 sits outside the interval iff one side's e-value reached 2/alpha
        from anymeta.evalue_core import gaussian_lr

        alpha, delta = 0.1, DEFAULT_DELTA_DESIGN
        summary = ZSummary(z=-2.0, n=60)
        lo, hi = cs_interval(summary, alpha, delta)
        for theta0 in np.geomspace(0.05, 20, 200):
            mu0 = math.log(theta0) / 4
            excluded = max(
                gaussian_lr(summary, mu0 - delta, mu0),
                gaussian_lr(summary, mu0 + delta, mu0),
            ) >= 2 / alpha
            assert excluded == (theta0 < lo or theta0 > hi) or math.isclose(
                theta0, lo, rel_tol=1e-9
            ) or math.isclose(theta0, hi, rel_tol=1e-9)


class TestStream:
    def test_empty_stream_full_range(self):
        states = cs_stream([])
        assert len(states) == 1
        assert states[0].interval == (0.0, float("inf"))
        assert states[0].estimate is None

    def test_all_control_upper_bound_decreases(self):
        states = cs_stream(["control"] * 10)
        uppers = [s.intersection[1] for s in states[1:]]
        assert all(b < a for a, b in zip(uppers, uppers[1:]))

    def test_intersection_monotone_and_contained(self):
        rng = np.random.default_rng(2)
        stream = ["treatment" if u < 0.4 else "control" for u in rng.random(120)]
        states = cs_stream(stream)
        for prev, cur in zip(states, states[1:]):
            assert cur.intersection[0] >= prev.intersection[0] - 1e-15
            assert cur.intersection[1] <= prev.intersection[1] + 1e-15
            assert cur.intersection[0] >= cur.interval[0] - 1e-15
            assert cur.intersection[1] <= cur.interval[1] + 1e-15

    def test_underpowered_trial_stream(self):
        # shuffled full stream: the final interval excludes "no effect" but
        # cannot rule out a 30% effect
        rng = np.random.default_rng(42)
        labels = np.array(["treatment"] * 83 + ["control"] * 145)
        rng.shuffle(labels)
        states = cs_stream(labels.tolist(), alpha=0.1)
        lo, hi = states[-1].interval
        assert hi < 1.0
        assert lo < 0.7 < hi
        ilo, ihi = states[-1].intersection
        assert ihi < 1.0
        assert 0.7 < ihi

    def test_zsummary_stream(self):
        states = cs_stream([ZSummary(z=-1.0, n=10), ZSummary(z=-1.5, n=20)])
        assert [s.n for s in states] == [0, 10, 20]

    def test_bad_label(self):
        with pytest.raises(DomainError):
            cs_stream(["placebo"])


class TestCoverage:
    def test_anytime_coverage_gaussian_model(self):
        # For data generated by the drift model the inverted tests are exact
        # e-processes: the running intersection excludes the truth in at most
        # an alpha fraction of streams, uniformly over time.
        alpha = 0.1
        streams, horizon = 2000, 300
        rng = np.random.default_rng(77)
        ns = np.arange(1, horizon + 1)
        b = DEFAULT_DELTA_DESIGN / 2 + np.log(2 / alpha) / (ns * DEFAULT_DELTA_DESIGN)
        for theta in (0.5, 0.7, 1.0):
            mu = math.log(theta) / 4
            increments = rng.normal(loc=mu, size=(streams, horizon))
            # z_n = S_n / sqrt(n), so the drift estimate z_n/sqrt(n) is S_n/n
            z_over_sqrt_n = increments.cumsum(axis=1) / ns
            excluded = (np.abs(z_over_sqrt_n - mu) >= b).any(axis=1)
            frac = float(excluded.mean())
            assert frac <= alpha + 3 * mc_se(max(frac, alpha), streams)

    def test_gaussian_stream_matches_cs_interval(self):
        # the vectorized exclusion rule above is the same inversion cs_stream uses
        rng = np.random.default_rng(9)
        zs = []
        total = 0.0
        for n in range(1, 31):
            total += rng.normal()
            zs.append(ZSummary(z=total / math.sqrt(n), n=n))
        states = cs_stream(zs, alpha=0.1)
        for summary, state in zip(zs, states[1:]):
            assert state.interval == cs_interval(summary, 0.1)

    def test_bernoulli_bridge_coverage_with_divisor_two(self):
        # With the drift divisor set to 2 the count summary's drift matches the
        # model drift, so event streams inherit (conservative) coverage.
        alpha = 0.1
        streams, horizon = 500, 300
        rng = np.random.default_rng(31)
        ns = np.arange(1, horizon + 1)
        b = DEFAULT_DELTA_DESIGN / 2 + np.log(2 / alpha) / (ns * DEFAULT_DELTA_DESIGN)
        for theta in (0.5, 1.0):
            p = theta / (1 + theta)
            mu0 = math.log(theta) / 2.0
            treat = rng.random((streams, horizon)) < p
            nt = treat.cumsum(axis=1)
            nc = ns - nt
            z = np.sqrt(ns) / 2 * np.log((nt + 0.5) / (nc + 0.5))
            excluded = (np.abs(z / np.sqrt(ns) - mu0) >= b).any(axis=1)
            frac = float(excluded.mean())
            assert frac <= alpha + 3 * mc_se(max(frac, alpha), streams)
        # spot-check the vectorized encoding against counts_to_z
        assert z[0, -1] == pytest.approx(counts_to_z(int(nt[0, -1]), int(nc[0, -1])).z, rel=1e-12)


class TestStratified:
    def test_single_summary_identity(self):
        s = ZSummary(z=-1.2, n=30)
        combined = stratified_summary([s])
        assert combined.z == pytest.approx(s.z) and combined.n == s.n

    def test_two_trials(self):
        a, b = ZSummary(z=-1.0, n=16), ZSummary(z=-2.0, n=9)
        combined = stratified_summary([a, b])
        assert combined.n == 25
        assert combined.z == pytest.approx((-1.0 * 4 + -2.0 * 3) / 5, rel=1e-12)

    def test_empty(self):
        with pytest.raises(DomainError):
            stratified_summary([])
