import math

import numpy as np
import pytest

from anymeta.errors import DomainError, LedgerError
from anymeta.evalue_core import (
    BettingState,
    DegenerateAlternativeWarning,
    EffectScale,
    EventRecord,
    ZSummary,
    accumulate,
    anytime_p_sequence,
    conservative_p,
    evalue_str,
    event_log_lr,
    event_lr,
    event_prob,
    gaussian_lr,
)
from helpers import density_ratio


def _event(group, tick=0, trial="t1", endpoint="primary"):
    return EventRecord(trial_id=trial, endpoint_id=endpoint, tick=tick, group=group)


class TestEffectScale:
    def test_conversions(self):
        e = EffectScale.from_ve(0.5)
        assert e.hr == 0.5
        assert e.mu == math.log(0.5) / 4

    def test_round_trip_is_exact(self):
        for ve in np.linspace(-0.9, 0.99, 97):
            assert EffectScale.from_hr(EffectScale.from_ve(ve).hr).ve == pytest.approx(ve, abs=1e-15)

    def test_mu_divisor_is_configurable(self):
        e = EffectScale.from_hr(0.5, mu_divisor=2.0)
        assert e.mu == math.log(0.5) / 2

    def test_full_efficacy_is_accepted(self):
        e = EffectScale.from_ve(1.0)
        assert e.hr == 0.0
        assert e.mu == float("-inf")

    def test_invalid_inputs(self):
        with pytest.raises(DomainError):
            EffectScale.from_hr(-0.1)
        with pytest.raises(DomainError):
            EffectScale.from_ve(1.5)
        with pytest.raises(DomainError):
            EffectScale.from_ve(float("nan"))


class TestEventProb:
    def test_null_30_percent(self, null_30):
        assert event_prob(null_30) == pytest.approx(70 / 170, abs=1e-15)

    def test_bet_50_percent(self, bet_50):
        assert event_prob(bet_50) == pytest.approx(1 / 3, abs=1e-15)

    def test_no_effect(self):
        assert event_prob(EffectScale.from_ve(0.0)) == 0.5

    def test_allocation_ratio(self, bet_50):
        # twice the follow-up in treatment doubles the odds of a treatment event
        assert event_prob(bet_50, allocation_r=2.0) == pytest.approx(1.0 / 2.0)

    def test_domain_errors(self, bet_50):
        with pytest.raises(DomainError):
            event_prob(EffectScale.from_hr(0.0))
        with pytest.raises(DomainError):
            event_prob(bet_50, allocation_r=0.0)
        with pytest.raises(DomainError):
            event_prob(bet_50, allocation_r=-1.0)


class TestEventLr:
    def test_treatment_event(self, bet_50, null_30):
        assert event_lr("treatment", bet_50, null_30) == pytest.approx(17 / 21, rel=1e-15)

    def test_control_event(self, bet_50, null_30):
        assert event_lr("control", bet_50, null_30) == pytest.approx(17 / 15, rel=1e-15)

    def test_identical_hypotheses(self, bet_50):
        assert event_lr("treatment", bet_50, bet_50) == 1.0

    def test_degenerate_alternative_absorbs(self, null_30):
        full = EffectScale.from_ve(1.0)
        with pytest.warns(DegenerateAlternativeWarning):
            assert event_lr("treatment", full, null_30) == 0.0
        # a control event still pays out
        assert event_lr("control", full, null_30) == pytest.approx((10 / 17) ** -1 * 1.0, rel=1e-12)

    def test_fair_game_identity(self):
        # expected payout under the null is exactly the stake
        rng = np.random.default_rng(7)
        for _ in range(200):
            alt = EffectScale.from_ve(rng.uniform(-0.5, 0.95))
            null = EffectScale.from_ve(rng.uniform(-0.5, 0.95))
            r = rng.uniform(0.25, 4.0)
            p0 = event_prob(null, r)
            total = p0 * event_lr("treatment", alt, null, r) + (1 - p0) * event_lr(
                "control", alt, null, r
            )
            assert abs(total - 1.0) <= 1e-14


class TestAccumulate:
    def test_single_control_event(self, bet_50, null_30):
        state = BettingState(alt=bet_50, null=null_30)
        state = accumulate(state, _event("control"))
        assert state.log_e == pytest.approx(math.log(17 / 15), rel=1e-15)
        assert state.n_control == 1 and state.n_treatment == 0
        assert state.history == ((0, state.log_e),)

    def test_large_trial_score(self, bet_50, null_30):
        state = BettingState(alt=bet_50, null=null_30)
        for tick in range(8):
            state = accumulate(state, _event("treatment", tick))
        for tick in range(8, 170):
            state = accumulate(state, _event("control", tick))
        assert 1.17e8 <= state.e_value <= 1.19e8

    def test_underpowered_trial_score(self, bet_50, null_30):
        state = BettingState(alt=bet_50, null=null_30)
        for tick in range(83):
            state = accumulate(state, _event("treatment", tick))
        for tick in range(83, 228):
            state = accumulate(state, _event("control", tick))
        assert state.e_value == pytest.approx(1.84, abs=0.01)

    def test_fresh_state_is_neutral(self, bet_50, null_30):
        state = BettingState(alt=bet_50, null=null_30)
        assert state.e_value == 1.0
        assert state.n_events == 0

    def test_out_of_order_tick(self, bet_50, null_30):
        state = BettingState(alt=bet_50, null=null_30)
        state = accumulate(state, _event("control", tick=5))
        with pytest.raises(LedgerError):
            accumulate(state, _event("control", tick=4))
        # equal ticks are fine (several events in one day)
        accumulate(state, _event("control", tick=5))

    def test_batch_matches_incremental(self, bet_50, null_30):
        rng = np.random.default_rng(3)
        groups = ["treatment" if u < 0.4 else "control" for u in rng.random(400)]
        state = BettingState(alt=bet_50, null=null_30)
        for tick, g in enumerate(groups):
            state = accumulate(state, _event(g, tick))
        batch = math.fsum(event_log_lr(g, bet_50, null_30) for g in groups)
        assert state.log_e == pytest.approx(batch, rel=1e-12)
        # order does not matter either
        shuffled = math.fsum(event_log_lr(g, bet_50, null_30) for g in sorted(groups))
        assert shuffled == pytest.approx(batch, rel=1e-12)


class TestGaussianLr:
    def test_identical_means(self):
        assert gaussian_lr(ZSummary(z=1.3, n=17), 0.4, 0.4) == 1.0

    def test_closed_form_at_zero(self):
        mu = math.log(0.5) / 4
        assert gaussian_lr(ZSummary(z=0.0, n=1), mu, 0.0) == pytest.approx(
            math.exp(-mu * mu / 2), rel=1e-14
        )

    def test_matches_density_quotient(self):
        mu1 = math.log(0.5) / 4
        value = gaussian_lr(ZSummary(z=-2.0, n=100), mu1, 0.0)
        assert value == pytest.approx(density_ratio(-2.0, 100, mu1, 0.0), rel=1e-12)

    def test_density_quotient_grid(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            z = rng.normal(scale=2)
            n = int(rng.integers(1, 400))
            mu1, mu0 = rng.normal(scale=0.2, size=2)
            assert gaussian_lr(ZSummary(z=z, n=n), mu1, mu0) == pytest.approx(
                density_ratio(z, n, mu1, mu0), rel=1e-12
            )

    def test_unit_expectation_under_null(self):
        # Monte Carlo mean within 3 standard errors of 1
        rng = np.random.default_rng(19)
        mu1 = math.log(0.5) / 4
        mu0 = 0.0
        for n in (1, 10, 100):
            zs = rng.normal(loc=mu0 * math.sqrt(n), scale=1.0, size=100_000)
            values = np.exp(math.sqrt(n) * zs * (mu1 - mu0) - n * (mu1**2 - mu0**2) / 2)
            direct = gaussian_lr(ZSummary(z=float(zs[0]), n=n), mu1, mu0)
            assert direct == pytest.approx(float(values[0]), rel=1e-12)
            se = values.std(ddof=1) / math.sqrt(len(values))
            assert abs(values.mean() - 1.0) <= 3 * se

    def test_invalid_summary(self):
        with pytest.raises(DomainError):
            ZSummary(z=float("nan"), n=10)
        with pytest.raises(DomainError):
            ZSummary(z=0.0, n=0)


class TestPValues:
    def test_reference_value(self):
        assert conservative_p(1.84) == pytest.approx(0.54, abs=0.005)

    def test_neutral_and_capped(self):
        assert conservative_p(1.0) == 1.0
        assert conservative_p(0.5) == 1.0

    def test_exact_inverse_above_one(self):
        for e in (1.0, 1.5, 40.0, 1e12):
            assert conservative_p(e) == 1.0 / e

    def test_domain_error(self):
        with pytest.raises(DomainError):
            conservative_p(0.0)
        with pytest.raises(DomainError):
            conservative_p(-2.0)

    def test_sequence_example(self):
        inst, running = anytime_p_sequence([math.log(2), math.log(1)])
        assert inst == pytest.approx([0.5, 1.0])
        assert running == pytest.approx([0.5, 0.5])

    def test_empty_history(self):
        with pytest.raises(DomainError):
            anytime_p_sequence([])

    def test_running_min_nonincreasing(self):
        rng = np.random.default_rng(23)
        walk = np.cumsum(rng.normal(scale=0.3, size=500))
        _, running = anytime_p_sequence(list(walk))
        assert all(b <= a + 1e-15 for a, b in zip(running, running[1:]))


class TestEvalueStr:
    def test_moderate_value(self):
        assert evalue_str(math.log(1.84)) == "1.84"

    def test_huge_value(self):
        s = evalue_str(8 * math.log(17 / 21) + 162 * math.log(17 / 15))
        assert s == "1.17972e+08"

    def test_absorbed(self):
        assert evalue_str(float("-inf")) == "0"

    def test_tiny_value(self):
        assert evalue_str(-50 * math.log(10)).endswith("e-50")
