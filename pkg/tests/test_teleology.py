import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from aas.kernel import DomainError, SessionSnapshot, breakdown_from_arrays, score_session
from aas.teleology import (
    BAD,
    GOOD,
    HOLD,
    NEUTRAL,
    PROMOTE,
    ROLLBACK,
    DriftLedger,
    GovernancePolicy,
    JusticeScenario,
    drift_classify,
    drift_decomposition,
    governance_decide,
    justice_harness,
    variety_order_perfection,
)

from helpers import snapshots

PHI_0 = 6.6582114827517947


class TestPerfection:
    def test_uniform_variety(self):
        bd = score_session(SessionSnapshot.from_lists([0.3] * 4))
        assert variety_order_perfection(bd, bd.mass).variety == pytest.approx(1.0)

    def test_single_active(self):
        bd = score_session(SessionSnapshot.from_lists([0.3, 1.0]))
        rep = variety_order_perfection(bd, bd.mass)
        assert rep.variety == 0.0
        assert rep.perfection == 0.0

    def test_single_channel_order(self):
        bd = score_session(SessionSnapshot.from_lists([0.5]))
        rep = variety_order_perfection(bd, 1.0, 0.5)
        assert rep.order == pytest.approx(0.85194430316099238, rel=1e-13)
        assert rep.aas_max == pytest.approx(PHI_0)
        assert rep.perfection == 0.0

    def test_gamma_range(self):
        bd = score_session(SessionSnapshot.from_lists([0.5]))
        with pytest.raises(DomainError):
            variety_order_perfection(bd, 1.0, 1.0)
        with pytest.raises(DomainError):
            variety_order_perfection(bd, 0.0)

    @given(snapshots(), st.floats(0.01, 0.99))
    def test_range(self, snap, gamma):
        bd = score_session(snap)
        if bd.mass > 0:
            rep = variety_order_perfection(bd, bd.mass, gamma)
            assert 0.0 <= rep.perfection <= 1.0
            assert rep.perfection == rep.variety**gamma * rep.order ** (1 - gamma)
            if rep.perfection == 1.0:
                assert rep.variety == 1.0 and rep.order == 1.0

    @given(st.lists(st.floats(0.01, 1), min_size=2, max_size=6), st.floats(0.1, 10), st.data())
    def test_order_scale_invariant(self, alphas, c, data):
        xs = data.draw(st.lists(st.floats(0, 1), min_size=len(alphas), max_size=len(alphas)))
        a = breakdown_from_arrays(alphas, xs, 0.01)
        b = breakdown_from_arrays([c * v for v in alphas], xs, 0.01)
        oa = variety_order_perfection(a, math.fsum(alphas)).order
        ob = variety_order_perfection(b, math.fsum(c * v for v in alphas)).order
        assert oa == pytest.approx(ob, abs=1e-12)

    def test_uniform_beats_spread(self):
        rng = random.Random(4)
        for _ in range(500):
            mu = rng.uniform(0.1, 0.9)
            d = rng.uniform(0, min(mu, 1 - mu))
            alphas = [0.5, 0.5]
            flat = breakdown_from_arrays(alphas, [mu, mu], 0.01)
            spread = breakdown_from_arrays(alphas, [mu - d, mu + d], 0.01)
            assert variety_order_perfection(flat, 1.0).order >= variety_order_perfection(spread, 1.0).order - 1e-12


class TestDrift:
    def test_good_window(self):
        scores = [1.0]
        for d in (-0.05, -0.02, 0.01, -0.04):
            scores.append(scores[-1] + d)
        ledger = drift_classify(scores, 4, 0.05)
        assert ledger.classes == (GOOD,)
        assert ledger.window_sums[0] == pytest.approx(-0.10)

    def test_flat(self):
        assert set(drift_classify([2.0] * 6, 2, 0.05).classes) == {NEUTRAL}

    def test_alternating_cancels(self):
        scores = [1.0, 1.1, 1.0, 1.1, 1.0, 1.1]
        ledger = drift_classify(scores, 2, 0.05)
        assert set(ledger.classes) == {NEUTRAL}

    def test_too_short(self):
        with pytest.raises(DomainError):
            drift_classify([1.0, 2.0], 2, 0.05)

    def test_stride(self):
        ledger = drift_classify(list(range(10)), 2, 0.5, stride=3)
        assert ledger.window_starts == (0, 3, 6)

    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=30), st.integers(1, 5), st.floats(0.001, 5))
    def test_exhaustive_exclusive(self, scores, window, eta):
        if len(scores) < window + 1:
            return
        ledger = drift_classify(scores, window, eta)
        for s, c in zip(ledger.window_sums, ledger.classes):
            assert c == (GOOD if s <= -eta else BAD if s >= eta else NEUTRAL)

    @given(st.lists(st.floats(0, 7), min_size=1, max_size=40))
    def test_decomposition(self, scores):
        rises, falls, rebuilt = drift_decomposition(scores)
        assert rises >= 0 and falls >= 0
        assert rebuilt == pytest.approx(scores[-1], abs=1e-9)


def _ledger(classes):
    n = len(classes)
    return DriftLedger((), 1, 0.1, 1, tuple(range(n)), (0.0,) * n, tuple(classes))


class TestGovernance:
    def test_promote(self):
        v = governance_decide(_ledger([GOOD, GOOD]), GovernancePolicy(2, 1))
        assert v.verdict == PROMOTE
        assert v.trigger_windows == (0, 1)

    def test_rollback(self):
        assert governance_decide(_ledger([NEUTRAL, BAD])).verdict == ROLLBACK

    def test_hold(self):
        v = governance_decide(_ledger([GOOD, BAD, GOOD, BAD]), GovernancePolicy(2, 2))
        assert v.verdict == HOLD
        assert v.trigger_windows == ()

    def test_rollback_precedence(self):
        v = governance_decide(_ledger([GOOD, GOOD, GOOD, BAD]), GovernancePolicy(3, 1))
        assert v.verdict == ROLLBACK

    def test_defaults(self):
        p = GovernancePolicy()
        assert (p.consecutive_G_for_promote, p.consecutive_K_for_rollback) == (3, 1)


class TestJustice:
    def test_benevolent(self):
        res = justice_harness(JusticeScenario("benevolent"), 200)
        assert res.report["monotone"]
        x_T = 1 - 0.5 * 0.9**200
        assert x_T < 1
        assert res.scores[-1] == pytest.approx(5.0387760618385271e-10, rel=1e-5)
        assert res.scores[-1] < 1e-8
        assert res.perfection[-1] > 1 - 1e-8

    def test_degradation(self):
        res = justice_harness(JusticeScenario("degradation"), 200)
        assert res.report["monotone"]
        assert res.report["boundary_gap"] == pytest.approx(5.089163731807057e-8, rel=1e-5)
        assert abs(res.scores[-1] - PHI_0) < 1e-6

    def test_noop(self):
        res = justice_harness(JusticeScenario("noop"), 20)
        assert len(set(res.perfection)) == 1

    def test_unknown(self):
        with pytest.raises(DomainError):
            JusticeScenario("chaotic")
