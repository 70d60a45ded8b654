import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from aas.coherence import (
    CausalNetwork,
    ContradictionConfig,
    ViewPairing,
    alignment_penalty,
    harmony_penalty,
    pc_penalty,
    psr_penalty,
)
from aas.kernel import DomainError, KernelConfig, SessionSnapshot, phi, score_session

from helpers import snapshots

PHI_0 = 6.6582114827517947
PHI_HALF = 0.98578614078029915


def snap2(a, b, w=(0.5, 0.5)):
    return SessionSnapshot.from_lists([a, b], weights=list(w))


class TestContradiction:
    def test_margin_zeroes_pair(self):
        cfg = ContradictionConfig([(0, 1)], [1.0], 0.1)
        assert pc_penalty(snap2(0.05, 0.9), cfg).penalty == 0.0

    def test_both_certain(self):
        cfg = ContradictionConfig([(0, 1)], [1.0], 0.0)
        assert pc_penalty(snap2(1.0, 1.0), cfg).penalty == pytest.approx(PHI_0, rel=1e-14)

    def test_symmetric_split_dominates(self):
        cfg = ContradictionConfig([(0, 1)], [1.0], 0.0)
        sym = pc_penalty(snap2(0.5, 0.5), cfg).penalty
        asym = pc_penalty(snap2(0.9, 0.1), cfg).penalty
        assert sym == pytest.approx(PHI_HALF, rel=1e-14)
        assert asym == pytest.approx(0.15041684255309847, rel=1e-13)
        assert sym >= asym

    def test_adjusted_adds_to_base(self):
        cfg = ContradictionConfig([(0, 1)], [0.7], 0.2)
        s = snap2(0.6, 0.8)
        r = pc_penalty(s, cfg)
        assert r.adjusted_total == score_session(s).total + r.penalty

    def test_validation(self):
        with pytest.raises(DomainError):
            ContradictionConfig([(0, 0)], [1.0])
        with pytest.raises(DomainError):
            ContradictionConfig([(0, 1)], [-1.0])
        with pytest.raises(DomainError):
            pc_penalty(snap2(0.1, 0.2), ContradictionConfig([(0, 5)], [1.0]))

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 2))
    def test_zero_iff_margin(self, a, b, zeta, gamma):
        cfg = ContradictionConfig([(0, 1)], [gamma], zeta)
        pen = pc_penalty(snap2(a, b), cfg).penalty
        if min(a, b) <= zeta:
            assert pen == 0.0
        elif min(a, b) - zeta > 1e-15:
            # smaller excesses round 1 - m to exactly 1 in binary64
            assert pen > 0.0
        assert 0.0 <= pen <= gamma * PHI_0 + 1e-12

    @given(st.floats(0, 0.45), st.floats(0, 1), st.floats(0, 1))
    def test_symmetry_dominance(self, zeta, u, v):
        s = 2 * zeta + u * (2 - 2 * zeta)
        if s <= 2 * zeta or s > 2:
            return
        cfg = ContradictionConfig([(0, 1)], [1.0], zeta)
        half = s / 2
        lo = max(0.0, s - 1)
        a = lo + v * (half - lo)
        sym = pc_penalty(snap2(half, half), cfg).penalty
        asym = pc_penalty(snap2(a, min(1.0, s - a)), cfg).penalty
        assert sym >= asym - 1e-12


class TestPSR:
    def _net(self, n, a0=0.0, off=0.0, delta=0.01):
        a = [[0.0 if i == j else off for j in range(n)] for i in range(n)]
        return CausalNetwork(a, [a0] * n, delta)

    def test_zero_when_justified(self):
        s = SessionSnapshot.from_lists([0.3, 0.4])
        r = psr_penalty(s, [0.9, 0.9], self._net(2, a0=1.0))
        assert r.penalty == 0.0
        assert r.sufficiency == (1.0, 1.0)

    def test_unsupported_claim(self):
        s = SessionSnapshot.from_lists([0.5])
        r = psr_penalty(s, [0.0], self._net(1))
        assert r.sufficiency[0] == pytest.approx(0.019607843137254902, rel=1e-15)
        assert r.penalty == pytest.approx(5.0922320853982114, rel=1e-13)

    def test_delta_limit(self):
        s = SessionSnapshot.from_lists([0.5])
        pens = [psr_penalty(s, [0.0], self._net(1, delta=d)).penalty for d in (1e-2, 1e-4, 1e-6)]
        assert pens[0] < pens[1] < pens[2] < PHI_0
        assert PHI_0 - pens[2] < 1e-3

    def test_inflation_strictly_increases(self):
        net = self._net(2, a0=0.5, off=0.2)
        base = SessionSnapshot.from_lists([0.6, 0.3])
        inflated = SessionSnapshot.from_lists([0.7, 0.3])
        prev = [0.2, 0.2]
        assert psr_penalty(inflated, prev, net).penalty > psr_penalty(base, prev, net).penalty

    def test_budget(self):
        with pytest.raises(DomainError):
            CausalNetwork([[0.0, 0.6], [0.0, 0.0]], [0.5, 0.0])

    def test_more_reasons_lower_penalty(self):
        s = SessionSnapshot.from_lists([0.6, 0.8])
        weak = psr_penalty(s, [0.1, 0.1], self._net(2, a0=0.3, off=0.1)).penalty
        strong = psr_penalty(s, [0.1, 0.1], self._net(2, a0=0.3, off=0.6)).penalty
        assert strong <= weak

    @given(snapshots(), st.data())
    def test_bounded_by_mass(self, snap, data):
        m = snap.arity
        prev = data.draw(st.lists(st.floats(0, 1), min_size=m, max_size=m))
        r = psr_penalty(snap, prev, self._net(m, a0=0.5, off=0.5 / max(1, m - 1)))
        assert 0.0 <= r.penalty <= sum(snap.alphas) * PHI_0 + 1e-12


class TestHarmony:
    pairing = ViewPairing((0,), (1,), {1: 0})

    def test_closure(self):
        s = snap2(0.4, 0.4)
        assert harmony_penalty(s, s, self.pairing).harm == 0.0

    def test_mismatch(self):
        s = snap2(0.6, 0.4)
        r = harmony_penalty(s, s, self.pairing)
        assert r.harm == pytest.approx(0.15918073993358501, rel=1e-13)
        assert r.total_with_harmony == pytest.approx(score_session(s).total + r.harm)

    def test_linearization(self):
        exact = phi(0.99)
        assert exact == pytest.approx(0.014355292977070041, rel=1e-13)
        linear = 0.01 / (1.01 * 0.6931471805599453)
        assert abs(linear - exact) / exact < 0.05

    def test_pairing_must_target_soul(self):
        with pytest.raises(DomainError):
            ViewPairing((0,), (1,), {1: 1})

    @given(snapshots(min_channels=2, max_channels=2))
    def test_bounds(self, s):
        r = harmony_penalty(s, s, self.pairing)
        beta = min(s.alphas)
        assert 0.0 <= r.harm <= beta * PHI_0 + 1e-12


class TestAlignment:
    def test_closure(self):
        a, b = snap2(0.2, 0.9), snap2(0.4, 0.7)
        r = alignment_penalty(a, b, [1.0, 0.5])
        assert r.harm == 0.0
        assert r.alignments == (1.0, 1.0)

    def test_opposed(self):
        a = SessionSnapshot.from_lists([0.5])
        b = SessionSnapshot.from_lists([0.4])
        assert alignment_penalty(a, b, [1.0]).harm == pytest.approx(PHI_0, rel=1e-14)

    def test_neutral_effort(self):
        a = SessionSnapshot.from_lists([0.5])
        r = alignment_penalty(a, a, [1.0])
        assert r.alignments == (0.5,)
        assert r.harm == pytest.approx(PHI_HALF, rel=1e-14)

    def test_dead_band(self):
        a = SessionSnapshot.from_lists([0.5])
        b = SessionSnapshot.from_lists([0.5000001])
        assert alignment_penalty(a, b, [0.5000001]).alignments == (1.0,)
        assert alignment_penalty(a, b, [0.50000005], dead_band=1e-6).alignments == (1.0,)

    def test_targets_range(self):
        a = SessionSnapshot.from_lists([0.5])
        with pytest.raises(DomainError):
            alignment_penalty(a, a, [0.0])


def test_penalties_leave_base_untouched():
    rng = random.Random(5)
    for _ in range(100):
        xs = [rng.random() for _ in range(4)]
        s = SessionSnapshot.from_lists(xs)
        base = score_session(s).total
        pc = pc_penalty(s, ContradictionConfig([(0, 1)], [1.0], 0.1))
        pr = psr_penalty(s, xs, CausalNetwork([[0.0] * 4] * 4, [0.5] * 4))
        assert pc.adjusted_total == base + pc.penalty
        assert pr.adjusted_total == base + pr.penalty
        assert score_session(s).total == base
