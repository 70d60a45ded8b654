import math
import random

import pytest

from aas.hierarchy import (
    GroupingView,
    HierarchyNode,
    dominance_scan,
    level_rollup,
    tree_from_snapshot,
    whole_part_check,
)
from aas.kernel import DomainError, SessionSnapshot, phi

from helpers import random_tree, stream_from

PHI_0 = 6.6582114827517947


def leaf(i, a, x):
    return HierarchyNode(i, a, (), x)


class TestNode:
    def test_mass_partition(self):
        with pytest.raises(DomainError):
            HierarchyNode("p", 1.0, (leaf("a", 0.5, 0.1), leaf("b", 0.4, 0.2)))

    def test_derived_score(self):
        p = HierarchyNode("p", 1.0, (leaf("a", 0.25, 0.2), leaf("b", 0.75, 0.6)))
        assert p.score == pytest.approx(0.5)

    def test_internal_score_not_given(self):
        with pytest.raises(DomainError):
            HierarchyNode("p", 1.0, (leaf("a", 1.0, 0.2),), 0.3)

    def test_round_trip(self):
        p = HierarchyNode("p", 1.0, (leaf("a", 0.25, 0.2), leaf("b", 0.75, 0.6)))
        assert HierarchyNode.from_dict(p.to_dict()) == p


class TestRollup:
    def test_homogeneous_children(self):
        p = HierarchyNode("p", 1.0, (leaf("a", 0.5, 0.4), leaf("b", 0.5, 0.4)))
        roll = level_rollup(p)
        assert roll.gains[0].gain == pytest.approx(0.0, abs=1e-15)
        assert roll.level_totals[0] == pytest.approx(roll.level_totals[1], rel=1e-15)

    def test_two_children(self):
        p = HierarchyNode("p", 1.0, (leaf("a", 0.5, 0.2), leaf("b", 0.5, 0.8)))
        roll = level_rollup(p)
        assert p.score == pytest.approx(0.5)
        assert roll.gains[0].gain == pytest.approx(0.30634162913980308, rel=1e-12)
        diff = roll.level_totals[1] - roll.level_totals[0]
        assert diff == pytest.approx(roll.gains[0].gain, rel=1e-12)

    def test_depth_three_chain(self):
        def split(nid, a, xs):
            if len(xs) == 1:
                return leaf(nid, a, xs[0])
            h = len(xs) // 2
            return HierarchyNode(nid, a, (split(nid + "L", a / 2, xs[:h]), split(nid + "R", a / 2, xs[h:])))

        root = split("r", 1.0, [0.05, 0.9, 0.3, 0.7, 0.1, 0.95, 0.5, 0.6])
        totals = level_rollup(root).level_totals
        assert len(totals) == 4
        assert all(a <= b + 1e-12 for a, b in zip(totals, totals[1:]))
        assert totals[-1] <= PHI_0

    def test_organicity(self):
        p = HierarchyNode("p", 1.0, (leaf("a", 0.5, 0.2), leaf("b", 0.5, 0.8)))
        roll = level_rollup(p)
        assert roll.organicity[0] == (1, 0.0)
        assert not roll.organic_to_depth(1)
        assert roll.organicity[1][0] == 2

    def test_random_trees(self):
        rng = random.Random(8)
        for _ in range(200):
            root = random_tree(rng)
            roll = level_rollup(root)
            t = roll.level_totals
            assert all(a <= b + 1e-12 for a, b in zip(t, t[1:]))
            assert all(g.gain >= -1e-12 for g in roll.gains)
            assert t[-1] <= root.alpha * PHI_0 + 1e-12
            # per-level gains add up to the level step
            for s in range(len(t) - 1):
                step = math.fsum(g.gain for g in roll.gains if g.level == s)
                assert t[s + 1] - t[s] == pytest.approx(step, abs=1e-9)

    def test_from_snapshot(self):
        snap = SessionSnapshot.from_lists([0.2, 0.8, 0.5], [0.0, 0.5, 0.0], [0.4, 0.4, 0.2])
        shape = {"id": "r", "children": [{"channel": 0}, {"id": "g", "children": [{"channel": 1}, {"channel": 2}]}]}
        root = tree_from_snapshot(snap, shape)
        assert root.alpha == pytest.approx(sum(snap.alphas))
        roll = level_rollup(root)
        # the deepest level reproduces the session score
        assert roll.level_totals[-1] == pytest.approx(math.fsum(a * phi(x) for a, x in zip(snap.alphas, snap.x)))


class TestDominance:
    def _stream(self, contribs_rows):
        # x = 0 makes contribution proportional to weight
        rows = []
        for c in contribs_rows:
            total = sum(c)
            rows.append(SessionSnapshot.from_lists([0.0] * len(c), weights=[v / total for v in c]))
        return rows

    def test_example(self):
        s = self._stream([[0.6, 0.3, 0.1]])
        scan = dominance_scan(s, GroupingView(((0,), (1,), (2,))))
        assert scan.dominant == (0,)
        assert scan.unique == (True,)
        assert scan.group_entropy[0] == pytest.approx(1.2954618442383218, rel=1e-12)

    def test_single_group(self):
        s = self._stream([[0.6, 0.4]] * 3)
        scan = dominance_scan(s, GroupingView(((0, 1),), window=3, margin=0.5))
        assert scan.group_entropy == (0.0, 0.0, 0.0)
        assert scan.stable_dominant == 0

    def test_tie(self):
        s = self._stream([[0.5, 0.5]])
        scan = dominance_scan(s, GroupingView(((0,), (1,))))
        assert scan.dominant == (0,)
        assert scan.unique == (False,)
        assert scan.stable_dominant is None

    def test_margin(self):
        s = self._stream([[0.55, 0.45]] * 2)
        assert dominance_scan(s, GroupingView(((0,), (1,)), 2, 0.05)).stable_dominant == 0
        assert dominance_scan(s, GroupingView(((0,), (1,)), 2, 0.2)).stable_dominant is None

    def test_zero_total(self):
        s = stream_from([[1.0, 1.0]])
        scan = dominance_scan(s, GroupingView(((0,), (1,))))
        assert scan.shares == ((0.0, 0.0),)
        assert scan.dominant == (None,)

    def test_cover(self):
        with pytest.raises(DomainError):
            dominance_scan(stream_from([[0.1, 0.2, 0.3]]), GroupingView(((0,), (1,))))

    def test_subgroup_entropy(self):
        s = self._stream([[0.25, 0.25, 0.5]])
        view = GroupingView(((0, 1), (2,)), subgroups={0: ((0,), (1,))})
        scan = dominance_scan(s, view)
        assert scan.subgroup_entropy[0][0] == pytest.approx(1.0)


class TestWholePart:
    view = GroupingView(((0, 1), (2,)), window=2)

    def test_equal_redundancy(self):
        s = stream_from([[0.2, 0.5, 0.7]] * 2, R_rows=[[0.1, 0.2, 0.3]] * 2)
        wp = whole_part_check(s, self.view, None, [x.R for x in s])
        assert wp.global_totals == pytest.approx(wp.part_totals, rel=1e-15)

    def test_zero_redundancy(self):
        s = stream_from([[0.2, 0.5, 0.7]] * 2)
        wp = whole_part_check(s, self.view, None, [[0.0] * 3] * 2)
        assert wp.global_totals == pytest.approx(wp.part_totals, rel=1e-15)

    def test_strict(self):
        s = stream_from([[0.2, 0.5, 0.7]], R_rows=[[0.5, 0.0, 0.0]])
        wp = whole_part_check(s, self.view, None, [[0.0, 0.0, 0.0]])
        assert wp.global_totals[0] < wp.part_totals[0]

    def test_monotone_redundancy_enforced(self):
        s = stream_from([[0.2, 0.5, 0.7]])
        with pytest.raises(DomainError):
            whole_part_check(s, self.view, None, [[0.1, 0.0, 0.0]])

    def test_bounds_on_random_streams(self):
        rng = random.Random(21)
        for _ in range(200):
            m, T = rng.randint(2, 6), rng.randint(1, 6)
            cut = rng.randint(1, m - 1)
            view = GroupingView((tuple(range(cut)), tuple(range(cut, m))), window=rng.randint(1, T))
            R = [[rng.random() for _ in range(m)] for _ in range(T)]
            s = stream_from([[rng.random() for _ in range(m)] for _ in range(T)], R_rows=R)
            part_R = [[r * rng.random() for r in row] for row in R]
            wp = whole_part_check(s, view, None, part_R)
            assert all(g <= p + 1e-12 for g, p in zip(wp.global_totals, wp.part_totals))
            assert all(b <= wp.window_mean_global + 1e-12 for b in wp.dominance_bounds)
