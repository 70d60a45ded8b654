"""Shared hypothesis strategies and small builders."""

from __future__ import annotations

import math
import random

from hypothesis import strategies as st

from aas.kernel import ChannelState, SessionSnapshot

unit = st.floats(0.0, 1.0, allow_nan=False, allow_infinity=False)


def normalized(raw):
    total = math.fsum(raw)
    w = [r / total for r in raw]
    w[-1] = max(0.0, 1.0 - math.fsum(w[:-1]))
    return w


@st.composite
def snapshots(draw, min_channels=1, max_channels=8, t=0):
    m = draw(st.integers(min_channels, max_channels))
    raw = draw(st.lists(st.floats(0.01, 1.0), min_size=m, max_size=m))
    xs = draw(st.lists(unit, min_size=m, max_size=m))
    Rs = draw(st.lists(unit, min_size=m, max_size=m))
    return SessionSnapshot.from_lists(xs, Rs, normalized(raw), t=t)


@st.composite
def streams(draw, min_channels=1, max_channels=6, min_steps=1, max_steps=6):
    m = draw(st.integers(min_channels, max_channels))
    T = draw(st.integers(min_steps, max_steps))
    w = normalized(draw(st.lists(st.floats(0.01, 1.0), min_size=m, max_size=m)))
    out = []
    for t in range(T):
        xs = draw(st.lists(unit, min_size=m, max_size=m))
        Rs = draw(st.lists(unit, min_size=m, max_size=m))
        out.append(SessionSnapshot.from_lists(xs, Rs, w, t=t))
    return out


def random_snapshot(rng: random.Random, m: int, t: int = 0, R_max: float = 1.0) -> SessionSnapshot:
    w = normalized([rng.uniform(0.01, 1.0) for _ in range(m)])
    return SessionSnapshot(
        t,
        tuple(ChannelState(rng.random(), rng.uniform(0.0, R_max)) for _ in range(m)),
        tuple(w),
    )


def stream_from(xs_rows, w=None, R_rows=None):
    m = len(xs_rows[0])
    w = w or [1.0 / m] * m
    return [
        SessionSnapshot.from_lists(xs, None if R_rows is None else R_rows[t], w, t=t)
        for t, xs in enumerate(xs_rows)
    ]


def random_tree(rng: random.Random, max_depth: int = 5, max_leaves: int = 64):
    """Random tree built bottom-up so parent masses are exact sums."""
    from aas.hierarchy import HierarchyNode

    budget = [max_leaves]
    counter = [0]

    def build(depth: int):
        counter[0] += 1
        nid = f"n{counter[0]}"
        if depth >= max_depth or budget[0] <= 1 or rng.random() < 0.25:
            budget[0] -= 1
            return HierarchyNode(nid, rng.uniform(0.0, 1.0), (), rng.random())
        k = min(rng.randint(2, 4), budget[0])
        kids = tuple(build(depth + 1) for _ in range(k))
        return HierarchyNode(nid, math.fsum(c.alpha for c in kids), kids)

    # retry until the root splits so every tree has at least two levels
    root = build(0)
    while root.is_leaf or len(root.leaves()) > max_leaves:
        budget[0] = max_leaves
        root = build(0)
    return root
