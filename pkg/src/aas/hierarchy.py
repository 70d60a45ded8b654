"""Multi-scale rollups, organicity, group dominance and whole-part accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, NamedTuple, Sequence

from .kernel import (
    DomainError,
    KernelConfig,
    SessionSnapshot,
    breakdown_from_arrays,
    check_arity,
    entropy_bits,
    phi,
)

MASS_TOL = 1e-12


@dataclass(frozen=True)
class HierarchyNode:
    """Tree node carrying activity mass; leaves carry a score, parents derive theirs."""

    id: str
    alpha: float
    children: tuple[HierarchyNode, ...] = ()
    x: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))
        if self.alpha < 0:
            raise DomainError(f"node {self.id}: mass must be nonnegative")
        if self.children:
            if self.x is not None:
                raise DomainError(f"node {self.id}: internal scores are derived, not given")
            total = math.fsum(c.alpha for c in self.children)
            if abs(total - self.alpha) > MASS_TOL * max(1.0, self.alpha):
                raise DomainError(
                    f"node {self.id}: children mass {total!r} != parent mass {self.alpha!r}"
                )
        elif self.x is None or not (0.0 <= self.x <= 1.0):
            raise DomainError(f"leaf {self.id}: score must lie in [0, 1]")

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def score(self) -> float:
        if self.is_leaf:
            return self.x  # type: ignore[return-value]
        if self.alpha > 0:
            s = math.fsum(c.alpha * c.score for c in self.children) / self.alpha
        else:
            s = math.fsum(c.score for c in self.children) / len(self.children)
        return min(1.0, max(0.0, s))

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=-1)

    def leaves(self) -> list[HierarchyNode]:
        if self.is_leaf:
            return [self]
        return [leaf for c in self.children for leaf in c.leaves()]

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"id": self.id, "alpha": self.alpha}
        if self.is_leaf:
            d["x"] = self.x
        else:
            d["children"] = [c.to_dict() for c in self.children]
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> HierarchyNode:
        return cls(
            id=str(d["id"]),
            alpha=float(d["alpha"]),
            children=tuple(cls.from_dict(c) for c in d.get("children", ())),
            x=None if d.get("children") else float(d["x"]),
        )


class RefinementGain(NamedTuple):
    level: int
    parent: str
    gain: float


@dataclass(frozen=True)
class LevelRollup:
    level_totals: tuple[float, ...]
    gains: tuple[RefinementGain, ...]
    organicity: tuple[tuple[int, float], ...]
    root_mass: float

    def organic_to_depth(self, depth: int | None = None) -> bool:
        """Every level up to ``depth`` has an active node and positive contribution entropy.

        Only finite depths are decidable; the unbounded limit is not.
        """
        levels = self.organicity if depth is None else self.organicity[: depth + 1]
        return all(m >= 1 and h > 0 for m, h in levels)

    def to_dict(self) -> dict[str, Any]:
        return {
            "level_totals": list(self.level_totals),
            "gains": [list(g) for g in self.gains],
            "organicity": [list(o) for o in self.organicity],
            "root_mass": self.root_mass,
        }


def level_rollup(root: HierarchyNode, cfg: KernelConfig | None = None) -> LevelRollup:
    """Score every depth of the tree; leaves shallower than the tree persist to deeper levels."""
    cfg = cfg or KernelConfig()
    level = [root]
    totals, gains, organicity = [], [], []
    s = 0
    while True:
        bd = breakdown_from_arrays([n.alpha for n in level], [n.score for n in level], cfg.epsilon)
        totals.append(bd.total)
        organicity.append((bd.active_count, bd.contrib_entropy))
        if all(n.is_leaf for n in level):
            break
        nxt = []
        for n in level:
            if n.is_leaf:
                nxt.append(n)
                continue
            parent_pen = phi(n.score, cfg.epsilon)
            gain = math.fsum(c.alpha * (phi(c.score, cfg.epsilon) - parent_pen) for c in n.children)
            gains.append(RefinementGain(s, n.id, gain))
            nxt.extend(n.children)
        level = nxt
        s += 1
    return LevelRollup(tuple(totals), tuple(gains), tuple(organicity), root.alpha)


def tree_from_snapshot(snap: SessionSnapshot, shape: Mapping[str, Any]) -> HierarchyNode:
    """Instantiate a tree shape whose leaves name channel indices with this session's (alpha, x)."""
    alphas, xs = snap.alphas, snap.x

    def build(node: Mapping[str, Any]) -> HierarchyNode:
        if "channel" in node:
            i = int(node["channel"])
            if not (0 <= i < snap.arity):
                raise DomainError(f"tree leaf references missing channel {i}")
            return HierarchyNode(str(node.get("id", f"ch{i}")), alphas[i], (), xs[i])
        kids = tuple(build(c) for c in node["children"])
        return HierarchyNode(str(node["id"]), math.fsum(k.alpha for k in kids), kids)

    return build(shape)


@dataclass(frozen=True)
class GroupingView:
    groups: tuple[tuple[int, ...], ...]
    window: int = 1
    margin: float = 0.0
    subgroups: Mapping[int, tuple[tuple[int, ...], ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(tuple(g) for g in self.groups))
        if self.window < 1:
            raise DomainError("window must be at least 1")
        if self.margin < 0:
            raise DomainError("dominance margin must be nonnegative")
        seen: set[int] = set()
        for g in self.groups:
            if not g:
                raise DomainError("groups must be nonempty")
            if seen & set(g):
                raise DomainError("groups must be disjoint")
            seen |= set(g)
        for gid, subs in self.subgroups.items():
            flat = sorted(i for s in subs for i in s)
            if flat != sorted(self.groups[gid]):
                raise DomainError(f"subgroups of group {gid} must partition it")

    def validate_cover(self, n_leaves: int) -> None:
        flat = sorted(i for g in self.groups for i in g)
        if flat != list(range(n_leaves)):
            raise DomainError("groups must cover every leaf channel exactly once")


def _group_shares(contribs: Sequence[float], groups: Sequence[Sequence[int]]) -> tuple[list[float], list[float]]:
    masses = [math.fsum(contribs[i] for i in g) for g in groups]
    total = math.fsum(contribs)
    if total <= 0:
        return masses, [0.0] * len(groups)
    return masses, [m / total for m in masses]


def _argmax_lowest(values: Sequence[float]) -> tuple[int, bool]:
    top = max(values)
    winners = [k for k, v in enumerate(values) if v == top]
    return winners[0], len(winners) == 1


@dataclass(frozen=True)
class DominanceScan:
    shares: tuple[tuple[float, ...], ...]
    dominant: tuple[int | None, ...]
    unique: tuple[bool, ...]
    windowed_means: tuple[float, ...]
    stable_dominant: int | None
    group_entropy: tuple[float, ...]
    subgroup_entropy: tuple[dict[int, float], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "shares": [list(s) for s in self.shares],
            "dominant": list(self.dominant),
            "unique": list(self.unique),
            "windowed_means": list(self.windowed_means),
            "stable_dominant": self.stable_dominant,
            "group_entropy": list(self.group_entropy),
            "subgroup_entropy": [{str(k): v for k, v in sorted(d.items())} for d in self.subgroup_entropy],
        }


def dominance_scan(
    stream: Sequence[SessionSnapshot], view: GroupingView, cfg: KernelConfig | None = None
) -> DominanceScan:
    """Track group shares, the instantaneous leader and windowed stable dominance.

    Windowed means cover the last ``view.window`` sessions. Ties go to the
    lowest group id and are marked non-unique.
    """
    cfg = cfg or KernelConfig()
    m = check_arity(stream)
    view.validate_cover(m)
    shares, dominant, unique, entropies, sub_h = [], [], [], [], []
    for snap in stream:
        bd = breakdown_from_arrays(snap.alphas, snap.x, cfg.epsilon)
        _, p = _group_shares(bd.contributions, view.groups)
        shares.append(tuple(p))
        if bd.total > 0:
            g, u = _argmax_lowest(p)
            dominant.append(g)
            unique.append(u)
        else:
            dominant.append(None)
            unique.append(False)
        entropies.append(entropy_bits(p))
        per_sub = {}
        for gid, subs in view.subgroups.items():
            _, sp = _group_shares(bd.contributions, subs)
            per_sub[gid] = entropy_bits(sp)
        sub_h.append(per_sub)

    W = min(view.window, len(stream))
    tail = shares[-W:]
    means = tuple(math.fsum(s[g] for s in tail) / W for g in range(len(view.groups)))
    stable = None
    if any(v > 0 for v in means):
        lead, is_unique = _argmax_lowest(means)
        rivals = [v for k, v in enumerate(means) if k != lead]
        if not rivals:
            stable = lead
        elif is_unique and means[lead] - max(rivals) >= view.margin:
            stable = lead
    return DominanceScan(
        tuple(shares), tuple(dominant), tuple(unique), means, stable, tuple(entropies), tuple(sub_h)
    )


class WholePart(NamedTuple):
    global_totals: tuple[float, ...]
    part_totals: tuple[float, ...]
    window_mean_global: float
    dominant_group: int | None
    dominance_bounds: tuple[float, float]


def whole_part_check(
    stream: Sequence[SessionSnapshot],
    view: GroupingView,
    global_R: Sequence[Sequence[float]] | None,
    group_R: Sequence[Sequence[float]],
    cfg: KernelConfig | None = None,
) -> WholePart:
    """Compare the whole (global redundancy) against the sum of its groups.

    ``group_R[k][i]`` is leaf ``i``'s within-group redundancy at stream
    position ``k``; it may not exceed the global one. ``global_R=None``
    uses the snapshots' own R. The two dominance lower bounds use the
    last ``view.window`` sessions and group masses under global redundancy.
    """
    cfg = cfg or KernelConfig()
    m = check_arity(stream)
    view.validate_cover(m)
    if global_R is None:
        global_R = [s.R for s in stream]
    if len(group_R) != len(stream) or len(global_R) != len(stream):
        raise DomainError("redundancy series must match stream length")

    globals_, parts, contribs = [], [], []
    for snap, gR, pR in zip(stream, global_R, group_R):
        if len(gR) != m or len(pR) != m:
            raise DomainError("redundancy vectors must match channel count")
        for i in range(m):
            if pR[i] > gR[i]:
                raise DomainError(
                    f"t={snap.t} leaf {i}: group redundancy {pR[i]!r} exceeds global {gR[i]!r}"
                )
        pens = [phi(x, cfg.epsilon) for x in snap.x]
        c_glob = [w * (1.0 - r) * p for w, r, p in zip(snap.weights, gR, pens)]
        c_part = [w * (1.0 - r) * p for w, r, p in zip(snap.weights, pR, pens)]
        globals_.append(math.fsum(c_glob))
        parts.append(math.fsum(math.fsum(c_part[i] for i in g) for g in view.groups))
        contribs.append(c_glob)

    W = min(view.window, len(stream))
    tail = contribs[-W:]
    tail_totals = globals_[-W:]
    mean_global = math.fsum(tail_totals) / W
    shares = [_group_shares(c, view.groups)[1] for c in tail]
    masses = [_group_shares(c, view.groups)[0] for c in tail]
    mean_shares = [math.fsum(s[g] for s in shares) / W for g in range(len(view.groups))]
    if mean_global <= 0:
        return WholePart(tuple(globals_), tuple(parts), mean_global, None, (0.0, 0.0))
    lead, _ = _argmax_lowest(mean_shares)
    p_min = min(s[lead] for s in shares)
    mean_group = math.fsum(mm[lead] for mm in masses) / W
    min_group = min(mm[lead] for mm in masses)
    bounds = (p_min * mean_group, mean_shares[lead] * min_group)
    return WholePart(tuple(globals_), tuple(parts), mean_global, lead, bounds)
