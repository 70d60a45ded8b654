"""Structural clauses: refinement, compounds, windowless audits, signatures, dedup."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

from .kernel import (
    ChannelState,
    DomainError,
    KernelConfig,
    SessionSnapshot,
    WEIGHT_SUM_TOL,
    breakdown_from_arrays,
    check_arity,
    phi,
    score_session,
)

RedundancyEstimator = Callable[[SessionSnapshot], Sequence[float]]


def static_redundancy(snap: SessionSnapshot) -> tuple[float, ...]:
    """Default estimator: R is taken as given input."""
    return snap.R


@dataclass(frozen=True)
class RefinementPlan:
    target_channel: int
    sub_weights: tuple[float, ...]


def apply_refinement(snap: SessionSnapshot, plan: RefinementPlan) -> SessionSnapshot:
    """Split one channel into children that inherit its (x, R, metadata)."""
    i = plan.target_channel
    if not (0 <= i < snap.arity):
        raise DomainError(f"refinement target {i} out of range for {snap.arity} channels")
    subs = tuple(float(w) for w in plan.sub_weights)
    if not subs or any(not (w >= 0.0) for w in subs):
        raise DomainError("sub_weights must be a nonempty list of nonnegative reals")
    if abs(math.fsum(subs) - snap.weights[i]) > WEIGHT_SUM_TOL:
        raise DomainError(
            f"sub_weights sum {math.fsum(subs)!r} does not match weight {snap.weights[i]!r}"
        )
    k = len(subs)
    return SessionSnapshot(
        t=snap.t,
        channels=snap.channels[:i] + (snap.channels[i],) * k + snap.channels[i + 1 :],
        weights=snap.weights[:i] + subs + snap.weights[i + 1 :],
        metadata=snap.metadata[:i] + (snap.metadata[i],) * k + snap.metadata[i + 1 :],
    )


def permute_channels(snap: SessionSnapshot, order: Sequence[int]) -> SessionSnapshot:
    if sorted(order) != list(range(snap.arity)):
        raise DomainError("order must be a permutation of channel indices")
    return SessionSnapshot(
        t=snap.t,
        channels=tuple(snap.channels[k] for k in order),
        weights=tuple(snap.weights[k] for k in order),
        metadata=tuple(snap.metadata[k] for k in order),
    )


def embed_metadata(snap: SessionSnapshot, transform: Callable[[Any], Any]) -> SessionSnapshot:
    return replace(snap, metadata=tuple(transform(s) for s in snap.metadata))


@dataclass(frozen=True)
class CompoundSpec:
    """Monads joined into a compound.

    ``overlaps[j][k][i]`` is the compound-level overlap for channel ``i`` of
    monad ``j`` at stream position ``k``; it must dominate that channel's
    stand-alone redundancy.
    """

    monads: tuple[tuple[SessionSnapshot, ...], ...]
    mixture_weights: tuple[float, ...]
    overlaps: tuple[tuple[tuple[float, ...], ...], ...]

    def __post_init__(self) -> None:
        if len(self.monads) != len(self.mixture_weights) or len(self.monads) != len(self.overlaps):
            raise DomainError("monads, mixture_weights and overlaps must align")
        if any(p < 0 for p in self.mixture_weights):
            raise DomainError("mixture weights must be nonnegative")
        if abs(math.fsum(self.mixture_weights) - 1.0) > WEIGHT_SUM_TOL:
            raise DomainError("mixture weights must sum to 1")


def _position(stream: Sequence[SessionSnapshot], t: int) -> int:
    for k, snap in enumerate(stream):
        if snap.t == t:
            return k
    raise DomainError(f"session index {t} not present in stream")


def compound_score(
    spec: CompoundSpec, t: int, cfg: KernelConfig | None = None
) -> tuple[float, float]:
    """Return (compound_total, standalone_mix) at session index ``t``."""
    cfg = cfg or KernelConfig()
    compound_terms, standalone_terms = [], []
    for j, (stream, pi) in enumerate(zip(spec.monads, spec.mixture_weights)):
        k = _position(stream, t)
        snap = stream[k]
        lam = spec.overlaps[j][k]
        if len(lam) != snap.arity:
            raise DomainError(f"overlap vector for monad {j} has wrong length")
        for i, (w, ch) in enumerate(zip(snap.weights, snap.channels)):
            if not (0.0 <= lam[i] <= 1.0):
                raise DomainError(f"overlap ({j},{i}) outside [0, 1]")
            if lam[i] < ch.R:
                raise DomainError(
                    f"overlap ({j},{i})={lam[i]!r} below stand-alone redundancy {ch.R!r}"
                )
            p = phi(ch.x, cfg.epsilon)
            compound_terms.append(pi * w * (1.0 - lam[i]) * p)
        standalone_terms.append(pi * score_session(snap, cfg).total)
    return math.fsum(compound_terms), math.fsum(standalone_terms)


# --- windowless audit -------------------------------------------------------


@dataclass(frozen=True)
class AuditFinding:
    probe_id: str
    clause: str
    passed: bool
    max_diff: float = 0.0
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "probe_id": self.probe_id,
            "clause": self.clause,
            "passed": self.passed,
            "max_diff": self.max_diff,
            "detail": self.detail,
        }


@dataclass
class AuditReport:
    name: str
    findings: list[AuditFinding] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.findings)

    def add(self, finding: AuditFinding) -> None:
        self.findings.append(finding)

    def sorted(self) -> AuditReport:
        return AuditReport(self.name, sorted(self.findings, key=lambda f: f.probe_id))

    def to_dict(self) -> dict[str, Any]:
        return {
            "audit": self.name,
            "passed": self.passed,
            "findings": [f.to_dict() for f in self.findings],
        }


@dataclass(frozen=True)
class AuditPlan:
    metadata_trials: int = 3
    ghost_kinds: tuple[str, ...] = ("zero_weight", "full_redundancy")
    ghost_weight: float = 0.25
    bumps: tuple[tuple[int, float], ...] = ()
    seed: int = 0


def _scrambled(rng: random.Random, value: Any) -> Any:
    return {"scrambled": rng.getrandbits(64), "was": repr(value)[:32]}


def _estimate(snap: SessionSnapshot, estimator: RedundancyEstimator, cfg: KernelConfig):
    R = tuple(estimator(snap))
    alphas = tuple(w * (1.0 - r) for w, r in zip(snap.weights, R))
    return R, breakdown_from_arrays(alphas, snap.x, cfg.epsilon, t=snap.t)


def windowless_audit(
    stream: Sequence[SessionSnapshot],
    probes: AuditPlan | None = None,
    cfg: KernelConfig | None = None,
    estimator: RedundancyEstimator = static_redundancy,
) -> AuditReport:
    """Probe causal insulation: metadata embeddings, ghost channels, cross-channel bumps."""
    probes = probes or AuditPlan()
    cfg = cfg or KernelConfig()
    check_arity(stream)
    rng = random.Random(probes.seed)
    report = AuditReport("windowless")

    for k, snap in enumerate(stream):
        _, base = _estimate(snap, estimator, cfg)

        for trial in range(probes.metadata_trials):
            shuffled = embed_metadata(snap, lambda s: _scrambled(rng, s))
            _, other = _estimate(shuffled, estimator, cfg)
            same = other == base
            report.add(AuditFinding(
                probe_id=f"t{snap.t:06d}/metadata/{trial:03d}",
                clause="embedding",
                passed=same,
                max_diff=_max_abs_diff(base.contributions, other.contributions),
            ))

        R = tuple(estimator(snap))
        for kind in probes.ghost_kinds:
            if kind == "zero_weight":
                gw, gR = 0.0, rng.random()
            elif kind == "full_redundancy":
                gw, gR = probes.ghost_weight, 1.0
            else:
                raise DomainError(f"unknown ghost kind {kind!r}")
            alphas = [w * (1.0 - r) for w, r in zip(snap.weights, R)] + [gw * (1.0 - gR)]
            ghost = breakdown_from_arrays(alphas, snap.x + (rng.random(),), cfg.epsilon)
            diff = abs(ghost.total - base.total)
            report.add(AuditFinding(
                probe_id=f"t{snap.t:06d}/ghost/{kind}",
                clause="ghost",
                passed=diff == 0.0 and ghost.contributions[-1] == 0.0,
                max_diff=diff,
            ))

        for j, delta in probes.bumps:
            if not (0 <= j < snap.arity):
                raise DomainError(f"bump channel {j} out of range")
            xs = list(snap.x)
            xs[j] = min(1.0, max(0.0, xs[j] + delta))
            bumped_snap = SessionSnapshot(
                t=snap.t,
                channels=tuple(ChannelState(x, c.R) for x, c in zip(xs, snap.channels)),
                weights=snap.weights,
                metadata=snap.metadata,
            )
            R2, bumped = _estimate(bumped_snap, estimator, cfg)
            leaks = [
                i for i in range(snap.arity)
                if i != j
                and bumped.contributions[i] != base.contributions[i]
                and R2[i] == R[i]
            ]
            coupled = [i for i in range(snap.arity) if i != j and R2[i] != R[i]]
            others = [i for i in range(snap.arity) if i != j]
            report.add(AuditFinding(
                probe_id=f"t{snap.t:06d}/bump/{j:04d}",
                clause="insulation",
                passed=not leaks,
                max_diff=max(
                    (abs(bumped.contributions[i] - base.contributions[i]) for i in others),
                    default=0.0,
                ),
                detail=(
                    f"leak into {leaks}" if leaks
                    else f"coupled via redundancy: {coupled}" if coupled else ""
                ),
            ))
    return report.sorted()


def _max_abs_diff(a: Sequence[float], b: Sequence[float]) -> float:
    return max((abs(u - v) for u, v in zip(a, b)), default=0.0)


# --- intrinsic signatures and deduplication ---------------------------------


@dataclass(frozen=True)
class IntrinsicSignature:
    """Per-step (weight, penalty, signed penalty change) triples of one channel.

    The change at the first step is 0: there is no predecessor to compare with.
    """

    weight: float
    penalties: tuple[float, ...]
    deltas: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.penalties)


def intrinsic_signature(
    stream: Sequence[SessionSnapshot], channel: int, cfg: KernelConfig | None = None
) -> IntrinsicSignature:
    cfg = cfg or KernelConfig()
    check_arity(stream)
    if not (0 <= channel < stream[0].arity):
        raise DomainError(f"channel {channel} out of range")
    pens = tuple(phi(s.channels[channel].x, cfg.epsilon) for s in stream)
    deltas = (0.0,) + tuple(b - a for a, b in zip(pens, pens[1:]))
    return IntrinsicSignature(stream[0].weights[channel], pens, deltas)


def intrinsic_distance(sig_i: IntrinsicSignature, sig_j: IntrinsicSignature) -> float:
    if len(sig_i) != len(sig_j):
        raise DomainError(f"horizon mismatch: {len(sig_i)} vs {len(sig_j)}")
    dw = abs(sig_i.weight - sig_j.weight)
    return max(
        (
            dw + abs(pa - pb) + abs(da - db)
            for pa, pb, da, db in zip(sig_i.penalties, sig_j.penalties, sig_i.deltas, sig_j.deltas)
        ),
        default=dw,
    )


def dedup_plan(
    stream: Sequence[SessionSnapshot],
    tolerance: float = 0.0,
    cfg: KernelConfig | None = None,
) -> list[tuple[int, ...]]:
    """Group channels whose intrinsic paths and masked weights coincide.

    Each group lists its representative (lowest index) first. Only groups
    with at least two members are returned.
    """
    cfg = cfg or KernelConfig()
    if tolerance < 0:
        raise DomainError("tolerance must be nonnegative")
    m = check_arity(stream)
    sigs = [intrinsic_signature(stream, i, cfg) for i in range(m)]
    alphas = [s.alphas for s in stream]
    assigned = [False] * m
    groups: list[tuple[int, ...]] = []
    for i in range(m):
        if assigned[i]:
            continue
        members = [i]
        for j in range(i + 1, m):
            if assigned[j]:
                continue
            if intrinsic_distance(sigs[i], sigs[j]) > tolerance:
                continue
            if any(abs(a[i] - a[j]) > tolerance for a in alphas):
                continue
            members.append(j)
            assigned[j] = True
        if len(members) > 1:
            groups.append(tuple(members))
    return groups


def merge_channels(
    stream: Sequence[SessionSnapshot], groups: Sequence[Sequence[int]]
) -> list[SessionSnapshot]:
    """Collapse each group onto its representative, which receives the group's weight."""
    m = check_arity(stream)
    dropped: set[int] = set()
    extra = [0.0] * m
    for g in groups:
        rep = min(g)
        for j in g:
            if j != rep:
                dropped.add(j)
                extra[rep] += stream[0].weights[j]
    keep = [i for i in range(m) if i not in dropped]
    merged = []
    for snap in stream:
        merged.append(SessionSnapshot(
            t=snap.t,
            channels=tuple(snap.channels[i] for i in keep),
            weights=tuple(snap.weights[i] + extra[i] for i in keep),
            metadata=tuple(snap.metadata[i] for i in keep),
        ))
    return merged
