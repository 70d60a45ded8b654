"""Rate caps, appetition steps, trajectory metrics and counterfactual replay audits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, NamedTuple, Sequence

from .kernel import (
    ChannelState,
    DomainError,
    KernelConfig,
    SessionSnapshot,
    check_arity,
    entropy_bits,
    phi,
    score_session,
)
from .ontology import AuditFinding, AuditReport

RATE_TOL = 1e-9
FLATLINE_TOL = 1e-12
FLATLINE_MIN_STEPS = 3
FLATLINE_CHANNEL_MOTION = 1e-6


@dataclass(frozen=True)
class RateCap:
    epsilon: float
    L_x: float
    L_R: float
    cap: float


def rate_cap(cfg: KernelConfig, L_x: float, L_R: float) -> RateCap:
    """Lipschitz constant of the score given per-channel rate bounds on x and R."""
    if L_x < 0 or L_R < 0:
        raise DomainError("rate bounds must be nonnegative")
    cap = cfg.phi_zero * L_R + L_x / (cfg.epsilon * math.log(2.0))
    return RateCap(cfg.epsilon, float(L_x), float(L_R), cap)


@dataclass(frozen=True)
class RateViolation:
    kind: str  # "jump" or "flatline"
    t_from: int
    t_to: int
    delta: float
    limit: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "t_from": self.t_from,
            "t_to": self.t_to,
            "delta": self.delta,
            "limit": self.limit,
        }


def rate_check(
    stream: Sequence[SessionSnapshot], cap: RateCap, dt: float = 1.0
) -> list[RateViolation]:
    """Flag score jumps above ``cap * dt`` and suspicious flatlines.

    A flatline is a run of at least three snapshots whose totals agree to
    1e-12 while some channel contribution moves by more than 1e-6, i.e. an
    exact cross-channel cancellation.
    """
    if len(stream) < 2:
        raise DomainError("rate_check needs at least two snapshots")
    if not dt > 0:
        raise DomainError("dt must be positive")
    check_arity(stream)
    cfg = KernelConfig(cap.epsilon)
    bds = [score_session(s, cfg) for s in stream]
    limit = cap.cap * dt
    out: list[RateViolation] = []
    for a, b, sa, sb in zip(bds, bds[1:], stream, stream[1:]):
        d = b.total - a.total
        if abs(d) > limit + RATE_TOL:
            out.append(RateViolation("jump", sa.t, sb.t, d, limit))

    run_start = 0
    for k in range(1, len(bds) + 1):
        flat = k < len(bds) and abs(bds[k].total - bds[k - 1].total) <= FLATLINE_TOL
        if flat:
            continue
        if k - run_start >= FLATLINE_MIN_STEPS:
            motion = max(
                abs(u - v)
                for p in range(run_start, k - 1)
                for u, v in zip(bds[p].contributions, bds[p + 1].contributions)
            )
            if motion > FLATLINE_CHANNEL_MOTION:
                out.append(RateViolation(
                    "flatline", stream[run_start].t, stream[k - 1].t, motion, FLATLINE_TOL
                ))
        run_start = k
    return out


@dataclass(frozen=True)
class AppetitionCommand:
    targets: tuple[float, ...]
    steps: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.targets) != len(self.steps):
            raise DomainError("targets and steps must have equal length")
        for g, eta in zip(self.targets, self.steps):
            if not (0.0 <= g <= 1.0):
                raise DomainError(f"target {g!r} outside [0, 1]")
            if not (0.0 <= eta <= 1.0):
                raise DomainError(f"step {eta!r} outside [0, 1]")


class AppetitionResult(NamedTuple):
    next: SessionSnapshot
    n_magnitude: float
    guaranteed_drop: float


def appetition_step(
    snap: SessionSnapshot, cmd: AppetitionCommand, cfg: KernelConfig | None = None
) -> AppetitionResult:
    """Move every x toward its target by the convex rule x' = (1-eta) x + eta g.

    Redundancy is carried forward untouched.
    """
    cfg = cfg or KernelConfig()
    if len(cmd.targets) != snap.arity:
        raise DomainError("command arity does not match snapshot")
    new_channels, magnitude, drop = [], [], []
    for ch, a, g, eta in zip(snap.channels, snap.alphas, cmd.targets, cmd.steps):
        x_new = (1.0 - eta) * ch.x + eta * g
        x_new = min(1.0, max(0.0, x_new))
        new_channels.append(ChannelState(x_new, ch.R))
        magnitude.append(a * eta * abs(g - ch.x))
        drop.append(a * eta * max(0.0, phi(ch.x, cfg.epsilon) - phi(g, cfg.epsilon)))
    nxt = SessionSnapshot(
        t=snap.t + 1, channels=tuple(new_channels), weights=snap.weights, metadata=snap.metadata
    )
    return AppetitionResult(nxt, math.fsum(magnitude), math.fsum(drop))


@dataclass(frozen=True)
class TrajectoryMetrics:
    cumulative_cost: tuple[float, ...]
    time_entropy: tuple[float, ...]
    mass: tuple[float, ...]
    weighted_mean_x: tuple[float | None, ...]
    jensen_gap: tuple[float, ...]
    horizon: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "horizon": self.horizon,
            "cumulative_cost": list(self.cumulative_cost),
            "time_entropy": list(self.time_entropy),
            "mass": list(self.mass),
            "weighted_mean_x": list(self.weighted_mean_x),
            "jensen_gap": list(self.jensen_gap),
        }


def trajectory_metrics(
    stream: Sequence[SessionSnapshot], cfg: KernelConfig | None = None
) -> TrajectoryMetrics:
    cfg = cfg or KernelConfig()
    m = check_arity(stream)
    costs = [score_session(s, cfg).contributions for s in stream]
    C, H, A, xbar, gap = [], [], [], [], []
    for i in range(m):
        c_col = [c[i] for c in costs]
        a_col = [s.alphas[i] for s in stream]
        Ci = math.fsum(c_col)
        Ai = math.fsum(a_col)
        C.append(Ci)
        A.append(Ai)
        H.append(entropy_bits([c / Ci for c in c_col]) if Ci > 0 else 0.0)
        if Ai > 0:
            mean = math.fsum(a * s.channels[i].x for a, s in zip(a_col, stream)) / Ai
            mean = min(1.0, max(0.0, mean))
            xbar.append(mean)
            gap.append(Ci - Ai * phi(mean, cfg.epsilon))
        else:
            xbar.append(None)
            gap.append(0.0)
    return TrajectoryMetrics(tuple(C), tuple(H), tuple(A), tuple(xbar), tuple(gap), len(stream))


def trajectory_distance(
    stream: Sequence[SessionSnapshot], i: int, j: int, cfg: KernelConfig | None = None
) -> float:
    cfg = cfg or KernelConfig()
    m = check_arity(stream)
    if not (0 <= i < m and 0 <= j < m):
        raise DomainError(f"channel indices ({i}, {j}) out of range for {m} channels")
    total = []
    for s in stream:
        c = score_session(s, cfg).contributions
        total.append(abs(c[i] - c[j]))
    return math.fsum(total)


def internality_replay_audit(
    world_a: Sequence[SessionSnapshot],
    world_b: Sequence[SessionSnapshot],
    shared: Sequence[int],
    cfg: KernelConfig | None = None,
) -> AuditReport:
    """Replay two worlds and check that shared channels are untouched by the rest."""
    cfg = cfg or KernelConfig()
    report = AuditReport("internality")
    if len(world_a) != len(world_b):
        report.add(AuditFinding("precondition/horizon", "internality", False,
                                detail=f"horizons differ: {len(world_a)} vs {len(world_b)}"))
        return report
    m = check_arity(world_a)
    if check_arity(world_b) != m:
        report.add(AuditFinding("precondition/arity", "internality", False,
                                detail="worlds have different channel counts"))
        return report
    shared = sorted(set(shared))
    if any(not (0 <= i < m) for i in shared):
        raise DomainError("shared channel index out of range")
    outside = [i for i in range(m) if i not in shared]

    for sa, sb in zip(world_a, world_b):
        for i in shared:
            if (sa.channels[i], sa.weights[i]) != (sb.channels[i], sb.weights[i]):
                report.add(AuditFinding(
                    f"t{sa.t:06d}/precondition/{i:04d}", "internality", False,
                    detail="histories differ on a shared channel",
                ))
        ba, bb = score_session(sa, cfg), score_session(sb, cfg)
        worst = max((abs(ba.contributions[i] - bb.contributions[i]) for i in shared), default=0.0)
        report.add(AuditFinding(f"t{sa.t:06d}/shared", "internality", worst == 0.0, worst))
        lhs = ba.total - bb.total
        rhs = math.fsum(ba.contributions[i] - bb.contributions[i] for i in outside)
        scale = max(1.0, abs(ba.total), abs(bb.total))
        gap = abs(lhs - rhs)
        report.add(AuditFinding(f"t{sa.t:06d}/separability", "internality",
                                gap <= 1e-12 * scale, gap))
    return report.sorted()
