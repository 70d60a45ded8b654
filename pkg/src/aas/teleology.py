"""Variety/order/perfection indices and windowed net-drift governance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

from .dynamics import AppetitionCommand, appetition_step
from .kernel import (
    ChannelState,
    DomainError,
    KernelConfig,
    ScoreBreakdown,
    SessionSnapshot,
    score_session,
)

GOOD, BAD, NEUTRAL = "G", "K", "neutral"
PROMOTE, ROLLBACK, HOLD = "promote", "rollback", "hold"


@dataclass(frozen=True)
class PerfectionReport:
    variety: float
    order: float
    gamma_exponent: float
    perfection: float
    aas_max: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "variety": self.variety,
            "order": self.order,
            "gamma": self.gamma_exponent,
            "perfection": self.perfection,
            "aas_max": self.aas_max,
        }


def variety_order_perfection(
    breakdown: ScoreBreakdown,
    A_t: float,
    gamma: float = 0.5,
    cfg: KernelConfig | None = None,
) -> PerfectionReport:
    cfg = cfg or KernelConfig(breakdown.epsilon)
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")
    if not A_t > 0:
        raise DomainError(f"active mass must be positive, got {A_t!r}")
    m = breakdown.active_count
    V = min(1.0, breakdown.contrib_entropy / math.log2(m)) if m >= 2 else 0.0
    aas_max = A_t * cfg.phi_zero
    O = min(1.0, max(0.0, 1.0 - breakdown.total / aas_max))
    # 0 ** gamma is 0 for gamma > 0, so an empty variety zeroes perfection
    P = (V ** gamma) * (O ** (1.0 - gamma))
    return PerfectionReport(V, O, gamma, P, aas_max)


def normalized_perfection(total: float, aas_max: float) -> float:
    """1 - AAS/AAS_max, the drift-governance reading of perfection."""
    if aas_max <= 0:
        return 1.0
    return min(1.0, max(0.0, 1.0 - total / aas_max))


@dataclass(frozen=True)
class DriftLedger:
    deltas: tuple[float, ...]
    window: int
    threshold: float
    stride: int
    window_starts: tuple[int, ...]
    window_sums: tuple[float, ...]
    classes: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "window": self.window,
            "threshold": self.threshold,
            "stride": self.stride,
            "deltas": list(self.deltas),
            "window_starts": list(self.window_starts),
            "window_sums": list(self.window_sums),
            "classes": list(self.classes),
        }


def drift_classify(
    scores: Sequence[float], window: int, eta: float, stride: int = 1
) -> DriftLedger:
    if window < 1:
        raise DomainError("window length must be at least 1")
    if not eta > 0:
        raise DomainError("drift threshold must be positive")
    if stride < 1:
        raise DomainError("stride must be at least 1")
    if len(scores) < window + 1:
        raise DomainError(
            f"need at least {window + 1} scores for window {window}, got {len(scores)}"
        )
    deltas = tuple(b - a for a, b in zip(scores, scores[1:]))
    starts, sums, classes = [], [], []
    for k in range(0, len(deltas) - window + 1, stride):
        s = math.fsum(deltas[k : k + window])
        starts.append(k)
        sums.append(s)
        classes.append(GOOD if s <= -eta else BAD if s >= eta else NEUTRAL)
    return DriftLedger(deltas, window, eta, stride, tuple(starts), tuple(sums), tuple(classes))


@dataclass(frozen=True)
class GovernancePolicy:
    consecutive_G_for_promote: int = 3
    consecutive_K_for_rollback: int = 1

    def __post_init__(self) -> None:
        if self.consecutive_G_for_promote < 1 or self.consecutive_K_for_rollback < 1:
            raise DomainError("run lengths must be at least 1")


class GovernanceVerdict(NamedTuple):
    verdict: str
    trigger_windows: tuple[int, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"verdict": self.verdict, "trigger_windows": list(self.trigger_windows)}


def _first_run(classes: Sequence[str], label: str, length: int) -> tuple[int, ...] | None:
    run = 0
    for k, c in enumerate(classes):
        run = run + 1 if c == label else 0
        if run >= length:
            return tuple(range(k - length + 1, k + 1))
    return None


def governance_decide(
    ledger: DriftLedger, policy: GovernancePolicy | None = None
) -> GovernanceVerdict:
    """Promote on a run of G windows, roll back on a run of K windows.

    A qualifying K run anywhere in the ledger wins over any G run. Trigger
    windows are reported as ledger window indices.
    """
    policy = policy or GovernancePolicy()
    bad = _first_run(ledger.classes, BAD, policy.consecutive_K_for_rollback)
    if bad is not None:
        return GovernanceVerdict(ROLLBACK, bad)
    good = _first_run(ledger.classes, GOOD, policy.consecutive_G_for_promote)
    if good is not None:
        return GovernanceVerdict(PROMOTE, good)
    return GovernanceVerdict(HOLD, ())


def drift_decomposition(scores: Sequence[float]) -> tuple[float, float, float]:
    """Return (rises, falls, reconstructed final) with final = first + rises - falls."""
    deltas = [b - a for a, b in zip(scores, scores[1:])]
    rises = math.fsum(max(0.0, d) for d in deltas)
    falls = math.fsum(max(0.0, -d) for d in deltas)
    return rises, falls, scores[0] + rises - falls


# --- asymptotic justice harness ---------------------------------------------


@dataclass(frozen=True)
class JusticeScenario:
    """Single-rule scenario run through appetition.

    ``benevolent`` steers every channel toward ``target``; ``degradation``
    is the same rule with target 0 (x' = (1-eta) x); ``noop`` never moves.
    """

    kind: str = "benevolent"
    x0: tuple[float, ...] = (0.5,)
    weights: tuple[float, ...] = (1.0,)
    R: tuple[float, ...] = (0.0,)
    target: float = 1.0
    eta_step: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in ("benevolent", "degradation", "noop"):
            raise DomainError(f"unknown justice scenario {self.kind!r}")

    def command(self) -> AppetitionCommand:
        n = len(self.x0)
        if self.kind == "noop":
            return AppetitionCommand((0.0,) * n, (0.0,) * n)
        g = self.target if self.kind == "benevolent" else 0.0
        return AppetitionCommand((g,) * n, (self.eta_step,) * n)


class JusticeResult(NamedTuple):
    scores: tuple[float, ...]
    perfection: tuple[float, ...]
    report: dict[str, Any]


def justice_harness(
    scenario: JusticeScenario, steps: int, cfg: KernelConfig | None = None
) -> JusticeResult:
    cfg = cfg or KernelConfig()
    if steps < 1:
        raise DomainError("steps must be positive")
    snap = SessionSnapshot(
        t=0,
        channels=tuple(ChannelState(x, r) for x, r in zip(scenario.x0, scenario.R)),
        weights=scenario.weights,
    )
    cmd = scenario.command()
    aas_max = math.fsum(snap.alphas) * cfg.phi_zero
    scores = [score_session(snap, cfg).total]
    for _ in range(steps):
        snap = appetition_step(snap, cmd, cfg).next
        scores.append(score_session(snap, cfg).total)
    perf = tuple(normalized_perfection(s, aas_max) for s in scores)
    diffs = [b - a for a, b in zip(scores, scores[1:])]
    report: dict[str, Any] = {
        "scenario": scenario.kind,
        "steps": steps,
        "final_score": scores[-1],
        "final_perfection": perf[-1],
        "cap": aas_max,
    }
    if scenario.kind == "benevolent":
        report["monotone"] = all(d <= 0.0 for d in diffs)
        report["boundary_gap"] = scores[-1]
    elif scenario.kind == "degradation":
        report["monotone"] = all(d >= 0.0 for d in diffs)
        report["boundary_gap"] = aas_max - scores[-1]
    else:
        report["monotone"] = all(d == 0.0 for d in diffs)
        report["boundary_gap"] = 0.0
    return JusticeResult(tuple(scores), perf, report)
