"""Perception diagnostics: dizziness, memory traces, sequentiality, reason and truth floors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Iterable, NamedTuple, Sequence

from .kernel import (
    DEFAULT_EPSILON,
    DomainError,
    KernelConfig,
    ScoreBreakdown,
    SessionSnapshot,
    phi,
    score_session,
)

DEFAULT_SMOOTHING = 1e-6


class FloorViolation(DomainError):
    pass


@dataclass(frozen=True)
class DizzinessVerdict:
    tau_dizzy: bool
    delta_dizzy: bool
    min_active_bound: float
    ap_peak: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "tau_dizzy": self.tau_dizzy,
            "delta_dizzy": self.delta_dizzy,
            "min_active_bound": self.min_active_bound,
            "ap_peak": self.ap_peak,
        }


def positive_rises(prev: ScoreBreakdown, cur: ScoreBreakdown) -> tuple[float, ...]:
    """One-step penalty rises [phi(x_t) - phi(x_{t-1})]_+ per channel."""
    if len(prev.penalties) != len(cur.penalties):
        raise DomainError("breakdowns have different channel counts")
    return tuple(max(0.0, b - a) for a, b in zip(prev.penalties, cur.penalties))


def dizziness_scan(
    breakdown: ScoreBreakdown,
    prev_breakdown: ScoreBreakdown | None,
    tau: float,
    delta: float,
) -> DizzinessVerdict:
    if not (tau > 0 and delta > 0):
        raise DomainError("tau and delta must be positive")
    total = breakdown.total
    peak_c = max(breakdown.contributions, default=0.0)
    tau_dizzy = total > 0.0 and peak_c < tau
    ap = max(positive_rises(prev_breakdown, breakdown), default=0.0) if prev_breakdown else 0.0
    delta_dizzy = prev_breakdown is not None and total > 0.0 and ap < delta
    return DizzinessVerdict(
        tau_dizzy=tau_dizzy,
        delta_dizzy=delta_dizzy,
        min_active_bound=total / tau if tau_dizzy else 0.0,
        ap_peak=ap,
    )


@dataclass(frozen=True)
class MemoryTrace:
    """Exponentially forgotten record of past penalty rises, one value per channel."""

    lam: float
    values: tuple[float, ...]
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if not (0.0 < self.lam < 1.0):
            raise DomainError(f"forgetting factor must lie in (0, 1), got {self.lam!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def empty(cls, n_channels: int, lam: float, epsilon: float = DEFAULT_EPSILON) -> MemoryTrace:
        return cls(lam, (0.0,) * n_channels, epsilon)

    @property
    def cap(self) -> float:
        return KernelConfig(self.epsilon).phi_zero / (1.0 - self.lam)

    @property
    def mass(self) -> float:
        return math.fsum(self.values)

    @property
    def prior(self) -> tuple[float, ...]:
        """Sequential prior q; all zeros while the trace is empty."""
        total = self.mass
        if total <= 0.0:
            return (0.0,) * len(self.values)
        return tuple(v / total for v in self.values)


def memory_trace_step(trace: MemoryTrace, delta_phi_plus: Sequence[float]) -> MemoryTrace:
    if len(delta_phi_plus) != len(trace.values):
        raise DomainError("rise vector length does not match trace")
    top = KernelConfig(trace.epsilon).phi_zero
    for d in delta_phi_plus:
        if not (0.0 <= d <= top):
            raise DomainError(f"penalty rise {d!r} outside [0, phi(0)]")
    cap = trace.cap
    # the recursion is bounded by cap in exact arithmetic; clamp rounding overshoot
    new = tuple(min(cap, d + trace.lam * m) for d, m in zip(delta_phi_plus, trace.values))
    return MemoryTrace(trace.lam, new, trace.epsilon)


def smooth(dist: Sequence[float], eta: float) -> tuple[float, ...]:
    """Mix a distribution with the uniform one: (1-eta) q + eta/m."""
    n = len(dist)
    if n == 0:
        return ()
    return tuple((1.0 - eta) * q + eta / n for q in dist)


def kl_bits(p: Sequence[float], q: Sequence[float]) -> float:
    if len(p) != len(q):
        raise DomainError("distributions have different lengths")
    terms = []
    for a, b in zip(p, q):
        if a <= 0.0:
            continue
        if b <= 0.0:
            return math.inf
        terms.append(a * math.log2(a / b))
    return max(0.0, math.fsum(terms))


class Sequentiality(NamedTuple):
    consec: float
    kl: float
    expectation_mass: float
    bound_lhs: float


def sequentiality(
    breakdown: ScoreBreakdown,
    trace: MemoryTrace,
    tau: float,
    eta_smoothing: float = DEFAULT_SMOOTHING,
) -> Sequentiality:
    if len(trace.values) != len(breakdown.shares):
        raise DomainError("trace and breakdown have different channel counts")
    S, M = breakdown.total, trace.mass
    if S <= 0.0 or M <= 0.0:
        return Sequentiality(0.0, 0.0, 0.0, 0.0)
    p, q = breakdown.shares, trace.prior
    consec = math.fsum(qi * pi for qi, pi in zip(q, p) if qi > 0.0)
    kl = kl_bits(p, smooth(q, eta_smoothing))
    B = math.fsum(c for c, m in zip(breakdown.contributions, trace.values) if m >= tau)
    # B > 0 forces M >= tau, so tau / M only overflows when the bound is zero anyway
    bound = (tau / M) * (B / S) if B > 0.0 else 0.0
    return Sequentiality(min(1.0, consec), kl, B, bound)


@dataclass(frozen=True)
class RationalPrior:
    r: tuple[float, ...]
    eta_smoothing: float = DEFAULT_SMOOTHING

    def __post_init__(self) -> None:
        object.__setattr__(self, "r", tuple(float(v) for v in self.r))
        if any(v < 0 for v in self.r) or abs(math.fsum(self.r) - 1.0) > 1e-9:
            raise DomainError("rational prior must be a probability vector")
        if not (0.0 < self.eta_smoothing <= 1.0):
            raise DomainError("smoothing must lie in (0, 1]")

    @property
    def smoothed(self) -> tuple[float, ...]:
        return smooth(self.r, self.eta_smoothing)


def reason_score(breakdown: ScoreBreakdown, trace: MemoryTrace, prior: RationalPrior) -> float:
    """sum_i p_i log2(r_i / q_i) with both priors smoothed; positive favours law over habit."""
    p = breakdown.shares
    if len(p) != len(prior.r) or len(p) != len(trace.values):
        raise DomainError("prior, trace and breakdown must have equal channel counts")
    r_hat = prior.smoothed
    q_hat = smooth(trace.prior, prior.eta_smoothing) if trace.mass > 0 else smooth(
        (1.0 / len(p),) * len(p), prior.eta_smoothing
    )
    return math.fsum(pi * math.log2(ri / qi) for pi, ri, qi in zip(p, r_hat, q_hat) if pi > 0)


class TruthFloorCaps(NamedTuple):
    pointwise_cap: float
    alpha_mass_cap: float
    p_mass_cap: float | None
    actual: float
    p_weighted_mean: float


def truth_floor_caps(
    snap: SessionSnapshot,
    rational_set: Iterable[int],
    beta: float,
    cfg: KernelConfig | None = None,
) -> TruthFloorCaps:
    cfg = cfg or KernelConfig()
    if not (0.0 <= beta <= 1.0):
        raise DomainError(f"truth floor must lie in [0, 1], got {beta!r}")
    S_set = sorted(set(rational_set))
    for i in S_set:
        if not (0 <= i < snap.arity):
            raise DomainError(f"rational channel {i} out of range")
        if snap.channels[i].x < beta:
            raise FloorViolation(
                f"channel {i} has x={snap.channels[i].x!r} below floor {beta!r}"
            )
    bd = score_session(snap, cfg)
    alphas = snap.alphas
    phi_beta = phi(beta, cfg.epsilon)
    a_S = math.fsum(alphas[i] for i in S_set)
    free = math.fsum(bd.contributions[i] for i in range(snap.arity) if i not in S_set)
    pointwise = a_S * phi_beta + free
    A = math.fsum(alphas)
    if A > 0:
        rho_a = a_S / A
        alpha_cap = A * (rho_a * phi_beta + (1.0 - rho_a) * cfg.phi_zero)
    else:
        alpha_cap = 0.0
    rho_p = math.fsum(bd.shares[i] for i in S_set)
    p_cap = phi_beta * a_S / rho_p if rho_p > 0 else None
    p_mean = math.fsum(p * f for p, f in zip(bd.shares, bd.penalties))
    return TruthFloorCaps(pointwise, alpha_cap, p_cap, bd.total, p_mean)


def _tv(a: Sequence[float], b: Sequence[float]) -> float:
    return 0.5 * math.fsum(abs(u - v) for u, v in zip(a, b))


def law_fixity(prior: RationalPrior, inferred_laws: Sequence[Sequence[float]]) -> float:
    """One minus the mean total-variation distance of inferred laws from the prior.

    Laws are compared from the second step on; a single-step horizon is
    defined as perfectly fixed.
    """
    for law in inferred_laws:
        if len(law) != len(prior.r):
            raise DomainError("inferred law dimension does not match prior")
    T = len(inferred_laws)
    if T <= 1:
        return 1.0
    drift = math.fsum(_tv(prior.r, law) for law in inferred_laws[1:]) / (T - 1)
    return min(1.0, max(0.0, 1.0 - drift))


LawInference = Callable[[ScoreBreakdown], Sequence[float]]


def shares_as_law(breakdown: ScoreBreakdown) -> Sequence[float]:
    return breakdown.shares


def law_fixity_from_breakdowns(
    prior: RationalPrior,
    breakdowns: Sequence[ScoreBreakdown],
    infer: LawInference = shares_as_law,
) -> float:
    return law_fixity(prior, [infer(b) for b in breakdowns])
