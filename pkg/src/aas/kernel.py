"""Surprisal kernel, session scoring and trajectory summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

DEFAULT_EPSILON = 0.01
WEIGHT_SUM_TOL = 1e-12


class DomainError(ValueError):
    """Raised when an input lies outside the domain of an operation."""


@dataclass(frozen=True)
class KernelConfig:
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if not (self.epsilon > 0) or math.isinf(self.epsilon):
            raise DomainError(f"epsilon must be a finite positive real, got {self.epsilon!r}")

    @property
    def phi_zero(self) -> float:
        """Kernel cap log2((1+eps)/eps), the penalty at zero recall."""
        return math.log2((1.0 + self.epsilon) / self.epsilon)


def phi(x: float, epsilon: float = DEFAULT_EPSILON) -> float:
    """Unchecked kernel log2((1+eps)/(x+eps)); callers validate ranges."""
    return math.log2((1.0 + epsilon) / (x + epsilon))


def eval_kernel(x: float, cfg: KernelConfig | None = None) -> float:
    cfg = cfg or KernelConfig()
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"recall score must lie in [0, 1], got {x!r}")
    if x == 1.0:
        return 0.0
    return phi(x, cfg.epsilon)


def kernel_slope(x: float, epsilon: float = DEFAULT_EPSILON) -> float:
    return -1.0 / ((x + epsilon) * math.log(2.0))


def entropy_bits(probs: Sequence[float]) -> float:
    """Shannon entropy in bits; zero-probability terms contribute exactly 0."""
    h = -math.fsum(p * math.log2(p) for p in probs if p > 0.0)
    return h if h > 0.0 else 0.0


@dataclass(frozen=True)
class ChannelState:
    x: float
    R: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.x <= 1.0):
            raise DomainError(f"x must lie in [0, 1], got {self.x!r}")
        if not (0.0 <= self.R <= 1.0):
            raise DomainError(f"R must lie in [0, 1], got {self.R!r}")


@dataclass(frozen=True)
class SessionSnapshot:
    """One session's channel states.

    ``metadata`` is carried along for embeddings and provenance and is never
    read by any scoring routine.
    """

    t: int
    channels: tuple[ChannelState, ...]
    weights: tuple[float, ...]
    metadata: tuple[Any, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        meta = tuple(self.metadata) if self.metadata else (None,) * len(self.channels)
        object.__setattr__(self, "metadata", meta)
        if self.t < 0:
            raise DomainError(f"session index must be nonnegative, got {self.t}")
        if not (len(self.channels) == len(self.weights) == len(self.metadata)):
            raise DomainError(
                "channels, weights and metadata must have equal length "
                f"({len(self.channels)}, {len(self.weights)}, {len(self.metadata)})"
            )
        if any(not (w >= 0.0) for w in self.weights):
            raise DomainError("weights must be nonnegative")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise DomainError(f"weight sum must be 1, got {total!r}")

    @classmethod
    def from_lists(
        cls,
        x: Sequence[float],
        R: Sequence[float] | None = None,
        weights: Sequence[float] | None = None,
        t: int = 0,
        metadata: Sequence[Any] | None = None,
    ) -> SessionSnapshot:
        m = len(x)
        R = R if R is not None else [0.0] * m
        weights = weights if weights is not None else [1.0 / m] * m
        return cls(
            t=t,
            channels=tuple(ChannelState(float(a), float(b)) for a, b in zip(x, R)),
            weights=tuple(weights),
            metadata=tuple(metadata) if metadata is not None else (),
        )

    @property
    def arity(self) -> int:
        return len(self.channels)

    @property
    def x(self) -> tuple[float, ...]:
        return tuple(c.x for c in self.channels)

    @property
    def R(self) -> tuple[float, ...]:
        return tuple(c.R for c in self.channels)

    @property
    def alphas(self) -> tuple[float, ...]:
        return tuple(w * (1.0 - c.R) for w, c in zip(self.weights, self.channels))


KappaEstimator = Callable[[Sequence[float], float, int], float]


def normalized_entropy_kappa(shares: Sequence[float], entropy: float, active: int) -> float:
    """Spread as entropy over its maximum log2(m); 0 with fewer than two active channels."""
    if active < 2:
        return 0.0
    return min(1.0, max(0.0, entropy / math.log2(active)))


@dataclass(frozen=True)
class ScoreBreakdown:
    contributions: tuple[float, ...]
    total: float
    shares: tuple[float, ...]
    peak_share: float
    contrib_entropy: float
    kappa: float
    apper_level: float
    active_count: int
    epsilon: float
    penalties: tuple[float, ...] = ()
    alphas: tuple[float, ...] = ()
    t: int = 0

    @property
    def mass(self) -> float:
        return math.fsum(self.alphas)

    def to_dict(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "epsilon": self.epsilon,
            "total": self.total,
            "contributions": list(self.contributions),
            "shares": list(self.shares),
            "peak_share": self.peak_share,
            "contrib_entropy": self.contrib_entropy,
            "kappa": self.kappa,
            "apper_level": self.apper_level,
            "active_count": self.active_count,
        }


def breakdown_from_arrays(
    alphas: Sequence[float],
    xs: Sequence[float],
    epsilon: float,
    t: int = 0,
    kappa: KappaEstimator = normalized_entropy_kappa,
) -> ScoreBreakdown:
    """Score raw (alpha, x) arrays without the unit-weight-sum requirement."""
    penalties = tuple(0.0 if x == 1.0 else phi(x, epsilon) for x in xs)
    contributions = tuple(a * p for a, p in zip(alphas, penalties))
    total = math.fsum(contributions)
    active = sum(1 for c in contributions if c > 0.0)
    if total > 0.0:
        shares = tuple(c / total for c in contributions)
        peak = max(shares)
        h = entropy_bits(shares)
        k = kappa(shares, h, active)
    else:
        shares = (0.0,) * len(contributions)
        peak = h = k = 0.0
    return ScoreBreakdown(
        contributions=contributions,
        total=total,
        shares=shares,
        peak_share=peak,
        contrib_entropy=h,
        kappa=k,
        apper_level=(1.0 - k) * peak,
        active_count=active,
        epsilon=epsilon,
        penalties=penalties,
        alphas=tuple(alphas),
        t=t,
    )


def score_session(
    snap: SessionSnapshot,
    cfg: KernelConfig | None = None,
    kappa: KappaEstimator = normalized_entropy_kappa,
) -> ScoreBreakdown:
    cfg = cfg or KernelConfig()
    return breakdown_from_arrays(snap.alphas, snap.x, cfg.epsilon, t=snap.t, kappa=kappa)


def check_arity(stream: Sequence[SessionSnapshot]) -> int:
    if not stream:
        raise DomainError("stream must contain at least one snapshot")
    m = stream[0].arity
    for snap in stream:
        if snap.arity != m:
            raise DomainError(f"arity mismatch at t={snap.t}: expected {m}, got {snap.arity}")
    return m


@dataclass(frozen=True)
class TrajectorySummary:
    mass: tuple[float, ...]
    weighted_mean_x: tuple[float | None, ...]
    time_entropy: tuple[float, ...]
    epsilon: float = DEFAULT_EPSILON
    steps: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "steps": self.steps,
            "mass": list(self.mass),
            "weighted_mean_x": list(self.weighted_mean_x),
            "time_entropy": list(self.time_entropy),
        }


def trajectory_summary(
    stream: Sequence[SessionSnapshot], cfg: KernelConfig | None = None
) -> TrajectorySummary:
    cfg = cfg or KernelConfig()
    m = check_arity(stream)
    alphas = [s.alphas for s in stream]
    masses, means, entropies = [], [], []
    for i in range(m):
        col = [a[i] for a in alphas]
        A = math.fsum(col)
        masses.append(A)
        if A > 0.0:
            means.append(math.fsum(a * s.channels[i].x for a, s in zip(col, stream)) / A)
            entropies.append(entropy_bits([a / A for a in col]))
        else:
            means.append(None)
            entropies.append(0.0)
    return TrajectorySummary(
        mass=tuple(masses),
        weighted_mean_x=tuple(means),
        time_entropy=tuple(entropies),
        epsilon=cfg.epsilon,
        steps=len(stream),
    )
