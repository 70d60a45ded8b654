"""Additive coherence penalties: contradiction, sufficient reason, harmony, alignment.

Each penalty leaves the base score untouched and reports an adjusted total
alongside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

from .kernel import DomainError, KernelConfig, SessionSnapshot, phi, score_session

BUDGET_TOL = 1e-12


@dataclass(frozen=True)
class ContradictionConfig:
    pairs: tuple[tuple[int, int], ...]
    gammas: tuple[float, ...]
    zeta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", tuple((int(i), int(j)) for i, j in self.pairs))
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if len(self.pairs) != len(self.gammas):
            raise DomainError("one gamma per contradictory pair is required")
        if any(i == j for i, j in self.pairs):
            raise DomainError("contradictory pairs need distinct endpoints")
        if any(g < 0 for g in self.gammas):
            raise DomainError("pair weights must be nonnegative")
        if not (0.0 <= self.zeta <= 1.0):
            raise DomainError("margin zeta must lie in [0, 1]")

    @property
    def gamma_total(self) -> float:
        return math.fsum(self.gammas)


class PenaltyResult(NamedTuple):
    penalty: float
    adjusted_total: float


def pc_penalty(
    snap: SessionSnapshot, cfg: ContradictionConfig, k: KernelConfig | None = None
) -> PenaltyResult:
    k = k or KernelConfig()
    terms = []
    for (i, j), gamma in zip(cfg.pairs, cfg.gammas):
        if not (0 <= i < snap.arity and 0 <= j < snap.arity):
            raise DomainError(f"pair ({i}, {j}) out of range")
        m = min(snap.channels[i].x, snap.channels[j].x)
        m_zeta = max(0.0, m - cfg.zeta)
        terms.append(0.0 if m_zeta == 0.0 else gamma * phi(1.0 - m_zeta, k.epsilon))
    penalty = math.fsum(terms)
    return PenaltyResult(penalty, score_session(snap, k).total + penalty)


@dataclass(frozen=True)
class CausalNetwork:
    """Row i of ``a`` holds the influence weights j -> i; ``a0`` is self-inertia."""

    a: tuple[tuple[float, ...], ...]
    a0: tuple[float, ...]
    delta: float = 0.01

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", tuple(tuple(float(v) for v in row) for row in self.a))
        object.__setattr__(self, "a0", tuple(float(v) for v in self.a0))
        n = len(self.a0)
        if len(self.a) != n or any(len(row) != n for row in self.a):
            raise DomainError("influence matrix must be square and match a0")
        if not self.delta > 0:
            raise DomainError("stability constant delta must be positive")
        for i, (row, s) in enumerate(zip(self.a, self.a0)):
            if s < 0 or any(v < 0 for v in row):
                raise DomainError("causal weights must be nonnegative")
            if math.fsum(row) + s > 1.0 + BUDGET_TOL:
                raise DomainError(f"causal budget exceeded on row {i}")


class PSRResult(NamedTuple):
    penalty: float
    sufficiency: tuple[float, ...]
    adjusted_total: float


def causal_mass(
    snap: SessionSnapshot, prev_x: Sequence[float], net: CausalNetwork
) -> tuple[float, ...]:
    x = snap.x
    return tuple(
        s * px + math.fsum(a * xj for a, xj in zip(row, x))
        for row, s, px in zip(net.a, net.a0, prev_x)
    )


def psr_penalty(
    snap: SessionSnapshot,
    prev_x: Sequence[float],
    net: CausalNetwork,
    k: KernelConfig | None = None,
) -> PSRResult:
    k = k or KernelConfig()
    if len(prev_x) != snap.arity or len(net.a0) != snap.arity:
        raise DomainError("network, previous state and snapshot must share arity")
    r = causal_mass(snap, prev_x, net)
    suff, terms = [], []
    for ri, xi, ai in zip(r, snap.x, snap.alphas):
        s = 1.0 if ri >= xi else min(1.0, (ri + net.delta) / (xi + net.delta))
        suff.append(s)
        terms.append(0.0 if s == 1.0 else ai * phi(s, k.epsilon))
    penalty = math.fsum(terms)
    return PSRResult(penalty, tuple(suff), score_session(snap, k).total + penalty)


@dataclass(frozen=True)
class ViewPairing:
    """Maps each body-view channel to the soul-view channel it should agree with."""

    soul_channels: tuple[int, ...]
    body_channels: tuple[int, ...]
    pairing: Mapping[int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "soul_channels", tuple(self.soul_channels))
        object.__setattr__(self, "body_channels", tuple(self.body_channels))
        object.__setattr__(self, "pairing", {int(j): int(i) for j, i in self.pairing.items()})
        souls = set(self.soul_channels)
        for j in self.body_channels:
            if j not in self.pairing:
                raise DomainError(f"body channel {j} has no paired soul channel")
            if self.pairing[j] not in souls:
                raise DomainError(f"body channel {j} pairs outside the soul view")


class HarmonyResult(NamedTuple):
    harm: float
    total_with_harmony: float


def _partial_total(snap: SessionSnapshot, idx: Sequence[int], k: KernelConfig) -> float:
    alphas = snap.alphas
    return math.fsum(alphas[i] * phi(snap.channels[i].x, k.epsilon) for i in idx)


def harmony_penalty(
    soul_snap: SessionSnapshot,
    body_snap: SessionSnapshot,
    pairing: ViewPairing,
    k: KernelConfig | None = None,
) -> HarmonyResult:
    k = k or KernelConfig()
    for i in pairing.soul_channels:
        if not (0 <= i < soul_snap.arity):
            raise DomainError(f"soul channel {i} out of range")
    for j in pairing.body_channels:
        if not (0 <= j < body_snap.arity):
            raise DomainError(f"body channel {j} out of range")
    sa, ba = soul_snap.alphas, body_snap.alphas
    terms = []
    for j in pairing.body_channels:
        i = pairing.pairing[j]
        mismatch = abs(soul_snap.channels[i].x - body_snap.channels[j].x)
        beta = min(sa[i], ba[j])
        terms.append(0.0 if mismatch == 0.0 else beta * phi(1.0 - mismatch, k.epsilon))
    harm = math.fsum(terms)
    base = _partial_total(soul_snap, pairing.soul_channels, k) + _partial_total(
        body_snap, pairing.body_channels, k
    )
    return HarmonyResult(harm, base + harm)


class AlignmentResult(NamedTuple):
    harm: float
    total_with_alignment: float
    alignments: tuple[float, ...]


def _sign(v: float, band: float) -> int:
    if abs(v) <= band:
        return 0
    return 1 if v > 0 else -1


def alignment_penalty(
    snap_t: SessionSnapshot,
    snap_t1: SessionSnapshot,
    targets: Sequence[float],
    k: KernelConfig | None = None,
    dead_band: float = 0.0,
) -> AlignmentResult:
    """Penalize steps whose realized direction disagrees with the goal direction.

    With ``dead_band`` 0 the zero direction requires exact equality.
    """
    k = k or KernelConfig()
    if snap_t.arity != snap_t1.arity or len(targets) != snap_t.arity:
        raise DomainError("snapshots and targets must share arity")
    if any(not (0.0 < y <= 1.0) for y in targets):
        raise DomainError("targets must lie in (0, 1]")
    if dead_band < 0:
        raise DomainError("dead band must be nonnegative")
    aligns, terms = [], []
    for y, a0, a1, alpha in zip(targets, snap_t.x, snap_t1.x, snap_t.alphas):
        g = _sign(y - a0, dead_band)
        e = _sign(a1 - a0, dead_band)
        a = 1.0 - 0.5 * abs(g - e)
        aligns.append(a)
        terms.append(0.0 if a == 1.0 else alpha * phi(a, k.epsilon))
    harm = math.fsum(terms)
    return AlignmentResult(harm, score_session(snap_t, k).total + harm, tuple(aligns))
