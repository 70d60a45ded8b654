"""Seeded synthetic session streams."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .dynamics import AppetitionCommand, appetition_step
from .formats import SessionFile, SessionHeader
from .kernel import DEFAULT_EPSILON, ChannelState, DomainError, KernelConfig, SessionSnapshot

SCENARIOS = ("random", "appetition", "degradation", "latent", "diffuse", "clones")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str = "random"
    channels: int = 4
    steps: int = 12
    epsilon: float = DEFAULT_EPSILON
    params: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "channels": self.channels,
            "steps": self.steps,
            "params": dict(self.params),
        }


def _weights(rng: random.Random, n: int) -> list[float]:
    raw = [rng.uniform(0.5, 1.5) for _ in range(n)]
    total = math.fsum(raw)
    w = [r / total for r in raw]
    w[-1] = 1.0 - math.fsum(w[:-1])
    return w


def _clip(v: float) -> float:
    return min(1.0, max(0.0, v))


def _random_walk(rng: random.Random, spec: ScenarioSpec) -> tuple[list[float], list[list[tuple[float, float]]]]:
    n, T = spec.channels, spec.steps
    L_x = float(spec.params.get("L_x", 0.05))
    L_R = float(spec.params.get("L_R", 0.02))
    w = _weights(rng, n)
    state = [(rng.uniform(0.05, 0.95), rng.uniform(0.0, 0.3)) for _ in range(n)]
    rows = [list(state)]
    for _ in range(T - 1):
        state = [
            (_clip(x + rng.uniform(-L_x, L_x)), _clip(r + rng.uniform(-L_R, L_R)))
            for x, r in state
        ]
        rows.append(list(state))
    return w, rows


def _appetition(rng: random.Random, spec: ScenarioSpec, target: float | None) -> tuple[list[float], list[list[tuple[float, float]]]]:
    n, T = spec.channels, spec.steps
    eta = float(spec.params.get("eta", 0.1))
    g = float(spec.params.get("target", 1.0)) if target is None else target
    w = _weights(rng, n)
    x0 = spec.params.get("x0")
    xs = [float(x0)] * n if x0 is not None else [rng.uniform(0.05, 0.95) for _ in range(n)]
    Rs = [rng.uniform(0.0, 0.3) for _ in range(n)]
    snap = SessionSnapshot(0, tuple(ChannelState(x, r) for x, r in zip(xs, Rs)), tuple(w))
    cmd = AppetitionCommand((g,) * n, (eta,) * n)
    cfg = KernelConfig(spec.epsilon)
    rows = [list(zip(snap.x, snap.R))]
    for _ in range(T - 1):
        snap = appetition_step(snap, cmd, cfg).next
        rows.append(list(zip(snap.x, snap.R)))
    return w, rows


VIEW_MAPS: dict[str, Callable[[float], float]] = {
    "identity": lambda z: z,
    "square": lambda z: z * z,
    "sqrt": math.sqrt,
    "complement": lambda z: 1.0 - z,
}


def _view_map(name: str) -> Callable[[float], float]:
    if name.startswith("affine:"):
        a, b = (float(v) for v in name.split(":")[1:3])
        return lambda z: _clip(a * z + b)
    try:
        return VIEW_MAPS[name]
    except KeyError:
        raise DomainError(f"unknown view map {name!r}") from None


def _latent(rng: random.Random, spec: ScenarioSpec) -> tuple[list[float], list[list[tuple[float, float]]]]:
    """Soul channels 0..k-1 and body channels k..2k-1 read the same per-pair drivers."""
    if spec.channels % 2:
        raise DomainError("the latent scenario needs an even channel count")
    k = spec.channels // 2
    F_S = _view_map(str(spec.params.get("soul_map", "identity")))
    F_B = _view_map(str(spec.params.get("body_map", "identity")))
    step = float(spec.params.get("z_step", 0.05))
    w = _weights(rng, spec.channels)
    z = [rng.uniform(0.1, 0.9) for _ in range(k)]
    rows = []
    for _ in range(spec.steps):
        rows.append([(_clip(F_S(v)), 0.0) for v in z] + [(_clip(F_B(v)), 0.0) for v in z])
        z = [_clip(v + rng.uniform(-step, step)) for v in z]
    return w, rows


def _diffuse(rng: random.Random, spec: ScenarioSpec) -> tuple[list[float], list[list[tuple[float, float]]]]:
    n = spec.channels
    w = [1.0 / n] * n
    lo = float(spec.params.get("x_min", 0.97))
    rows = [[(rng.uniform(lo, 0.999), 0.0) for _ in range(n)] for _ in range(spec.steps)]
    return w, rows


def _clones(rng: random.Random, spec: ScenarioSpec) -> tuple[list[float], list[list[tuple[float, float]]], list[list[int]]]:
    """Distinct base channels, some repeated verbatim; returns the planted groups too."""
    copies = [int(c) for c in spec.params.get("copies", [2, 1, 3, 1])]
    n = sum(copies)
    base_w = _weights(rng, len(copies))
    layout, groups = [], []
    for b, c in enumerate(copies):
        idx = list(range(len(layout), len(layout) + c))
        layout.extend([b] * c)
        if c > 1:
            groups.append(idx)
    order = list(range(n))
    if spec.params.get("shuffle", True):
        rng.shuffle(order)
    pos = {old: new for new, old in enumerate(order)}
    layout = [layout[o] for o in order]
    groups = sorted(sorted(pos[i] for i in g) for g in groups)
    # clones must carry bit-identical weights, so no last-entry renormalization
    w = [base_w[b] / copies[b] for b in layout]
    state = [(rng.uniform(0.05, 0.95), rng.uniform(0.0, 0.3)) for _ in copies]
    rows = []
    for _ in range(spec.steps):
        rows.append([state[b] for b in layout])
        state = [(_clip(x + rng.uniform(-0.1, 0.1)), r) for x, r in state]
    return w, rows, groups


def generate_synthetic(scenario: ScenarioSpec, seed: int) -> SessionFile:
    """Build a session stream; identical (scenario, seed) pairs give identical files."""
    if scenario.name not in SCENARIOS:
        raise DomainError(f"unknown scenario {scenario.name!r}; choose from {SCENARIOS}")
    if scenario.channels < 1 or scenario.steps < 1:
        raise DomainError("channels and steps must be positive")
    rng = random.Random(seed)
    extra: dict[str, Any] = {}
    if scenario.name == "random":
        w, rows = _random_walk(rng, scenario)
    elif scenario.name == "appetition":
        w, rows = _appetition(rng, scenario, None)
    elif scenario.name == "degradation":
        w, rows = _appetition(rng, scenario, 0.0)
    elif scenario.name == "latent":
        w, rows = _latent(rng, scenario)
        k = scenario.channels // 2
        extra["pairing"] = {str(k + j): j for j in range(k)}
    elif scenario.name == "diffuse":
        w, rows = _diffuse(rng, scenario)
    else:
        w, rows, groups = _clones(rng, scenario)
        extra["planted_groups"] = groups
    n = len(w)
    header = SessionHeader(
        channel_ids=tuple(f"ch{i}" for i in range(n)),
        weights=tuple(w),
        epsilon=scenario.epsilon,
        scenario={**scenario.to_dict(), "channels": n, "seed": seed, **extra},
    )
    records = [
        SessionSnapshot(t, tuple(ChannelState(x, r) for x, r in row), header.weights)
        for t, row in enumerate(rows)
    ]
    return SessionFile(header, records)
