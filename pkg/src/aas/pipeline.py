"""Batch evaluation: base scores first, then each enabled clause in a fixed order."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Any, Callable, Sequence

from .coherence import (
    CausalNetwork,
    ContradictionConfig,
    ViewPairing,
    alignment_penalty,
    harmony_penalty,
    pc_penalty,
    psr_penalty,
)
from .dynamics import rate_cap, rate_check, trajectory_metrics
from .formats import REPORT_FORMAT, ClauseConfig, Report, SessionFile, preset_config
from .hierarchy import GroupingView, dominance_scan, level_rollup, tree_from_snapshot, whole_part_check
from .kernel import DomainError, KernelConfig, ScoreBreakdown, SessionSnapshot, score_session, trajectory_summary
from .ontology import AuditPlan, dedup_plan, merge_channels, windowless_audit
from .representation import (
    MemoryTrace,
    RationalPrior,
    dizziness_scan,
    law_fixity_from_breakdowns,
    memory_trace_step,
    positive_rises,
    reason_score,
    sequentiality,
    truth_floor_caps,
)
from .teleology import (
    GovernancePolicy,
    drift_classify,
    drift_decomposition,
    governance_decide,
    variety_order_perfection,
)

# order in which clauses run and appear in the report
CLAUSE_ORDER = (
    "audit",
    "dedup",
    "dynamics",
    "representation",
    "contradiction",
    "psr",
    "harmony",
    "alignment",
    "hierarchy",
    "dominance",
    "whole_part",
    "perfection",
    "drift",
)

BOUND_TOL = 1e-12
PARALLEL_MIN_SESSIONS = 4096


class ClauseError(DomainError):
    def __init__(self, clause: str, message: str):
        self.clause = clause
        super().__init__(f"[{clause}] {message}")


def parallel_enabled() -> bool:
    return os.environ.get("AAS_NO_PARALLEL", "") != "1"


def evaluate_breakdowns(stream: Sequence[SessionSnapshot], cfg: KernelConfig) -> list[ScoreBreakdown]:
    fn = partial(score_session, cfg=cfg)
    if parallel_enabled() and len(stream) >= PARALLEL_MIN_SESSIONS:
        with ProcessPoolExecutor() as pool:
            return list(pool.map(fn, stream, chunksize=512))
    return [fn(s) for s in stream]


class _Ctx:
    def __init__(self, stream, bds, kcfg, config):
        self.stream: list[SessionSnapshot] = stream
        self.bds: list[ScoreBreakdown] = bds
        self.k: KernelConfig = kcfg
        self.config: ClauseConfig = config
        self.failures: list[str] = []

    def fail(self, clause: str, msg: str) -> None:
        self.failures.append(f"{clause}: {msg}")


def _audit(ctx: _Ctx, p: dict[str, Any]) -> dict[str, Any]:
    plan = AuditPlan(
        metadata_trials=int(p.get("metadata_trials", 3)),
        ghost_kinds=tuple(p.get("ghost_kinds", ("zero_weight", "full_redundancy"))),
        ghost_weight=float(p.get("ghost_weight", 0.25)),
        bumps=tuple((int(j), float(d)) for j, d in p.get("bumps", ())),
        seed=ctx.config.seed,
    )
    rep = windowless_audit(ctx.stream, plan, ctx.k)
    failed = [f.to_dict() for f in rep.findings if not f.passed]
    for f in failed:
        ctx.fail("audit", f"probe {f['probe_id']} failed")
    return {
        "passed": rep.passed,
        "probes": len(rep.findings),
        "failed": failed,
        "max_diff": max((f.max_diff for f in rep.findings), default=0.0),
    }


def _dedup(ctx: _Ctx, p: dict[str, Any]) -> dict[str, Any]:
    tol = float(p.get("tolerance", 0.0))
    groups = dedup_plan(ctx.stream, tol, ctx.k)
    merged = merge_channels(ctx.stream, groups)
    worst = 0.0
    for a, b in zip(ctx.bds, merged):
        tb = score_session(b, ctx.k).total
        worst = max(worst, abs(a.total - tb) / max(abs(a.total), 1e-300) if a.total else abs(tb))
    if tol == 0.0 and worst > 1e-9:
        ctx.fail("dedup", f"merged totals drift by {worst!r}")
    return {"tolerance": tol, "groups": [list(g) for g in groups], "max_relative_drift": worst}


def _dynamics(ctx: _Ctx, p: dict[str, Any]) -> dict[str, Any]:
    cap = rate_cap(ctx.k, float(p.get("L_x", 1.0)), float(p.get("L_R", 1.0)))
    dt = float(p.get("dt", 1.0))
    out: dict[str, Any] = {"cap": cap.cap, "L_x": cap.L_x, "L_R": cap.L_R, "dt": dt}
    if len(ctx.stream) >= 2:
        viol = rate_check(ctx.stream, cap, dt)
        out["violations"] = [v.to_dict() for v in viol]
        for v in viol:
            if v.kind == "jump":
                ctx.fail("dynamics", f"jump {v.delta!r} between t={v.t_from} and t={v.t_to}")
    else:
        out["violations"] = []
    tm = trajectory_metrics(ctx.stream, ctx.k)
    out["trajectory"] = tm.to_dict()
    for i, g in enumerate(tm.jensen_gap):
        if g < -BOUND_TOL:
            ctx.fail("dynamics", f"negative Jensen gap {g!r} on channel {i}")
    return out


def _representation(ctx: _Ctx, p: dict[str, Any]) -> dict[str, Any]:
    lam = float(p.get("lambda", 0.5))
    tau = float(p.get("tau", 0.1))
    delta = float(p.get("delta", 0.05))
    eta_s = float(p.get("eta_smoothing", 1e-6))
    prior = RationalPrior(tuple(p["prior"]), eta_s) if p.get("prior") is not None else None
    rational = p.get("rational_set")
    beta = float(p.get("beta", 0.0))
    m = ctx.stream[0].arity
    trace = MemoryTrace.empty(m, lam, ctx.k.epsilon)
    rows, prev = [], None
    for snap, bd in zip(ctx.stream, ctx.bds):
        v = dizziness_scan(bd, prev, tau, delta)
        seq = sequentiality(bd, trace, tau, eta_s)
        row: dict[str, Any] = {"t": snap.t, **v.to_dict(), "trace_mass": trace.mass, **seq._asdict()}
        if v.tau_dizzy and bd.active_count < v.min_active_bound - BOUND_TOL:
            ctx.fail("representation", f"t={snap.t}: dizziness multiplicity bound violated")
        if seq.consec < seq.bound_lhs - BOUND_TOL:
            ctx.fail("representation", f"t={snap.t}: consecutiveness bound violated")
        if prior is not None:
            row["reason"] = reason_score(bd, trace, prior)
        if rational is not None:
            caps = truth_floor_caps(snap, rational, beta, ctx.k)
            row["caps"] = caps._asdict()
            for name in ("pointwise_cap", "alpha_mass_cap", "p_mass_cap"):
                c = getattr(caps, name)
                if c is not None and caps.actual > c + BOUND_TOL:
                    ctx.fail("representation", f"t={snap.t}: {name} below actual score")
        rows.append(row)
        rise = positive_rises(prev, bd) if prev is not None else (0.0,) * m
        trace = memory_trace_step(trace, rise)
        if max(trace.values, default=0.0) > trace.cap:
            ctx.fail("representation", f"t={snap.t}: memory trace above cap")
        prev = bd
    out: dict[str, Any] = {"lambda": lam, "tau": tau, "delta": delta, "trace_cap": trace.cap,
                           "per_session": rows}
    if prior is not None:
        out["law_fixity"] = law_fixity_from_breakdowns(prior, ctx.bds)
    return out


def _contradiction(ctx: _Ctx, p: dict[str, Any]) -> dict[str, Any]:
    cc = ContradictionConfig(
        tuple(tuple(pair) for pair in p["pairs"]), tuple(p["gammas"]), float(p.get("zeta", 0.0))
    )
    bound = cc.gamma_total * ctx.k.phi_zero
    rows = []
    for snap in ctx.stream:
        r = pc_penalty(snap, cc, ctx.k)
        rows.append({"t": snap.t, "penalty": r.penalty, "adjusted_total": r.adjusted_total})
        if not (0.0 <= r.penalty <= bound + BOUND_TOL):
            ctx.fail("contradiction", f"t={snap.t}: penalty outside [0, {bound}]")
    return {"bound": bound, "per_session": rows}


def _psr(ctx: _Ctx, p: dict[str, Any]) -> dict[str, Any]:
    net = CausalNetwork(tuple(tuple(r) for r in p["a"]), tuple(p["a0"]), float(p.get("delta", 0.01)))
    rows = []
    for prev, snap in zip(ctx.stream, ctx.stream[1:]):
        r = psr_penalty(snap, prev.x, net, ctx.k)
        rows.append({"t": snap.t, "penalty": r.penalty, "sufficiency": list(r.sufficiency),
                     "adjusted_total": r.adjusted_total})
        cap = math.fsum(snap.alphas) * ctx.k.phi_zero
        if r.penalty > cap + BOUND_TOL:
            ctx.fail("psr", f"t={snap.t}: penalty above mass cap")
    return {"delta": net.delta, "per_session": rows}


def _harmony(ctx: _Ctx, p: dict[str, Any]) -> dict[str, Any]:
    pairing = ViewPairing(
        tuple(p["soul"]), tuple(p["body"]), {int(j): int(i) for j, i in p["pairing"].items()}
    )
    if set(pairing.soul_channels) & set(pairing.body_channels):
        raise DomainError("soul and body channel sets must be disjoint")
    rows = []
    for snap in ctx.stream:
        r = harmony_penalty(snap, snap, pairing, ctx.k)
        rows.append({"t": snap.t, "penalty": r.harm, "total_with_harmony": r.total_with_harmony})
    return {"per_session": rows}


def _alignment(ctx: _Ctx, p: dict[str, Any]) -> dict[str, Any]:
    targets = [float(y) for y in p["targets"]]
    band = float(p.get("dead_band", 0.0))
    rows = []
    for a, b in zip(ctx.stream, ctx.stream[1:]):
        r = alignment_penalty(a, b, targets, ctx.k, band)
        rows.append({"t": a.t, "penalty": r.harm, "total_with_alignment": r.total_with_alignment,
                     "alignments": list(r.alignments)})
    return {"dead_band": band, "per_session": rows}


def _hierarchy(ctx: _Ctx, p: dict[str, Any]) -> dict[str, Any]:
    shape = p["tree"]
    rows = []
    for snap in ctx.stream:
        roll = level_rollup(tree_from_snapshot(snap, shape), ctx.k)
        totals = roll.level_totals
        if any(b < a - BOUND_TOL for a, b in zip(totals, totals[1:])):
            ctx.fail("hierarchy", f"t={snap.t}: level chain not monotone")
        if totals[-1] > roll.root_mass * ctx.k.phi_zero + BOUND_TOL:
            ctx.fail("hierarchy", f"t={snap.t}: level total above cap")
        rows.append({"t": snap.t, **roll.to_dict(), "organic": roll.organic_to_depth()})
    return {"per_session": rows}


def _grouping(p: dict[str, Any], ctx: _Ctx) -> GroupingView:
    groups = p.get("groups") or ctx.config.params("dominance").get("groups")
    if groups is None:
        raise DomainError("a grouping needs 'groups'")
    dom = ctx.config.params("dominance")
    subs = {int(k): tuple(tuple(s) for s in v) for k, v in (p.get("subgroups") or {}).items()}
    return GroupingView(
        tuple(tuple(g) for g in groups),
        int(p.get("window", dom.get("window", 1))),
        float(p.get("margin", dom.get("margin", 0.0))),
        subs,
    )


def _dominance(ctx: _Ctx, p: dict[str, Any]) -> dict[str, Any]:
    return dominance_scan(ctx.stream, _grouping(p, ctx), ctx.k).to_dict()


def _whole_part(ctx: _Ctx, p: dict[str, Any]) -> dict[str, Any]:
    view = _grouping(p, ctx)
    gR = p.get("group_R", [0.0] * ctx.stream[0].arity)
    series = gR if gR and isinstance(gR[0], list) else [gR] * len(ctx.stream)
    wp = whole_part_check(ctx.stream, view, None, series, ctx.k)
    for t, g, s in zip((s.t for s in ctx.stream), wp.global_totals, wp.part_totals):
        if g > s + BOUND_TOL:
            ctx.fail("whole_part", f"t={t}: whole exceeds sum of parts")
    for b in wp.dominance_bounds:
        if b > wp.window_mean_global + BOUND_TOL:
            ctx.fail("whole_part", "dominance lower bound exceeds windowed global mean")
    return {
        "global": list(wp.global_totals),
        "sum_of_parts": list(wp.part_totals),
        "window_mean_global": wp.window_mean_global,
        "dominant_group": wp.dominant_group,
        "dominance_bounds": list(wp.dominance_bounds),
    }


def _perfection(ctx: _Ctx, p: dict[str, Any]) -> dict[str, Any]:
    gamma = float(p.get("gamma", 0.5))
    rows = []
    for bd in ctx.bds:
        A = bd.mass
        rows.append({"t": bd.t, **variety_order_perfection(bd, A, gamma, ctx.k).to_dict()}
                    if A > 0 else {"t": bd.t, "perfection": None})
    return {"gamma": gamma, "per_session": rows}


def _drift(ctx: _Ctx, p: dict[str, Any]) -> dict[str, Any]:
    window = int(p.get("window", 3))
    scores = [bd.total for bd in ctx.bds]
    if len(scores) < window + 1:
        return {"skipped": f"need {window + 1} sessions, have {len(scores)}",
                "verdict": {"verdict": "hold", "trigger_windows": []}}
    ledger = drift_classify(scores, window, float(p.get("eta", 0.05)), int(p.get("stride", 1)))
    policy = GovernancePolicy(int(p.get("promote_after", 3)), int(p.get("rollback_after", 1)))
    verdict = governance_decide(ledger, policy)
    rises, falls, rebuilt = drift_decomposition(scores)
    if abs(rebuilt - scores[-1]) > 1e-9 * max(1.0, abs(scores[-1])):
        ctx.fail("drift", "rise/fall decomposition does not reproduce the final score")
    return {"ledger": ledger.to_dict(), "verdict": verdict.to_dict(),
            "rises": rises, "falls": falls}


RUNNERS: dict[str, Callable[[_Ctx, dict[str, Any]], dict[str, Any]]] = {
    "audit": _audit,
    "dedup": _dedup,
    "dynamics": _dynamics,
    "representation": _representation,
    "contradiction": _contradiction,
    "psr": _psr,
    "harmony": _harmony,
    "alignment": _alignment,
    "hierarchy": _hierarchy,
    "dominance": _dominance,
    "whole_part": _whole_part,
    "perfection": _perfection,
    "drift": _drift,
}


def resolve_config(config: ClauseConfig | str | None, n_channels: int) -> ClauseConfig:
    if config is None:
        return preset_config("base", n_channels)
    if isinstance(config, str):
        return preset_config(config, n_channels)
    return config


def run_pipeline(
    sessions: SessionFile,
    config: ClauseConfig | str | None = None,
    epsilon: float | None = None,
) -> Report:
    """Score every session, then run enabled clauses in ``CLAUSE_ORDER``.

    Epsilon precedence: explicit argument, then config, then the session header.
    """
    stream = list(sessions.records)
    if not stream:
        raise DomainError("no sessions to evaluate")
    config = resolve_config(config, sessions.header.n_channels)
    eps = epsilon if epsilon is not None else (
        config.epsilon if config.epsilon is not None else sessions.header.epsilon
    )
    kcfg = KernelConfig(eps)
    bds = evaluate_breakdowns(stream, kcfg)
    ctx = _Ctx(stream, bds, kcfg, config)

    records: list[dict[str, Any]] = [{
        "section": "config",
        "format": REPORT_FORMAT,
        "epsilon": eps,
        "config": config.to_dict(),
        "sessions": {
            "count": len(stream),
            "channel_ids": list(sessions.header.channel_ids),
            "weights": list(sessions.header.weights),
        },
    }]
    for bd in bds:
        if not (0.0 <= bd.total <= kcfg.phi_zero + BOUND_TOL):
            ctx.fail("kernel", f"t={bd.t}: total outside [0, phi(0)]")
        records.append({"section": "breakdown", **bd.to_dict()})
    records.append({"section": "trajectory", **trajectory_summary(stream, kcfg).to_dict()})

    for name in CLAUSE_ORDER:
        if not config.enabled(name):
            continue
        try:
            output = RUNNERS[name](ctx, config.params(name))
        except ClauseError:
            raise
        except (DomainError, KeyError, TypeError, ValueError) as exc:
            raise ClauseError(name, str(exc)) from exc
        records.append({"section": "clause", "clause": name, "output": output})

    records.append({"section": "checks", "passed": not ctx.failures, "failures": ctx.failures})
    return Report(records)
