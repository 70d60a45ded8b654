"""Session files, clause configuration and report serialization.

Sessions are JSON lines: one header record, then one record per session
index. Reports are JSON lines with sorted keys so identical runs produce
identical bytes.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Iterable, Iterator, Mapping, Sequence

from .kernel import DEFAULT_EPSILON, ChannelState, DomainError, SessionSnapshot

SESSION_FORMAT = "aas-sessions/1"
REPORT_FORMAT = "aas-report/1"


class SessionFormatError(DomainError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass(frozen=True)
class SessionHeader:
    channel_ids: tuple[str, ...]
    weights: tuple[float, ...]
    epsilon: float = DEFAULT_EPSILON
    scenario: Mapping[str, Any] | None = None

    @property
    def n_channels(self) -> int:
        return len(self.channel_ids)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "kind": "header",
            "format": SESSION_FORMAT,
            "n_channels": self.n_channels,
            "channel_ids": list(self.channel_ids),
            "weights": list(self.weights),
            "epsilon": self.epsilon,
        }
        if self.scenario is not None:
            d["scenario"] = self.scenario
        return d


@dataclass
class SessionFile:
    header: SessionHeader
    records: list[SessionSnapshot] = field(default_factory=list)


def _header_from(obj: Mapping[str, Any], line: int) -> SessionHeader:
    if obj.get("kind") != "header":
        raise SessionFormatError("first record must be the header", line)
    try:
        ids = tuple(str(c) for c in obj["channel_ids"])
        weights = tuple(float(w) for w in obj["weights"])
        eps = float(obj.get("epsilon", DEFAULT_EPSILON))
    except (KeyError, TypeError, ValueError) as exc:
        raise SessionFormatError(f"malformed header: {exc}", line) from None
    if "n_channels" in obj and int(obj["n_channels"]) != len(ids):
        raise SessionFormatError("n_channels disagrees with channel_ids", line)
    if len(weights) != len(ids):
        raise SessionFormatError("one weight per channel is required", line)
    if any(not (w >= 0) for w in weights):
        raise SessionFormatError("weights must be nonnegative", line)
    total = math.fsum(weights)
    if abs(total - 1.0) > 1e-12:
        raise SessionFormatError(f"weight sum must be 1, got {total!r}", line)
    if not eps > 0:
        raise SessionFormatError("epsilon must be positive", line)
    return SessionHeader(ids, weights, eps, obj.get("scenario"))


def _record_from(obj: Mapping[str, Any], header: SessionHeader, line: int) -> SessionSnapshot:
    if obj.get("kind", "session") != "session":
        raise SessionFormatError(f"unexpected record kind {obj.get('kind')!r}", line)
    try:
        t = int(obj["t"])
        xs = [float(v) for v in obj["x"]]
        Rs = [float(v) for v in obj.get("R", [0.0] * len(xs))]
    except (KeyError, TypeError, ValueError) as exc:
        raise SessionFormatError(f"malformed session record: {exc}", line) from None
    meta = obj.get("metadata") or [None] * len(xs)
    if not (len(xs) == len(Rs) == len(meta) == header.n_channels):
        raise SessionFormatError("record arity does not match header", line)
    try:
        return SessionSnapshot(
            t=t,
            channels=tuple(ChannelState(x, r) for x, r in zip(xs, Rs)),
            weights=header.weights,
            metadata=tuple(meta),
        )
    except DomainError as exc:
        raise SessionFormatError(str(exc), line) from None


def iter_sessions(fh: IO[str]) -> tuple[SessionHeader, Iterator[SessionSnapshot]]:
    """Read the header eagerly and return a lazy iterator over session records."""
    line_no = 0
    header = None
    for raw in fh:
        line_no += 1
        if raw.strip():
            header = _header_from(_parse(raw, line_no), line_no)
            break
    if header is None:
        raise SessionFormatError("empty session file")

    def records() -> Iterator[SessionSnapshot]:
        n, last_t = line_no, None
        for raw in fh:
            n += 1
            if not raw.strip():
                continue
            snap = _record_from(_parse(raw, n), header, n)
            if last_t is not None and snap.t <= last_t:
                raise SessionFormatError(
                    f"session index must increase strictly ({snap.t} after {last_t})", n
                )
            last_t = snap.t
            yield snap

    return header, records()


def _parse(raw: str, line: int) -> Mapping[str, Any]:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SessionFormatError(f"invalid JSON: {exc.msg}", line) from None
    if not isinstance(obj, dict):
        raise SessionFormatError("each line must be a JSON object", line)
    return obj


def read_sessions(fh: IO[str]) -> SessionFile:
    header, recs = iter_sessions(fh)
    return SessionFile(header, list(recs))


def load_sessions(path: str | Path) -> SessionFile:
    with open(path, encoding="utf-8") as fh:
        return read_sessions(fh)


def session_lines(sf: SessionFile) -> Iterable[str]:
    yield dumps(sf.header.to_dict())
    for snap in sf.records:
        rec: dict[str, Any] = {"kind": "session", "t": snap.t, "x": list(snap.x), "R": list(snap.R)}
        if any(m is not None for m in snap.metadata):
            rec["metadata"] = list(snap.metadata)
        yield dumps(rec)


def dump_sessions(sf: SessionFile) -> str:
    return "".join(line + "\n" for line in session_lines(sf))


def save_sessions(sf: SessionFile, path: str | Path) -> None:
    Path(path).write_text(dump_sessions(sf), encoding="utf-8")


# --- clause configuration ---------------------------------------------------

CLAUSES = (
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


@dataclass
class ClauseConfig:
    """Clause parameters keyed by clause name; a clause runs iff present and enabled."""

    clauses: dict[str, dict[str, Any]] = field(default_factory=dict)
    epsilon: float | None = None
    seed: int = 0
    name: str = "custom"

    def __post_init__(self) -> None:
        unknown = set(self.clauses) - set(CLAUSES)
        if unknown:
            raise DomainError(f"unknown clauses: {sorted(unknown)}")

    def enabled(self, clause: str) -> bool:
        sec = self.clauses.get(clause)
        return sec is not None and bool(sec.get("enabled", True))

    def params(self, clause: str) -> dict[str, Any]:
        return dict(self.clauses.get(clause) or {})

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "clauses": self.clauses,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ClauseConfig:
        clauses = d.get("clauses", {})
        if not isinstance(clauses, dict):
            raise DomainError("'clauses' must be a mapping")
        eps = d.get("epsilon")
        return cls(
            clauses={k: dict(v) for k, v in clauses.items()},
            epsilon=None if eps is None else float(eps),
            seed=int(d.get("seed", 0)),
            name=str(d.get("name", "custom")),
        )


def load_config(path: str | Path) -> ClauseConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return ClauseConfig.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path}: invalid JSON config at line {exc.lineno}: {exc.msg}") from None


def dump_config(cfg: ClauseConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n"


def _halves(n: int) -> tuple[list[int], list[int]]:
    k = max(1, n // 2)
    return list(range(k)), list(range(k, n))


def _balanced_tree(idx: Sequence[int], name: str = "root") -> dict[str, Any]:
    if len(idx) == 1:
        return {"id": f"ch{idx[0]}", "channel": idx[0]}
    mid = len(idx) // 2
    return {
        "id": name,
        "children": [_balanced_tree(idx[:mid], name + "L"), _balanced_tree(idx[mid:], name + "R")],
    }


def preset_config(name: str, n_channels: int) -> ClauseConfig:
    """Built-in configurations: ``base`` (no clauses) and ``all-clauses``."""
    if name == "base":
        return ClauseConfig(name="base")
    if name != "all-clauses":
        raise DomainError(f"unknown preset {name!r}")
    n = n_channels
    if n < 2:
        raise DomainError("the all-clauses preset needs at least two channels")
    soul, body = _halves(n)
    off = 0.5 / (n - 1)
    clauses: dict[str, dict[str, Any]] = {
        "audit": {"metadata_trials": 2, "ghost_kinds": ["zero_weight", "full_redundancy"],
                  "ghost_weight": 0.25, "bumps": [[n - 1, 0.1]]},
        "dedup": {"tolerance": 0.0},
        "dynamics": {"L_x": 1.0, "L_R": 1.0, "dt": 1.0},
        "representation": {"lambda": 0.5, "tau": 0.1, "delta": 0.05, "eta_smoothing": 1e-6,
                           "prior": [1.0 / n] * n, "rational_set": [0], "beta": 0.0},
        "contradiction": {"pairs": [[0, 1]], "gammas": [1.0], "zeta": 0.1},
        "psr": {"a": [[0.0 if i == j else off for j in range(n)] for i in range(n)],
                "a0": [0.5] * n, "delta": 0.01},
        "harmony": {"soul": soul, "body": body[: len(soul)],
                    "pairing": {str(j): soul[k] for k, j in enumerate(body[: len(soul)])}},
        "alignment": {"targets": [1.0] * n, "dead_band": 0.0},
        "hierarchy": {"tree": _balanced_tree(list(range(n)))},
        "dominance": {"groups": [soul, body], "window": 3, "margin": 0.05},
        "whole_part": {"group_R": [0.0] * n},
        "perfection": {"gamma": 0.5},
        "drift": {"window": 3, "eta": 0.05, "stride": 1,
                  "promote_after": 3, "rollback_after": 1},
    }
    return ClauseConfig(clauses=clauses, name="all-clauses")


# --- reports ----------------------------------------------------------------


@dataclass
class Report:
    """Ordered report records; the first is the config echo."""

    records: list[dict[str, Any]] = field(default_factory=list)

    def section(self, name: str) -> list[dict[str, Any]]:
        return [r for r in self.records if r.get("section") == name]

    def clause(self, name: str) -> dict[str, Any] | None:
        for r in self.records:
            if r.get("section") == "clause" and r.get("clause") == name:
                return r["output"]
        return None

    @property
    def breakdowns(self) -> list[dict[str, Any]]:
        return self.section("breakdown")

    @property
    def failures(self) -> list[str]:
        checks = self.section("checks")
        return list(checks[-1]["failures"]) if checks else []

    @property
    def passed(self) -> bool:
        return not self.failures


def emit_report(report: Report, fmt: str = "json-lines") -> bytes:
    if fmt == "json-lines":
        return "".join(dumps(r) + "\n" for r in report.records).encode("utf-8")
    if fmt == "table":
        return render_table(report).encode("utf-8")
    raise DomainError(f"unknown report format {fmt!r}")


def load_report(data: bytes | str) -> Report:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    return Report([json.loads(line) for line in text.splitlines() if line.strip()])


PENALTY_COLUMNS = (("contradiction", "PC"), ("psr", "PSR"), ("harmony", "HARM"), ("alignment", "ALIGN"))


def render_table(report: Report) -> str:
    per_t: dict[int, dict[str, float]] = {}
    for name, col in PENALTY_COLUMNS:
        out = report.clause(name)
        if not out:
            continue
        for row in out.get("per_session", []):
            per_t.setdefault(row["t"], {})[col] = row["penalty"]
    cols = [c for name, c in PENALTY_COLUMNS if report.clause(name)]
    buf = io.StringIO()
    head = ["t", "S_t", "rho_t", "H_t", "ApperLevel_t", *cols]
    buf.write("  ".join(f"{h:>12}" for h in head) + "\n")
    for bd in report.breakdowns:
        row = [f"{bd['t']:>12d}"] + [
            f"{bd[k]:>12.6f}" for k in ("total", "peak_share", "contrib_entropy", "apper_level")
        ]
        pens = per_t.get(bd["t"], {})
        row += [f"{pens[c]:>12.6f}" if c in pens else f"{'-':>12}" for c in cols]
        buf.write("  ".join(row) + "\n")
    gov = report.clause("drift")
    if gov:
        buf.write(f"verdict: {gov['verdict']['verdict']} windows={gov['verdict']['trigger_windows']}\n")
    fails = report.failures
    buf.write("checks: " + ("all passed" if not fails else f"{len(fails)} failed") + "\n")
    for f in fails:
        buf.write(f"  FAIL {f}\n")
    return buf.getvalue()
