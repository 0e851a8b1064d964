"""Trace analytics: resampling, Pearson correlations, permutation p-values,
tandem fraction, dwell times and the session summary report.

Correlations run on linearly resampled series (default 10 Hz) over the two
robots' overlapping time span; heading is recorded but excluded from the
correlation matrix.  P-values come from a seeded two-sided permutation test,
so they are assumption-free and reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activity import ActivityEngine
from .trace import Trace, TraceSample

CORR_DIMS = ("x1", "y1", "x2", "y2")


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class ResampledPair:
    """The two robots' x/y series aligned on a shared uniform grid."""
    t_ms: np.ndarray
    x1: np.ndarray
    y1: np.ndarray
    x2: np.ndarray
    y2: np.ndarray
    zones1: list[str]
    zones2: list[str]
    hz: float

    @property
    def n(self) -> int:
        return len(self.t_ms)


@dataclass(frozen=True)
class CorrelationReport:
    dims: tuple[str, ...]
    r: list[list[float]]
    p: list[list[float]]
    n_samples: int
    resample_hz: float

    def to_json_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "r": self.r,
            "p": self.p,
            "n_samples": self.n_samples,
            "resample_hz": self.resample_hz,
        }


def pearson(a, b) -> float:
    """Product-moment correlation; errors on zero variance instead of NaN."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or len(a) != len(b):
        raise AnalysisError("series must be 1-d and of equal length")
    if len(a) < 2:
        raise AnalysisError("need at least 2 samples")
    da = a - a.mean()
    db = b - b.mean()
    var_a = float(da @ da)
    var_b = float(db @ db)
    if var_a == 0.0 or var_b == 0.0:
        raise AnalysisError("zero variance: correlation undefined")
    return float((da @ db) / np.sqrt(var_a * var_b))


def perm_pvalue(a, b, n_perm: int = 10000, seed: int = 0) -> float:
    """Two-sided permutation p-value for the Pearson correlation.

    p = (1 + #{perms with |r_perm| >= |r_obs|}) / (n_perm + 1), permuting b
    with a generator seeded for exact reproducibility.
    """
    if n_perm < 1:
        raise AnalysisError("need at least one permutation")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    r_obs = abs(pearson(a, b))
    rng = np.random.default_rng(seed)
    n = len(a)
    da = a - a.mean()
    sa = np.sqrt(float(da @ da))
    db = b - b.mean()
    sb = np.sqrt(float(db @ db))
    da_unit = da / sa
    db_scaled = db / sb

    hits = 0
    # Chunked so memory stays bounded for long series.
    chunk = max(1, min(n_perm, 2_000_000 // max(n, 1)))
    remaining = n_perm
    while remaining > 0:
        m = min(chunk, remaining)
        idx = np.argsort(rng.random((m, n)), axis=1)
        r_perm = db_scaled[idx] @ da_unit
        hits += int(np.count_nonzero(np.abs(r_perm) >= r_obs - 1e-15))
        remaining -= m
    return (1 + hits) / (n_perm + 1)


def _interp_series(samples: list[TraceSample], grid_ms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = np.array([s.t_ms for s in samples], dtype=float)
    x = np.array([s.x_mm for s in samples], dtype=float)
    y = np.array([s.y_mm for s in samples], dtype=float)
    return np.interp(grid_ms, t, x), np.interp(grid_ms, t, y)


def _hold_zones(samples: list[TraceSample], grid_ms: np.ndarray) -> list[str]:
    # Zone is a step function: hold the most recent sample at or before t.
    t = np.array([s.t_ms for s in samples], dtype=float)
    idx = np.searchsorted(t, grid_ms, side="right") - 1
    idx = np.clip(idx, 0, len(samples) - 1)
    return [samples[int(i)].zone_id for i in idx]


def resample(trace: Trace, hz: float = 10.0) -> ResampledPair:
    """Align both robots' series on a uniform grid over their overlap."""
    if hz <= 0:
        raise AnalysisError("resample rate must be positive")
    sa = trace.by_robot("A")
    sb = trace.by_robot("B")
    if len(sa) < 2 or len(sb) < 2:
        raise AnalysisError("both robots need at least 2 samples")
    t0 = max(sa[0].t_ms, sb[0].t_ms)
    t1 = min(sa[-1].t_ms, sb[-1].t_ms)
    if t1 <= t0:
        raise AnalysisError("traces have no overlapping time span")
    step_ms = 1000.0 / hz
    n = int(np.floor((t1 - t0) / step_ms)) + 1
    grid = t0 + np.arange(n) * step_ms
    x1, y1 = _interp_series(sa, grid)
    x2, y2 = _interp_series(sb, grid)
    return ResampledPair(
        t_ms=grid,
        x1=x1,
        y1=y1,
        x2=x2,
        y2=y2,
        zones1=_hold_zones(sa, grid),
        zones2=_hold_zones(sb, grid),
        hz=hz,
    )


def correlation_matrix(
    trace: Trace,
    hz: float = 10.0,
    n_perm: int = 10000,
    seed: int = 0,
) -> CorrelationReport:
    """Pearson r and permutation p for every pair among (x1, y1, x2, y2)."""
    rs = resample(trace, hz)
    series = [rs.x1, rs.y1, rs.x2, rs.y2]
    k = len(series)
    r = [[1.0] * k for _ in range(k)]
    p = [[1.0 / (n_perm + 1)] * k for _ in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            r_ij = pearson(series[i], series[j])
            p_ij = perm_pvalue(series[i], series[j], n_perm=n_perm, seed=seed)
            r[i][j] = r[j][i] = r_ij
            p[i][j] = p[j][i] = p_ij
    return CorrelationReport(
        dims=CORR_DIMS,
        r=r,
        p=p,
        n_samples=rs.n,
        resample_hz=hz,
    )


def tandem_fraction(trace: Trace, hz: float = 10.0) -> float:
    """Fraction of resampled grid points where both robots share a zone."""
    rs = resample(trace, hz)
    same = sum(1 for za, zb in zip(rs.zones1, rs.zones2) if za == zb)
    return same / rs.n


def dwell_times(trace: Trace) -> dict[str, dict[str, float]]:
    """Seconds spent per zone per robot, from consecutive sample intervals."""
    out: dict[str, dict[str, float]] = {}
    for robot in sorted(trace.robots):
        samples = trace.by_robot(robot)
        acc: dict[str, float] = {}
        for cur, nxt in zip(samples, samples[1:]):
            acc[cur.zone_id] = acc.get(cur.zone_id, 0.0) + (nxt.t_ms - cur.t_ms) / 1000.0
        out[robot] = {z: round(v, 3) for z, v in sorted(acc.items())}
    return out


def replay_quiz(events: list[dict], engine: ActivityEngine) -> ActivityEngine:
    """Re-drive the activity state machine from a recorded event log.

    Live zones are reconstructed from the logged zone events, so the gate
    decisions replay exactly as the session made them.
    """
    live: dict[str, str] = {}
    votes: dict[str, dict[str, str]] = {}
    for doc in events:
        kind = doc.get("type")
        sender = doc.get("from")
        payload = doc.get("payload", {})
        t_ms = int(doc.get("t_ms", 0))
        if kind == "zone" and sender in ("A", "B"):
            live[sender] = payload["zone_id"]
        elif kind == "task_tick" and sender in ("A", "B"):
            if payload.get("done", True):
                engine.tick_task(payload["task_id"], sender, t_ms)
        elif kind == "quiz_nav" and sender in ("A", "B"):
            engine.navigate(payload["q_id"], t_ms)
        elif kind == "propose" and sender in ("A", "B"):
            state = engine.questions.get(payload["q_id"])
            if state is not None and state.result is None:
                engine.propose_answer(payload["q_id"], sender, payload["zone_id"])
        elif kind == "agree" and sender in ("A", "B"):
            q_id = payload["q_id"]
            votes.setdefault(q_id, {})[sender] = payload["zone_id"]
            engine.try_submit(q_id, live.get("A"), live.get("B"), votes[q_id], t_ms)
    return engine


def session_summary(
    trace: Trace,
    events: list[dict],
    engine: ActivityEngine,
    hz: float = 10.0,
    n_perm: int = 10000,
    seed: int = 0,
) -> dict:
    """One JSON-ready report per session; degrades with warnings when the
    log is incomplete instead of failing."""
    warnings: list[str] = []
    report: dict = {"config_sha256": trace.config_digest, "warnings": warnings}

    replay_quiz(events, engine)
    if engine.quiz_finished:
        report["quiz"] = engine.quiz_report()
    else:
        warnings.append("quiz not finished: quiz duration/score omitted")

    report["dwell_s"] = dwell_times(trace)
    try:
        report["tandem_fraction"] = tandem_fraction(trace, hz=hz)
        report["correlation"] = correlation_matrix(
            trace, hz=hz, n_perm=n_perm, seed=seed
        ).to_json_dict()
    except AnalysisError as exc:
        warnings.append(f"correlation skipped: {exc}")
    return report


def plot_series_csv(trace: Trace, robot_id: str) -> str:
    """Plot-ready x(t)/y(t) series for one robot (CSV text)."""
    lines = ["t_ms,x_mm,y_mm"]
    for s in trace.by_robot(robot_id):
        lines.append(f"{s.t_ms},{s.x_mm:.3f},{s.y_mm:.3f}")
    return "\n".join(lines) + "\n"
