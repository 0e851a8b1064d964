"""Session trace recording and loading.

Two artifacts per session: a CSV of per-tick pose/zone samples (one row per
robot per pose update) and a JSONL file of wire envelopes for everything that
is not a pose.  Coordinates are quantized to 3 decimal places at write time so
a record -> load round-trip is exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

TRACE_COLUMNS = ("t_ms", "robot_id", "x_mm", "y_mm", "theta_rad", "zone_id")


class TraceError(ValueError):
    pass


def quantize(value: float) -> float:
    """Quantize to the 3-decimal wire precision used in trace rows."""
    return round(float(value), 3)


@dataclass(frozen=True)
class TraceSample:
    t_ms: int
    robot_id: str  # "A" or "B"
    x_mm: float
    y_mm: float
    theta_rad: float
    zone_id: str

    def quantized(self) -> "TraceSample":
        return TraceSample(
            t_ms=self.t_ms,
            robot_id=self.robot_id,
            x_mm=quantize(self.x_mm),
            y_mm=quantize(self.y_mm),
            theta_rad=quantize(self.theta_rad),
            zone_id=self.zone_id,
        )


def _format_row(s: TraceSample) -> str:
    return (
        f"{s.t_ms},{s.robot_id},{s.x_mm:.3f},{s.y_mm:.3f},{s.theta_rad:.3f},{s.zone_id}\n"
    )


class TraceWriter:
    """Single-writer recorder for one session.

    Enforces non-decreasing timestamps per robot; flushes on close.  The first
    line of the CSV is a comment carrying the session config digest so every
    trace is self-describing.
    """

    def __init__(
        self,
        sample_sink: IO[str],
        event_sink: IO[str] | None = None,
        config_digest: str = "",
    ) -> None:
        self._samples = sample_sink
        self._events = event_sink
        self._last_t: dict[str, int] = {}
        self.sample_count = 0
        self.event_count = 0
        if config_digest:
            self._samples.write(f"# config_sha256={config_digest}\n")
        self._samples.write(",".join(TRACE_COLUMNS) + "\n")

    def record_sample(self, sample: TraceSample) -> None:
        last = self._last_t.get(sample.robot_id)
        if last is not None and sample.t_ms < last:
            raise TraceError(
                f"non-monotone timestamp for robot {sample.robot_id}: "
                f"{sample.t_ms} after {last}"
            )
        self._last_t[sample.robot_id] = sample.t_ms
        self._samples.write(_format_row(sample.quantized()))
        self.sample_count += 1

    def record_event(self, envelope_doc: dict) -> None:
        if self._events is None:
            return
        self._events.write(json.dumps(envelope_doc, separators=(",", ":"), sort_keys=True) + "\n")
        self.event_count += 1

    def close(self) -> None:
        self._samples.flush()
        if self._events is not None:
            self._events.flush()


@dataclass
class Trace:
    """In-memory trace: ordered samples plus the recorded config digest."""
    samples: list[TraceSample]
    config_digest: str = ""

    def by_robot(self, robot_id: str) -> list[TraceSample]:
        return [s for s in self.samples if s.robot_id == robot_id]

    @property
    def robots(self) -> set[str]:
        return {s.robot_id for s in self.samples}


def write_trace_csv(path: str | Path, samples: Iterable[TraceSample], config_digest: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = TraceWriter(fh, config_digest=config_digest)
        for s in samples:
            writer.record_sample(s)
        writer.close()


def load_trace(path: str | Path) -> Trace:
    return parse_trace(Path(path).read_text(encoding="utf-8"))


def parse_trace(text: str) -> Trace:
    samples: list[TraceSample] = []
    digest = ""
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "config_sha256=" in line:
                digest = line.split("config_sha256=", 1)[1].strip()
            continue
        if not header_seen:
            if line != ",".join(TRACE_COLUMNS):
                raise TraceError(f"unexpected trace header: {line!r}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != len(TRACE_COLUMNS):
            raise TraceError(f"line {lineno}: expected {len(TRACE_COLUMNS)} fields")
        try:
            samples.append(
                TraceSample(
                    t_ms=int(parts[0]),
                    robot_id=parts[1],
                    x_mm=float(parts[2]),
                    y_mm=float(parts[3]),
                    theta_rad=float(parts[4]),
                    zone_id=parts[5],
                )
            )
        except ValueError as exc:
            raise TraceError(f"line {lineno}: {exc}") from None
    last: dict[str, int] = {}
    for s in samples:
        prev = last.get(s.robot_id)
        if prev is not None and s.t_ms < prev:
            raise TraceError(f"non-monotone timestamp for robot {s.robot_id}: {s.t_ms}")
        last[s.robot_id] = s.t_ms
    return Trace(samples=samples, config_digest=digest)


def load_events(path: str | Path) -> list[dict]:
    events = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise TraceError(f"events line {lineno}: {exc}") from None
    return events
