"""Wire protocol for the two-party session: newline-delimited JSON envelopes.

Every message is one JSON object per line with a fixed envelope shape
(version, type, per-sender sequence number, server-session clock stamp,
sender, payload).  The same framing travels over raw TCP and WebSocket text
frames, so traces stay human-inspectable and the browser client shares the
codec.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

from .dynamics import DynamicsParams
from .haptics import CouplingParams, HapticMode, VibrationParams

PROTOCOL_VERSION = 1

SENDERS = ("A", "B", "server")

MESSAGE_KINDS = (
    "hello",
    "session_start",
    "pose",
    "zone",
    "consensus_edge",
    "task_tick",
    "quiz_nav",
    "propose",
    "agree",
    "submit_result",
    "heartbeat",
    "bye",
)

MAX_LINE_BYTES = 65536


class ProtocolError(ValueError):
    """Any violation of the envelope contract."""


class VersionMismatchError(ProtocolError):
    pass


class UnknownTypeError(ProtocolError):
    pass


@dataclass(frozen=True)
class Envelope:
    type: str
    seq: int
    t_ms: int
    from_: str
    payload: dict
    v: int = PROTOCOL_VERSION


def encode(e: Envelope) -> bytes:
    """One envelope -> one UTF-8 JSON line (canonical key order)."""
    doc = {
        "v": e.v,
        "type": e.type,
        "seq": e.seq,
        "t_ms": e.t_ms,
        "from": e.from_,
        "payload": e.payload,
    }
    return json.dumps(doc, separators=(",", ":"), sort_keys=True).encode("utf-8") + b"\n"


def decode(line: bytes | str) -> Envelope:
    """One complete line -> envelope; rejects bad version/type/sender."""
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed envelope JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ProtocolError("envelope must be a JSON object")
    v = doc.get("v")
    if v != PROTOCOL_VERSION:
        raise VersionMismatchError(f"protocol version mismatch: got {v!r}")
    kind = doc.get("type")
    if kind not in MESSAGE_KINDS:
        raise UnknownTypeError(f"unknown message type: {kind!r}")
    sender = doc.get("from")
    if sender not in SENDERS:
        raise ProtocolError(f"unknown sender: {sender!r}")
    seq = doc.get("seq")
    t_ms = doc.get("t_ms")
    if not isinstance(seq, int) or isinstance(seq, bool):
        raise ProtocolError("seq must be an integer")
    if not isinstance(t_ms, int) or isinstance(t_ms, bool):
        raise ProtocolError("t_ms must be an integer")
    payload = doc.get("payload")
    if not isinstance(payload, dict):
        raise ProtocolError("payload must be an object")
    return Envelope(type=kind, seq=seq, t_ms=t_ms, from_=sender, payload=payload)


class LineDecoder:
    """Byte-stream framing: buffers partial input, yields complete lines."""

    def __init__(self, max_line_bytes: int = MAX_LINE_BYTES) -> None:
        self._buf = bytearray()
        self._max = max_line_bytes

    def feed(self, data: bytes) -> list[bytes]:
        self._buf.extend(data)
        lines: list[bytes] = []
        while True:
            idx = self._buf.find(b"\n")
            if idx < 0:
                if len(self._buf) > self._max:
                    raise ProtocolError("line exceeds maximum frame size")
                return lines
            lines.append(bytes(self._buf[:idx]))
            del self._buf[: idx + 1]

    @property
    def pending(self) -> int:
        return len(self._buf)


@dataclass(frozen=True)
class SessionConfig:
    """Session-wide parameters agreed at start and frozen thereafter."""
    session_id: str
    mode: HapticMode
    coupling: CouplingParams = field(default_factory=CouplingParams)
    vibration: VibrationParams = field(default_factory=VibrationParams)
    map_hash: str = ""
    pose_rate_hz: int = 20
    sim_rate_hz: int = 100
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)

    def to_payload(self) -> dict:
        doc = asdict(self)
        doc["mode"] = self.mode.value
        return doc

    @staticmethod
    def from_payload(doc: dict) -> "SessionConfig":
        return SessionConfig(
            session_id=doc["session_id"],
            mode=HapticMode(doc["mode"]),
            coupling=CouplingParams(**doc["coupling"]),
            vibration=VibrationParams(**doc["vibration"]),
            map_hash=doc["map_hash"],
            pose_rate_hz=int(doc["pose_rate_hz"]),
            sim_rate_hz=int(doc["sim_rate_hz"]),
            dynamics=DynamicsParams(**doc["dynamics"]),
        )

    def digest_fields(self) -> dict:
        return self.to_payload()


@dataclass(frozen=True)
class LatencyProfile:
    """Simulated link: base delay plus uniform jitter, seeded and monotonized
    so delivery order is preserved per direction."""
    base_delay_ms: int = 0
    jitter_ms: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.base_delay_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latency parameters must be non-negative")
