"""Sans-io client-side session state.

Tracks everything a participant needs from the wire: assigned role, session
config, a clock estimate from server stamps, the partner's last snapshot and
quiz outcomes.  Transport adapters feed bytes in; outbound envelopes go
through a send callable so the same class works over simulated links and
real sockets.
"""
from __future__ import annotations

from collections import deque
from typing import Callable

from .dynamics import RobotPose
from .geometry import Vec2
from .haptics import PartnerView
from .protocol import (
    Envelope,
    LineDecoder,
    ProtocolError,
    SessionConfig,
    decode,
    encode,
)


class SessionClient:
    """Protocol bookkeeping for one participant."""

    def __init__(self, map_hash: str, send_bytes: Callable[[bytes], None]) -> None:
        self.map_hash = map_hash
        self._send_bytes = send_bytes
        self._decoder = LineDecoder()
        self._seq = 0
        self.role: str | None = None
        self.peer_role: str | None = None
        self.session_id: str | None = None
        self.config: SessionConfig | None = None
        self.started = False
        self.clock_ms = 0
        self.partner: PartnerView | None = None
        self.partner_present = True
        self.rejected_reason: str | None = None
        self.closed = False
        self.inbox: deque[Envelope] = deque()
        self.protocol_errors = 0
        self.poses_sent = 0
        self.poses_received = 0

    # -- inbound -----------------------------------------------------------------

    def on_bytes(self, data: bytes) -> list[Envelope]:
        """Feed raw bytes; returns the envelopes that completed."""
        out = []
        for line in self._decoder.feed(data):
            env = self.on_line(line)
            if env is not None:
                out.append(env)
        return out

    def on_line(self, line: bytes) -> Envelope | None:
        try:
            env = decode(line)
        except ProtocolError:
            self.protocol_errors += 1
            return None
        self._apply(env)
        self.inbox.append(env)
        return env

    def _apply(self, env: Envelope) -> None:
        if env.t_ms > self.clock_ms:
            self.clock_ms = env.t_ms
        kind = env.type
        if kind == "hello" and env.from_ == "server":
            self.role = env.payload.get("role")
            self.peer_role = "B" if self.role == "A" else "A"
            self.session_id = env.payload.get("session_id")
            self.send("hello", {"map_hash": self.map_hash})
        elif kind == "session_start":
            self.config = SessionConfig.from_payload(env.payload)
            self.started = True
        elif kind == "pose" and env.from_ == self.peer_role:
            self.poses_received += 1
            prev = self.partner
            self.partner = PartnerView(
                pose=RobotPose(
                    p=Vec2(float(env.payload["x_mm"]), float(env.payload["y_mm"])),
                    theta_rad=float(env.payload.get("theta_rad", 0.0)),
                ),
                zone_id=prev.zone_id if prev is not None else "",
                received_t_ms=max(env.t_ms, prev.received_t_ms if prev else 0),
            )
            self.partner_present = True
        elif kind == "zone" and env.from_ == self.peer_role:
            prev = self.partner
            if prev is not None:
                self.partner = PartnerView(
                    pose=prev.pose,
                    zone_id=env.payload["zone_id"],
                    received_t_ms=max(env.t_ms, prev.received_t_ms),
                )
            else:
                self.partner = PartnerView(
                    pose=RobotPose(p=Vec2(0.0, 0.0)),
                    zone_id=env.payload["zone_id"],
                    received_t_ms=env.t_ms,
                )
        elif kind == "bye" and env.from_ == "server":
            who = env.payload.get("who")
            if who is not None and who == self.peer_role:
                self.partner_present = False
            elif who is None:
                self.rejected_reason = env.payload.get("reason")
                self.closed = True

    # -- outbound ----------------------------------------------------------------

    def send(self, kind: str, payload: dict) -> Envelope:
        self._seq += 1
        env = Envelope(
            type=kind,
            seq=self._seq,
            t_ms=self.clock_ms,
            from_=self.role or "A",
            payload=payload,
        )
        self._send_bytes(encode(env))
        return env

    def send_pose(self, p: Vec2, theta_rad: float) -> None:
        self.poses_sent += 1
        self.send("pose", {"x_mm": p.x_mm, "y_mm": p.y_mm, "theta_rad": theta_rad})

    def send_zone(self, zone_id: str) -> None:
        self.send("zone", {"zone_id": zone_id})

    def drain_inbox(self) -> list[Envelope]:
        out = list(self.inbox)
        self.inbox.clear()
        return out
