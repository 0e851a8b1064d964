"""Transport-agnostic two-party session server.

The server is a synchronous state machine: transports (asyncio sockets,
WebSocket connections or the in-process simulated links) hand it connection
events and complete lines, and it answers by writing lines back through a
small connection interface.  All session mutations happen on whichever single
logical loop drives those calls, which is what makes simulated runs
bit-reproducible and live runs race-free.

Responsibilities: role assignment (A then B in join order), map-hash
admission, the server-authoritative session clock, stamping and relaying
messages, the quiz agreement gate, heartbeats, trace/event recording and
state replay for a client that rejoins mid-session.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol as TypingProtocol

from .activity import Activity, ActivityEngine
from .geometry import Vec2
from .protocol import Envelope, SessionConfig, decode, encode, ProtocolError
from .trace import TraceSample, TraceWriter
from .zonemap import ZoneMap, locate
from .haptics import HapticMode

HEARTBEAT_INTERVAL_MS = 1000

# Message kinds a client may send after the session has started.
_CLIENT_KINDS = {
    "pose",
    "zone",
    "consensus_edge",
    "task_tick",
    "quiz_nav",
    "propose",
    "agree",
    "bye",
}


class ServerConn(TypingProtocol):
    """What the server needs from a connection object."""

    def send_line(self, line: bytes) -> None: ...

    def close(self) -> None: ...


def envelope_doc(e: Envelope) -> dict:
    return {
        "v": e.v,
        "type": e.type,
        "seq": e.seq,
        "t_ms": e.t_ms,
        "from": e.from_,
        "payload": e.payload,
    }


@dataclass
class _Slot:
    role: str
    conn: ServerConn
    validated: bool = False
    last_seq: int = 0


@dataclass
class _ReplayState:
    """Applied envelopes kept for replaying state to a rejoining client."""
    last_pose: dict[str, dict] = field(default_factory=dict)
    last_zone: dict[str, dict] = field(default_factory=dict)
    task_ticks: list[dict] = field(default_factory=list)
    proposals: dict[tuple[str, str], dict] = field(default_factory=dict)
    results: list[dict] = field(default_factory=list)
    current_nav: dict | None = None


class SessionServer:
    """One session, exactly two participants, single-threaded event handling."""

    def __init__(
        self,
        config: SessionConfig,
        zone_map: ZoneMap,
        activity: Activity,
        recorder: TraceWriter | None = None,
    ) -> None:
        self.config = config
        self.zone_map = zone_map
        self.engine = ActivityEngine(activity, zone_map)
        self.recorder = recorder
        self._slots: dict[str, _Slot | None] = {"A": None, "B": None}
        self._by_conn: dict[int, _Slot] = {}
        self._server_seq = 0
        self._started = False
        self._start_now_ms: float = 0.0
        self._last_heartbeat_ms: float = -1.0
        self._last_stamp = 0
        self.live_zone: dict[str, str] = {}
        self.votes: dict[str, dict[str, str]] = {}
        self._replay = _ReplayState()
        self.protocol_errors = 0
        self.dropped_messages = 0
        self.closed = False

    # -- driver entry points ---------------------------------------------------

    def on_connect(self, conn: ServerConn, now_ms: float) -> None:
        free = next((r for r in ("A", "B") if self._slots[r] is None), None)
        if free is None:
            self._send_bye(conn, now_ms, {"reason": "session full"})
            conn.close()
            return
        slot = _Slot(role=free, conn=conn)
        self._slots[free] = slot
        self._by_conn[id(conn)] = slot
        self._send(
            conn,
            self._server_envelope(
                "hello",
                {
                    "role": free,
                    "session_id": self.config.session_id,
                    "map_hash": self.config.map_hash,
                },
                now_ms,
            ),
        )

    def on_line(self, conn: ServerConn, line: bytes, now_ms: float) -> None:
        slot = self._by_conn.get(id(conn))
        if slot is None:
            return  # already rejected/closed
        try:
            env = decode(line)
        except ProtocolError as exc:
            self._violation(slot, now_ms, f"bad envelope: {exc}")
            return
        if env.seq <= slot.last_seq:
            self._violation(
                slot, now_ms, f"seq regression: {env.seq} after {slot.last_seq}"
            )
            return
        slot.last_seq = env.seq

        if not slot.validated:
            if env.type != "hello":
                self._violation(slot, now_ms, f"expected hello, got {env.type}")
                return
            self._handle_hello(slot, env, now_ms)
            return
        if env.from_ != slot.role:
            self._violation(slot, now_ms, f"sender {env.from_} does not match role {slot.role}")
            return
        if env.type not in _CLIENT_KINDS:
            self._violation(slot, now_ms, f"clients may not send {env.type}")
            return
        handler = getattr(self, f"_on_{env.type}")
        handler(slot, env, now_ms)

    def on_disconnect(self, conn: ServerConn, now_ms: float) -> None:
        slot = self._by_conn.pop(id(conn), None)
        if slot is None:
            return
        self._slots[slot.role] = None
        if slot.validated:
            self._notify_peer_left(slot.role, "disconnected", now_ms)

    def tick(self, now_ms: float) -> None:
        """Periodic housekeeping; drives the 1 Hz heartbeat."""
        if not self._started:
            return
        if (
            self._last_heartbeat_ms < 0
            or now_ms - self._last_heartbeat_ms >= HEARTBEAT_INTERVAL_MS
        ):
            self._last_heartbeat_ms = now_ms
            self._broadcast(self._server_envelope("heartbeat", {}, now_ms))

    # -- client message handlers -------------------------------------------------

    def _handle_hello(self, slot: _Slot, env: Envelope, now_ms: float) -> None:
        presented = env.payload.get("map_hash")
        if presented != self.config.map_hash:
            self._send_bye(slot.conn, now_ms, {"reason": "map mismatch"})
            self._drop_slot(slot)
            return
        slot.validated = True
        self._record_event(envelope_doc(env))
        if self._started:
            self._replay_to(slot, now_ms)
        elif all(s is not None and s.validated for s in self._slots.values()):
            self._start_session(now_ms)

    def _on_pose(self, slot: _Slot, env: Envelope, now_ms: float) -> None:
        if not self._started:
            self.dropped_messages += 1
            return
        try:
            x = float(env.payload["x_mm"])
            y = float(env.payload["y_mm"])
            theta = float(env.payload.get("theta_rad", 0.0))
        except (KeyError, TypeError, ValueError):
            self._violation(slot, now_ms, "malformed pose payload")
            return
        t = self._session_t(now_ms)
        p = self.zone_map.clamped(Vec2(x, y))
        if self.recorder is not None:
            self.recorder.record_sample(
                TraceSample(
                    t_ms=t,
                    robot_id=slot.role,
                    x_mm=p.x_mm,
                    y_mm=p.y_mm,
                    theta_rad=theta,
                    zone_id=locate(self.zone_map, p),
                )
            )
        stamped = self._stamped(env, t)
        self._replay.last_pose[slot.role] = envelope_doc(stamped)
        self._relay(slot.role, stamped)

    def _on_zone(self, slot: _Slot, env: Envelope, now_ms: float) -> None:
        zone_id = env.payload.get("zone_id")
        if not isinstance(zone_id, str) or not self._zone_known(zone_id):
            self._violation(slot, now_ms, f"unknown zone {zone_id!r}")
            return
        self.live_zone[slot.role] = zone_id
        stamped = self._stamped(env, self._session_t(now_ms))
        doc = envelope_doc(stamped)
        self._replay.last_zone[slot.role] = doc
        self._record_event(doc)
        self._relay(slot.role, stamped)

    def _on_consensus_edge(self, slot: _Slot, env: Envelope, now_ms: float) -> None:
        if self.config.mode is not HapticMode.CONSENSUS:
            self._violation(slot, now_ms, "consensus_edge outside consensus mode")
            return
        if env.payload.get("edge") not in ("entered", "exited"):
            self._violation(slot, now_ms, "malformed consensus_edge payload")
            return
        stamped = self._stamped(env, self._session_t(now_ms))
        self._record_event(envelope_doc(stamped))
        self._relay(slot.role, stamped)

    def _on_task_tick(self, slot: _Slot, env: Envelope, now_ms: float) -> None:
        task_id = env.payload.get("task_id")
        t = self._session_t(now_ms)
        if not env.payload.get("done", True):
            self.dropped_messages += 1
            return
        if task_id not in self.engine.tasks:
            self.dropped_messages += 1
            return
        self.engine.tick_task(task_id, slot.role, t)
        stamped = self._stamped(env, t)
        doc = envelope_doc(stamped)
        self._replay.task_ticks.append(doc)
        self._record_event(doc)
        self._relay(slot.role, stamped)

    def _on_quiz_nav(self, slot: _Slot, env: Envelope, now_ms: float) -> None:
        q_id = env.payload.get("q_id")
        t = self._session_t(now_ms)
        if q_id not in self.engine.questions:
            self.dropped_messages += 1
            return
        self.engine.navigate(q_id, t)
        stamped = self._stamped(env, t)
        doc = envelope_doc(stamped)
        self._replay.current_nav = doc
        self._record_event(doc)
        self._relay(slot.role, stamped)

    def _on_propose(self, slot: _Slot, env: Envelope, now_ms: float) -> None:
        q_id = env.payload.get("q_id")
        zone_id = env.payload.get("zone_id")
        state = self.engine.questions.get(q_id)
        if state is None or state.result is not None or not self._zone_known(zone_id):
            self.dropped_messages += 1
            return
        self.engine.propose_answer(q_id, slot.role, zone_id)
        stamped = self._stamped(env, self._session_t(now_ms))
        doc = envelope_doc(stamped)
        self._replay.proposals[(q_id, slot.role)] = doc
        self._record_event(doc)
        self._relay(slot.role, stamped)

    def _on_agree(self, slot: _Slot, env: Envelope, now_ms: float) -> None:
        q_id = env.payload.get("q_id")
        zone_id = env.payload.get("zone_id")
        if q_id not in self.engine.questions or not self._zone_known(zone_id):
            self.dropped_messages += 1
            return
        t = self._session_t(now_ms)
        self.votes.setdefault(q_id, {})[slot.role] = zone_id
        stamped = self._stamped(env, t)
        self._record_event(envelope_doc(stamped))
        self._relay(slot.role, stamped)

        outcome = self.engine.try_submit(
            q_id,
            self.live_zone.get("A"),
            self.live_zone.get("B"),
            self.votes[q_id],
            t,
        )
        result = self._server_envelope(
            "submit_result",
            {
                "q_id": q_id,
                "accepted": outcome.accepted,
                "correct": outcome.correct,
                "reason": outcome.reason,
            },
            now_ms,
        )
        doc = envelope_doc(result)
        if outcome.accepted:
            self._replay.results.append(doc)
        self._record_event(doc)
        self._broadcast(result)

    def _on_bye(self, slot: _Slot, env: Envelope, now_ms: float) -> None:
        stamped = self._stamped(env, self._session_t(now_ms))
        self._record_event(envelope_doc(stamped))
        self._drop_slot(slot)
        self._notify_peer_left(slot.role, "left", now_ms)

    # -- session lifecycle -------------------------------------------------------

    def _start_session(self, now_ms: float) -> None:
        self._started = True
        self._start_now_ms = now_ms
        payload = self.config.to_payload()
        self._broadcast(self._server_envelope("session_start", payload, now_ms))
        self._record_event(
            envelope_doc(self._server_envelope("session_start", payload, now_ms))
        )
        self._last_heartbeat_ms = -1.0
        self.tick(now_ms)

    def _replay_to(self, slot: _Slot, now_ms: float) -> None:
        """Bring a rejoining client up to date using ordinary envelopes."""
        self._send(
            slot.conn,
            self._server_envelope("session_start", self.config.to_payload(), now_ms),
        )
        docs: list[dict] = []
        for role in ("A", "B"):
            if role in self._replay.last_zone:
                docs.append(self._replay.last_zone[role])
            if role in self._replay.last_pose:
                docs.append(self._replay.last_pose[role])
        docs.extend(self._replay.task_ticks)
        if self._replay.current_nav is not None:
            docs.append(self._replay.current_nav)
        docs.extend(self._replay.proposals.values())
        docs.extend(self._replay.results)
        for doc in docs:
            slot.conn.send_line(encode(self._env_from_doc(doc)))

    def session_ended(self) -> bool:
        return self._started and all(s is None for s in self._slots.values())

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        if self.recorder is not None:
            self.recorder.close()

    # -- helpers -------------------------------------------------------------------

    def _zone_known(self, zone_id: object) -> bool:
        return isinstance(zone_id, str) and any(z.id == zone_id for z in self.zone_map.zones)

    def _session_t(self, now_ms: float) -> int:
        if not self._started:
            return 0
        t = int(now_ms - self._start_now_ms)
        # Server stamps never run backwards even if the driver clock jitters.
        if t < self._last_stamp:
            t = self._last_stamp
        self._last_stamp = t
        return t

    def _server_envelope(self, kind: str, payload: dict, now_ms: float) -> Envelope:
        self._server_seq += 1
        return Envelope(
            type=kind,
            seq=self._server_seq,
            t_ms=self._session_t(now_ms),
            from_="server",
            payload=payload,
        )

    @staticmethod
    def _stamped(env: Envelope, t: int) -> Envelope:
        return Envelope(type=env.type, seq=env.seq, t_ms=t, from_=env.from_, payload=env.payload)

    @staticmethod
    def _env_from_doc(doc: dict) -> Envelope:
        return Envelope(
            type=doc["type"],
            seq=doc["seq"],
            t_ms=doc["t_ms"],
            from_=doc["from"],
            payload=doc["payload"],
        )

    def _send(self, conn: ServerConn, env: Envelope) -> None:
        conn.send_line(encode(env))

    def _send_bye(self, conn: ServerConn, now_ms: float, payload: dict) -> None:
        self._send(conn, self._server_envelope("bye", payload, now_ms))

    def _broadcast(self, env: Envelope) -> None:
        line = encode(env)
        for slot in self._slots.values():
            if slot is not None and slot.validated:
                slot.conn.send_line(line)

    def _relay(self, from_role: str, env: Envelope) -> None:
        peer_role = "B" if from_role == "A" else "A"
        peer = self._slots.get(peer_role)
        if peer is not None and peer.validated:
            peer.conn.send_line(encode(env))

    def _notify_peer_left(self, who: str, reason: str, now_ms: float) -> None:
        env = self._server_envelope("bye", {"who": who, "reason": reason}, now_ms)
        self._record_event(envelope_doc(env))
        self._broadcast(env)

    def _violation(self, slot: _Slot, now_ms: float, detail: str) -> None:
        """Disconnect an offending client, telling it and the peer why."""
        self.protocol_errors += 1
        self._send_bye(slot.conn, now_ms, {"reason": f"protocol violation: {detail}"})
        self._drop_slot(slot)
        if slot.validated:
            self._notify_peer_left(slot.role, "protocol violation", now_ms)

    def _drop_slot(self, slot: _Slot) -> None:
        self._by_conn.pop(id(slot.conn), None)
        if self._slots.get(slot.role) is slot:
            self._slots[slot.role] = None
        slot.conn.close()

    def _record_event(self, doc: dict) -> None:
        if self.recorder is not None:
            self.recorder.record_event(doc)
