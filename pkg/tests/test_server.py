import io
import json

import pytest

from tactix.activity import load_default_activity
from tactix.haptics import HapticMode
from tactix.protocol import Envelope, SessionConfig, decode, encode
from tactix.server import SessionServer
from tactix.trace import TraceWriter
from tactix.zonemap import default_map_bytes, load_default_map, map_sha256

MAP = load_default_map()
ACTIVITY = load_default_activity()
MAP_HASH = map_sha256(default_map_bytes())


class FakeConn:
    def __init__(self, name):
        self.name = name
        self.lines = []
        self.closed = False

    def send_line(self, line):
        self.lines.append(decode(line))

    def close(self):
        self.closed = True

    def take(self):
        out, self.lines = self.lines, []
        return out


def make_server(mode=HapticMode.CO_LOCATION, recorder=None):
    config = SessionConfig(session_id="s", mode=mode, map_hash=MAP_HASH)
    return SessionServer(config, MAP, ACTIVITY, recorder=recorder)


def hello(conn_env_role, seq=1, map_hash=MAP_HASH):
    return encode(Envelope("hello", seq, 0, conn_env_role, {"map_hash": map_hash}))


def join_two(server, now=0.0):
    a, b = FakeConn("a"), FakeConn("b")
    server.on_connect(a, now)
    server.on_connect(b, now)
    assert a.take()[0].payload["role"] == "A"
    assert b.take()[0].payload["role"] == "B"
    server.on_line(a, hello("A"), now)
    server.on_line(b, hello("B"), now)
    return a, b


def test_roles_assigned_in_join_order_and_session_start():
    server = make_server()
    a, b = join_two(server)
    types_a = [e.type for e in a.take()]
    types_b = [e.type for e in b.take()]
    assert "session_start" in types_a and "session_start" in types_b


def test_third_client_rejected_session_full():
    server = make_server()
    join_two(server)
    c = FakeConn("c")
    server.on_connect(c, 10.0)
    assert c.lines[0].type == "bye"
    assert c.lines[0].payload["reason"] == "session full"
    assert c.closed


def test_map_hash_mismatch_rejected():
    server = make_server()
    b = FakeConn("b")
    server.on_connect(b, 0.0)
    server.on_line(b, hello("A", map_hash="0" * 64), 0.0)
    byes = [e for e in b.lines if e.type == "bye"]
    assert byes and byes[0].payload["reason"] == "map mismatch"
    assert b.closed


def test_slot_freed_after_rejection():
    server = make_server()
    bad = FakeConn("bad")
    server.on_connect(bad, 0.0)
    server.on_line(bad, hello("A", map_hash="f" * 64), 0.0)
    good = FakeConn("good")
    server.on_connect(good, 1.0)
    assert good.lines[0].payload["role"] == "A"


def test_seq_regression_disconnects_offender():
    server = make_server()
    a, b = join_two(server)
    env = Envelope("pose", 2, 0, "A", {"x_mm": 1.0, "y_mm": 1.0, "theta_rad": 0.0})
    server.on_line(a, encode(env), 10.0)
    stale = Envelope("pose", 2, 0, "A", {"x_mm": 2.0, "y_mm": 2.0, "theta_rad": 0.0})
    server.on_line(a, encode(stale), 20.0)
    assert a.closed
    assert server.protocol_errors == 1
    byes = [e for e in a.take() if e.type == "bye"]
    assert "seq regression" in byes[-1].payload["reason"]
    # peer is told
    assert any(e.type == "bye" and e.payload.get("who") == "A" for e in b.take())


def test_pose_relay_is_stamped_and_preserves_sender():
    server = make_server()
    a, b = join_two(server, now=1000.0)
    b.take()
    env = Envelope("pose", 2, 0, "A", {"x_mm": 10.0, "y_mm": 20.0, "theta_rad": 0.5})
    server.on_line(a, encode(env), 1500.0)
    relayed = [e for e in b.take() if e.type == "pose"]
    assert len(relayed) == 1
    assert relayed[0].from_ == "A"
    assert relayed[0].seq == 2
    assert relayed[0].t_ms == 500  # stamped with session clock, not sender clock
    assert relayed[0].payload["x_mm"] == 10.0


def test_unknown_type_is_protocol_violation():
    server = make_server()
    a, _ = join_two(server)
    bad = b'{"v":1,"type":"warp","seq":2,"t_ms":0,"from":"A","payload":{}}\n'
    server.on_line(a, bad.strip(), 0.0)
    assert a.closed and server.protocol_errors == 1


def test_consensus_edge_rejected_in_colocation_mode():
    server = make_server(HapticMode.CO_LOCATION)
    a, _ = join_two(server)
    env = Envelope("consensus_edge", 2, 0, "A", {"edge": "entered"})
    server.on_line(a, encode(env), 0.0)
    assert a.closed and server.protocol_errors == 1


def test_consensus_edge_relayed_in_consensus_mode():
    server = make_server(HapticMode.CONSENSUS)
    a, b = join_two(server)
    b.take()
    env = Envelope("consensus_edge", 2, 0, "A", {"edge": "entered"})
    server.on_line(a, encode(env), 0.0)
    assert any(e.type == "consensus_edge" for e in b.take())
    assert server.protocol_errors == 0


def test_heartbeat_cadence():
    server = make_server()
    a, b = join_two(server, now=0.0)
    a.take()
    server.tick(500.0)
    server.tick(1000.0)
    server.tick(1999.0)
    server.tick(2001.0)
    beats = [e for e in a.take() if e.type == "heartbeat"]
    assert len(beats) == 2  # at 1000 and 2001 (session_start tick counts as the first)
    ts = [e.t_ms for e in beats]
    assert ts == sorted(ts)


def test_quiz_gate_over_the_wire():
    server = make_server()
    a, b = join_two(server)
    a.take(), b.take()
    seq_a, seq_b = 1, 1

    def send(conn, role, kind, payload, now):
        nonlocal seq_a, seq_b
        if role == "A":
            seq_a += 1
            seq = seq_a
        else:
            seq_b += 1
            seq = seq_b
        server.on_line(conn, encode(Envelope(kind, seq, 0, role, payload)), now)

    send(a, "A", "zone", {"zone_id": "nucleus"}, 10.0)
    send(b, "B", "zone", {"zone_id": "golgi"}, 10.0)
    send(a, "A", "agree", {"q_id": "q1", "zone_id": "nucleus"}, 20.0)
    results = [e for e in a.take() if e.type == "submit_result"]
    assert results[-1].payload == {
        "q_id": "q1",
        "accepted": False,
        "correct": None,
        "reason": "awaiting_partner",
    }
    send(b, "B", "agree", {"q_id": "q1", "zone_id": "golgi"}, 30.0)
    results = [e for e in b.take() if e.type == "submit_result"]
    assert results[-1].payload["reason"] == "not_colocated"
    send(b, "B", "zone", {"zone_id": "nucleus"}, 40.0)
    send(b, "B", "agree", {"q_id": "q1", "zone_id": "nucleus"}, 50.0)
    results = [e for e in a.take() if e.type == "submit_result"]
    assert results[-1].payload["accepted"] is True
    assert results[-1].payload["correct"] is True
    # both server-side state and broadcast agree
    assert server.engine.questions["q1"].result["correct"] is True


def test_task_tick_applied_and_relayed():
    server = make_server()
    a, b = join_two(server)
    b.take()
    env = Envelope("task_tick", 2, 0, "A", {"task_id": "t1", "done": True})
    server.on_line(a, encode(env), 100.0)
    assert server.engine.tasks["t1"].done_by is not None
    assert any(e.type == "task_tick" for e in b.take())


def test_rejoin_replays_state():
    sample_io, event_io = io.StringIO(), io.StringIO()
    recorder = TraceWriter(sample_io, event_io, config_digest="x")
    server = make_server(recorder=recorder)
    a, b = join_two(server)
    a.take(), b.take()
    server.on_line(a, encode(Envelope("zone", 2, 0, "A", {"zone_id": "nucleus"})), 10.0)
    server.on_line(
        a, encode(Envelope("pose", 3, 0, "A", {"x_mm": 150.0, "y_mm": 105.0, "theta_rad": 0.0})), 20.0
    )
    server.on_line(a, encode(Envelope("task_tick", 4, 0, "A", {"task_id": "t1", "done": True})), 30.0)
    server.on_line(a, encode(Envelope("quiz_nav", 5, 0, "A", {"q_id": "q1"})), 40.0)

    # B drops and rejoins
    server.on_disconnect(b, 50.0)
    assert any(e.type == "bye" and e.payload.get("who") == "B" for e in a.take())
    b2 = FakeConn("b2")
    server.on_connect(b2, 60.0)
    assert b2.lines[0].payload["role"] == "B"
    server.on_line(b2, hello("B"), 60.0)
    kinds = [e.type for e in b2.take()]
    assert kinds[1] == "session_start"
    assert "zone" in kinds and "pose" in kinds and "task_tick" in kinds and "quiz_nav" in kinds


def test_recorder_gets_samples_and_events():
    sample_io, event_io = io.StringIO(), io.StringIO()
    recorder = TraceWriter(sample_io, event_io, config_digest="d")
    server = make_server(recorder=recorder)
    a, b = join_two(server, now=0.0)
    env = Envelope("pose", 2, 0, "A", {"x_mm": 150.0, "y_mm": 105.0, "theta_rad": 0.0})
    server.on_line(a, encode(env), 100.0)
    env2 = Envelope("zone", 3, 0, "A", {"zone_id": "nucleus"})
    server.on_line(a, encode(env2), 110.0)
    server.close()
    rows = [l for l in sample_io.getvalue().splitlines() if not l.startswith(("#", "t_ms"))]
    assert rows == ["100,A,150.000,105.000,0.000,nucleus"]
    kinds = [json.loads(l)["type"] for l in event_io.getvalue().splitlines()]
    assert "session_start" in kinds and "zone" in kinds and "pose" not in kinds


def test_out_of_bounds_pose_clamped_into_map():
    sample_io = io.StringIO()
    recorder = TraceWriter(sample_io, None, config_digest="d")
    server = make_server(recorder=recorder)
    a, _ = join_two(server)
    env = Envelope("pose", 2, 0, "A", {"x_mm": 9999.0, "y_mm": -5.0, "theta_rad": 0.0})
    server.on_line(a, encode(env), 10.0)
    row = [l for l in sample_io.getvalue().splitlines() if l[0].isdigit()][0]
    _, _, x, y, _, zone = row.split(",")
    assert float(x) == 297.0 and float(y) == 0.0
    assert zone  # locate succeeded on the clamped point
