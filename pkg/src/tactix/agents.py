"""Scripted participants and the deterministic paired-session runner.

An agent drags its robot through a zone itinerary with a proportional
controller, rests while dwelling (so a coupled partner can drag it away),
ticks tasks as it completes stops, then walks the quiz: navigate, move to the
policy zone, propose, vote, and react to gate rejections.  Every decision is
a function of the seeded script and the messages received, so paired runs are
bit-reproducible.
"""
from __future__ import annotations

import io
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .activity import Activity, load_default_activity
from .client import SessionClient
from .dynamics import DynamicsParams, RobotPose, RobotState, step
from .geometry import Vec2, clamp, clamp_norm
from .haptics import ConsensusEdge, HapticPipeline
from .protocol import Envelope, LatencyProfile, SessionConfig
from .server import SessionServer
from .simnet import SimEndpoint, SimScheduler, simulated_transport
from .trace import Trace, TraceWriter, parse_trace
from .zonemap import ZoneMap, load_default_map, locate, map_sha256, zone_centroid, default_map_bytes

SETTLE_MS = 300          # consecutive in-zone time before an agent votes
REVOTE_PATIENCE_MS = 2500
QUIZ_MIN_REVOTE_GAP_MS = 800


@dataclass(frozen=True)
class AgentScript:
    """Behavior parameters for one scripted participant."""
    itinerary: tuple[str, ...]
    dwell_ms: int = 3000
    drag_gain: float = 0.08      # force units per mm of target error
    noise_std_mm: float = 5.0    # per-stop Gaussian target jitter (clamped to 1.5 sigma)
    seed: int = 0
    quiz_policy: dict[str, str] | None = None  # default: the activity answer key
    disagree_first: bool = False
    stop_timeout_ms: int = 12000  # advance even if the coupling keeps dragging us out
    yield_ms: int = 2000          # time spent following a pull before fighting back
    start_xy: tuple[float, float] | None = None

    def to_json_dict(self) -> dict:
        return {
            "itinerary": list(self.itinerary),
            "dwell_ms": self.dwell_ms,
            "drag_gain": self.drag_gain,
            "noise_std_mm": self.noise_std_mm,
            "seed": self.seed,
            "quiz_policy": self.quiz_policy,
            "disagree_first": self.disagree_first,
            "stop_timeout_ms": self.stop_timeout_ms,
            "yield_ms": self.yield_ms,
            "start_xy": list(self.start_xy) if self.start_xy else None,
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "AgentScript":
        return AgentScript(
            itinerary=tuple(doc["itinerary"]),
            dwell_ms=int(doc.get("dwell_ms", 3000)),
            drag_gain=float(doc.get("drag_gain", 0.08)),
            noise_std_mm=float(doc.get("noise_std_mm", 5.0)),
            seed=int(doc.get("seed", 0)),
            quiz_policy=doc.get("quiz_policy"),
            disagree_first=bool(doc.get("disagree_first", False)),
            stop_timeout_ms=int(doc.get("stop_timeout_ms", 12000)),
            yield_ms=int(doc.get("yield_ms", 2000)),
            start_xy=tuple(doc["start_xy"]) if doc.get("start_xy") else None,
        )


def load_script_file(path: str | Path) -> AgentScript:
    return AgentScript.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def make_itinerary(zone_map: ZoneMap, seed: int, length: int = 6) -> tuple[str, ...]:
    """Seeded random walk over the organelles, no immediate repeats."""
    ids = [z.id for z in zone_map.organelles]
    if not ids:
        raise ValueError("map has no organelles")
    rng = random.Random(seed)
    stops: list[str] = []
    prev: str | None = None
    for _ in range(length):
        choices = [z for z in ids if z != prev] or ids
        prev = rng.choice(choices)
        stops.append(prev)
    return tuple(stops)


class ScriptedAgent:
    """Drives one robot through the session protocol in simulated time."""

    def __init__(
        self,
        script: AgentScript,
        zone_map: ZoneMap,
        activity: Activity,
        client: SessionClient,
        dynamics: DynamicsParams,
        f_max: float,
    ) -> None:
        self.script = script
        self.zone_map = zone_map
        self.activity = activity
        self.client = client
        self.dynamics = dynamics
        self.drag_clamp = 2.0 * f_max
        self.rng = random.Random(script.seed)
        start = script.start_xy or (zone_map.width_mm / 2.0, zone_map.height_mm / 2.0)
        self.state = RobotState(pose=RobotPose(p=Vec2(start[0], start[1])))
        self.pipeline: HapticPipeline | None = None
        self.policy = dict(script.quiz_policy or activity.answer_key())

        self.phase = "wait"
        self.stop_idx = -1
        self.target_zone: str | None = None
        self.target_point: Vec2 | None = None
        self.stop_started_ms = 0
        self.in_zone_ms = 0.0
        self.was_dwelling = False
        self.yield_until_ms: int | None = None
        self.task_queue = [t.task_id for t in activity.tasks]
        self.visited: list[tuple[str, int]] = []

        self.q_idx = -1
        self.q_id: str | None = None
        self.on_wrong_zone = False
        self.voted_at_ms: int | None = None
        self.settle_ms = 0.0
        self.results: dict[str, bool] = {}
        self.last_zone: str | None = None
        self.last_pose_sent_ms: float | None = None
        self.max_haptic_force = 0.0

    # -- per-tick ------------------------------------------------------------------

    def tick(self, sim_now_ms: float) -> None:
        self._consume_inbox()
        if not self.client.started or self.client.closed:
            return
        if self.pipeline is None:
            cfg = self.client.config
            assert cfg is not None
            self.pipeline = HapticPipeline(cfg.mode, cfg.coupling, cfg.vibration, self.zone_map)
            self.phase = "explore"
            self._advance_stop(self.client.clock_ms)
            zone = locate(self.zone_map, self.state.pose.p)
            self.last_zone = zone
            self.client.send_zone(zone)
            self.client.send_pose(self.state.pose.p, self.state.pose.theta_rad)
            self.last_pose_sent_ms = sim_now_ms

        now = self.client.clock_ms
        self_zone = self.last_zone or locate(self.zone_map, self.state.pose.p)
        result = self.pipeline.tick(self.state, self_zone, self.client.partner, now)
        if result.consensus_edge is not ConsensusEdge.NONE:
            self.client.send("consensus_edge", {"edge": result.consensus_edge.value})

        f_user, grasped = self._behavior_force(now)
        haptic_mag = result.force.norm()
        if haptic_mag > self.max_haptic_force:
            self.max_haptic_force = haptic_mag
        if grasped != self.state.grasped:
            self.state = RobotState(
                pose=self.state.pose,
                v=self.state.v,
                omega_rad_s=self.state.omega_rad_s,
                grasped=grasped,
            )
        self.state = step(self.state, f_user, result.force, self.dynamics, self.zone_map)

        zone = locate(self.zone_map, self.state.pose.p)
        if zone != self.last_zone:
            self.last_zone = zone
            self.client.send_zone(zone)

        pose_interval = 1000.0 / (self.client.config.pose_rate_hz if self.client.config else 20)
        if (
            self.last_pose_sent_ms is None
            or sim_now_ms - self.last_pose_sent_ms >= pose_interval - 1e-9
        ):
            self.client.send_pose(self.state.pose.p, self.state.pose.theta_rad)
            self.last_pose_sent_ms = sim_now_ms

        if self.phase in ("explore", "wander"):
            self._explore_step(now)
        elif self.phase == "quiz":
            self._quiz_step(now)

    def _consume_inbox(self) -> None:
        for env in self.client.drain_inbox():
            if env.type == "submit_result":
                self._on_submit_result(env)

    # -- exploration ------------------------------------------------------------

    def _behavior_force(self, now: int) -> tuple[Vec2, bool]:
        if self.target_point is None:
            return Vec2(0.0, 0.0), False
        inside = self.target_zone is not None and self.last_zone == self.target_zone
        if self.phase in ("explore", "wander"):
            if inside:
                # Dwell ungrasped, so a coupled partner can drag us along.
                self.was_dwelling = True
                self.yield_until_ms = None
                return Vec2(0.0, 0.0), False
            if self.was_dwelling:
                # Just pulled out of the zone: follow the pull for a while
                # before fighting back toward our own stop.
                self.was_dwelling = False
                self.yield_until_ms = now + self.script.yield_ms
            if self.yield_until_ms is not None:
                if now < self.yield_until_ms:
                    return Vec2(0.0, 0.0), False
                self.yield_until_ms = None
        err = self.target_point - self.state.pose.p
        force = clamp_norm(err.scaled(self.script.drag_gain), self.drag_clamp)
        return force, True

    def _explore_step(self, now: int) -> None:
        dt_ms = self.dynamics.dt_s * 1000.0
        if self.target_zone is not None and self.last_zone == self.target_zone:
            self.in_zone_ms += dt_ms
        done = self.in_zone_ms >= self.script.dwell_ms
        timed_out = now - self.stop_started_ms >= self.script.stop_timeout_ms
        if done or timed_out:
            if done and self.target_zone is not None:
                self.visited.append((self.target_zone, now))
            if self.phase == "explore" and self.task_queue:
                self.client.send("task_tick", {"task_id": self.task_queue.pop(0), "done": True})
            self._advance_stop(now)

    def _advance_stop(self, now: int) -> None:
        self.stop_idx += 1
        if self.phase == "explore" and self.stop_idx >= len(self.script.itinerary):
            while self.task_queue:
                self.client.send("task_tick", {"task_id": self.task_queue.pop(0), "done": True})
            self.phase = "quiz"
            self._next_question(now)
            return
        itinerary = self.script.itinerary
        zone_id = itinerary[self.stop_idx % len(itinerary)]
        self.target_zone = zone_id
        self.target_point = self._jittered_target(zone_id)
        self.stop_started_ms = now
        self.in_zone_ms = 0.0
        self.was_dwelling = False
        self.yield_until_ms = None

    def _jittered_target(self, zone_id: str) -> Vec2:
        c = zone_centroid(self.zone_map, zone_id)
        lim = 1.5 * self.script.noise_std_mm
        jx = clamp(self.rng.gauss(0.0, self.script.noise_std_mm), -lim, lim)
        jy = clamp(self.rng.gauss(0.0, self.script.noise_std_mm), -lim, lim)
        return self.zone_map.clamped(Vec2(c.x_mm + jx, c.y_mm + jy))

    # -- quiz ----------------------------------------------------------------------

    def _next_question(self, now: int) -> None:
        self.q_idx += 1
        if self.q_idx >= len(self.activity.questions):
            self.phase = "wander"
            self.stop_idx = -1
            self._advance_stop(now)
            return
        q = self.activity.questions[self.q_idx]
        self.q_id = q.q_id
        self.on_wrong_zone = self.script.disagree_first
        self.voted_at_ms = None
        self.settle_ms = 0.0
        self.client.send("quiz_nav", {"q_id": q.q_id})
        self._set_quiz_target()

    def _set_quiz_target(self) -> None:
        assert self.q_id is not None
        zone = self.policy.get(self.q_id)
        if zone is None:
            zone = self.zone_map.organelles[0].id
        if self.on_wrong_zone:
            zone = next(z.id for z in self.zone_map.organelles if z.id != zone)
        self.target_zone = zone
        self.target_point = self._quiz_anchor(zone)

    def _quiz_anchor(self, zone_id: str) -> Vec2:
        z = self.zone_map.zone(zone_id)
        if z.polygon:
            return zone_centroid(self.zone_map, zone_id)
        # Background answer: hold a clear patch of cytosol away from organelles.
        return Vec2(20.0, self.zone_map.height_mm - 20.0)

    def _quiz_step(self, now: int) -> None:
        if self.q_id is None:
            return
        dt_ms = self.dynamics.dt_s * 1000.0
        inside = self.last_zone == self.target_zone
        self.settle_ms = self.settle_ms + dt_ms if inside else 0.0
        if self.voted_at_ms is None:
            if self.settle_ms >= SETTLE_MS:
                self._vote(now)
        elif now - self.voted_at_ms >= REVOTE_PATIENCE_MS and inside:
            self._vote(now)  # partner raced us or the gate rejected silently lost traffic

    def _vote(self, now: int) -> None:
        assert self.q_id is not None and self.last_zone is not None
        self.client.send("propose", {"q_id": self.q_id, "zone_id": self.last_zone})
        self.client.send("agree", {"q_id": self.q_id, "zone_id": self.last_zone})
        self.voted_at_ms = now

    def _on_submit_result(self, env: Envelope) -> None:
        payload = env.payload
        q_id = payload.get("q_id")
        if q_id != self.q_id or self.phase != "quiz":
            return
        now = self.client.clock_ms
        if payload.get("accepted"):
            self.results[q_id] = bool(payload.get("correct"))
            self._next_question(now)
            return
        reason = payload.get("reason")
        if reason == "not_colocated":
            if self.on_wrong_zone:
                self.on_wrong_zone = False
                self._set_quiz_target()
                self.settle_ms = 0.0
                self.voted_at_ms = None
            else:
                # Re-arm; we revote once settled again after a short gap.
                if self.voted_at_ms is not None:
                    self.voted_at_ms = max(
                        self.voted_at_ms,
                        now - REVOTE_PATIENCE_MS + QUIZ_MIN_REVOTE_GAP_MS,
                    )
        elif reason == "already_answered":
            self.results.setdefault(q_id, False)
            self._next_question(now)
        # awaiting_partner: keep holding position; patience timer re-votes.


@dataclass
class SessionRun:
    """Everything a paired simulated session produced."""
    config: SessionConfig
    trace: Trace
    events: list[dict]
    trace_csv: str
    events_jsonl: str
    quiz_state: dict
    protocol_errors: int
    dropped_messages: int
    agent_results: dict[str, dict[str, bool]]
    visited: dict[str, list[tuple[str, int]]]
    mean_distance_mm: float
    received_pose_seqs: dict[str, list[int]]
    sent_pose_counts: dict[str, int]
    max_haptic_force: dict[str, float]

    def quiz_score(self) -> int:
        return sum(1 for ok in self.agent_results.get("A", {}).values() if ok)


class _ServerSideConn:
    """Adapter giving SessionServer a connection handle over a sim endpoint."""

    def __init__(self, endpoint: SimEndpoint) -> None:
        self.endpoint = endpoint

    def send_line(self, line: bytes) -> None:
        self.endpoint.send_line(line)

    def close(self) -> None:
        self.endpoint.close()


def run_pair(
    script_a: AgentScript,
    script_b: AgentScript,
    config: SessionConfig,
    latency: LatencyProfile,
    duration_s: float,
    zone_map: ZoneMap | None = None,
    activity: Activity | None = None,
    out_dir: str | Path | None = None,
) -> SessionRun:
    """Run a full two-agent session on the simulated network.

    Deterministic given (scripts, config, latency): the scheduler orders every
    event, both agents tick at the configured sim rate, poses decimate to the
    pose rate, and all randomness flows from the three seeds.
    """
    zone_map = zone_map or load_default_map()
    activity = activity or load_default_activity()
    if not config.map_hash:
        config = SessionConfig(
            session_id=config.session_id,
            mode=config.mode,
            coupling=config.coupling,
            vibration=config.vibration,
            map_hash=map_sha256(default_map_bytes()),
            pose_rate_hz=config.pose_rate_hz,
            sim_rate_hz=config.sim_rate_hz,
            dynamics=config.dynamics,
        )

    scheduler = SimScheduler()
    sample_io = io.StringIO()
    event_io = io.StringIO()
    digest = map_sha256(
        json.dumps(config.to_payload(), sort_keys=True).encode("utf-8")
    )
    recorder = TraceWriter(sample_io, event_io, config_digest=digest)
    server = SessionServer(config, zone_map, activity, recorder=recorder)

    received_pose_seqs: dict[str, list[int]] = {"A": [], "B": []}
    distance_accum = [0.0, 0]

    def wire_client(script: AgentScript, link_seed: int, connect_at: float) -> ScriptedAgent:
        profile = LatencyProfile(latency.base_delay_ms, latency.jitter_ms, link_seed)
        client_end, server_end = simulated_transport(scheduler, profile)
        conn = _ServerSideConn(server_end)
        server_end.on_line = lambda line: server.on_line(conn, line, scheduler.now_ms)
        server_end.on_close = lambda: server.on_disconnect(conn, scheduler.now_ms)

        client = SessionClient(config.map_hash, client_end.send_line)
        agent = ScriptedAgent(script, zone_map, activity, client, config.dynamics, config.coupling.f_max)

        def on_client_line(line: bytes) -> None:
            env = client.on_line(line)
            if env is not None and env.type == "pose":
                role = client.role or "?"
                received_pose_seqs.setdefault(role, []).append(env.seq)

        client_end.on_line = on_client_line
        scheduler.call_at(connect_at, lambda: server.on_connect(conn, scheduler.now_ms))
        return agent

    agent_a = wire_client(script_a, latency.seed * 2 + 1, 0.0)
    agent_b = wire_client(script_b, latency.seed * 2 + 2, 0.5)

    tick_ms = config.dynamics.dt_s * 1000.0
    duration_ms = duration_s * 1000.0

    def agent_loop(agent: ScriptedAgent, at: float) -> None:
        if at > duration_ms:
            return
        agent.tick(scheduler.now_ms)
        scheduler.call_at(at + tick_ms, lambda: agent_loop(agent, at + tick_ms))

    def measure_distance() -> None:
        if scheduler.now_ms <= duration_ms:
            d = (agent_a.state.pose.p - agent_b.state.pose.p).norm()
            distance_accum[0] += d
            distance_accum[1] += 1
            scheduler.call_after(100.0, measure_distance)

    def server_loop(at: float) -> None:
        if at > duration_ms:
            return
        server.tick(scheduler.now_ms)
        scheduler.call_at(at + 100.0, lambda: server_loop(at + 100.0))

    scheduler.call_at(1.0, lambda: agent_loop(agent_a, 1.0))
    scheduler.call_at(1.5, lambda: agent_loop(agent_b, 1.5))
    scheduler.call_at(2.0, lambda: server_loop(2.0))
    scheduler.call_at(2.5, measure_distance)

    scheduler.run_until(duration_ms)
    # Let in-flight traffic land before the byes tear the links down.
    grace_ms = 2.0 * (latency.base_delay_ms + latency.jitter_ms) + 100.0
    scheduler.run_until(duration_ms + grace_ms)
    for agent in (agent_a, agent_b):
        agent._consume_inbox()
        if agent.client.started and not agent.client.closed:
            agent.client.send("bye", {"reason": "done"})
    scheduler.drain(limit_ms=duration_ms + grace_ms + 10_000.0)
    server.close()

    pose_counts = {"A": agent_a.client.poses_sent, "B": agent_b.client.poses_sent}
    trace = parse_trace(sample_io.getvalue())
    events = [json.loads(line) for line in event_io.getvalue().splitlines() if line]
    run = SessionRun(
        config=config,
        trace=trace,
        events=events,
        trace_csv=sample_io.getvalue(),
        events_jsonl=event_io.getvalue(),
        quiz_state=server.engine.snapshot(),
        protocol_errors=server.protocol_errors,
        dropped_messages=server.dropped_messages,
        agent_results={
            "A": dict(agent_a.results),
            "B": dict(agent_b.results),
        },
        visited={
            "A": list(agent_a.visited),
            "B": list(agent_b.visited),
        },
        mean_distance_mm=(distance_accum[0] / distance_accum[1]) if distance_accum[1] else 0.0,
        received_pose_seqs=received_pose_seqs,
        sent_pose_counts=pose_counts,
        max_haptic_force={"A": agent_a.max_haptic_force, "B": agent_b.max_haptic_force},
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trace.csv").write_text(run.trace_csv, encoding="utf-8")
        (out / "events.jsonl").write_text(run.events_jsonl, encoding="utf-8")
        (out / "quiz_state.json").write_text(
            json.dumps(run.quiz_state, indent=2, sort_keys=True), encoding="utf-8"
        )
    return run
