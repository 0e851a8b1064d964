import { describe, expect, it } from "vitest";

import type { Envelope } from "../src/protocol.js";
import { SessionState, type ActivityContent } from "../src/session.js";

const CONTENT: ActivityContent = {
  tasks: [
    { id: "t1", text: "find the control centre" },
    { id: "t2", text: "find the enzymes" },
  ],
  questions: [
    { id: "q1", text: "genetic material?" },
    { id: "q2", text: "protein export?" },
  ],
};

function env(partial: Partial<Envelope> & { type: Envelope["type"] }): Envelope {
  return { v: 1, seq: 1, t_ms: 0, from: "server", payload: {}, ...partial };
}

function startedSession(): SessionState {
  const s = new SessionState(CONTENT);
  s.apply(env({ type: "hello", payload: { role: "A", session_id: "s1" } }));
  s.apply(
    env({
      type: "session_start",
      payload: {
        session_id: "s1",
        mode: "co_location",
        coupling: { k: 0.05, deadzone_mm: 10, f_max: 2, stale_ms: 500, decay_ms: 250, symmetric: true },
        vibration: { amplitude: 0.3, freq_hz: 15 },
        map_hash: "h",
        pose_rate_hz: 20,
        sim_rate_hz: 100,
        dynamics: { mass_eq: 0.01, damping: 0.08, v_max: 185, dt_s: 0.01 },
      },
    }),
  );
  return s;
}

describe("session state reducer", () => {
  it("assigns role from the server hello", () => {
    const s = new SessionState(CONTENT);
    s.apply(env({ type: "hello", payload: { role: "B", session_id: "s1" } }));
    expect(s.role).toBe("B");
    expect(s.peerRole).toBe("A");
  });

  it("tracks the partner view from relayed pose and zone events", () => {
    const s = startedSession();
    s.apply(env({ type: "pose", from: "B", t_ms: 100, payload: { x_mm: 10, y_mm: 20, theta_rad: 0 } }));
    expect(s.partner?.pose.p).toEqual({ x: 10, y: 20 });
    expect(s.partner?.receivedTms).toBe(100);
    s.apply(env({ type: "zone", from: "B", t_ms: 150, payload: { zone_id: "nucleus" } }));
    expect(s.partner?.zoneId).toBe("nucleus");
    expect(s.partner?.receivedTms).toBe(150);
    // own echoes are ignored
    s.apply(env({ type: "pose", from: "A", t_ms: 400, payload: { x_mm: 99, y_mm: 99 } }));
    expect(s.partner?.pose.p).toEqual({ x: 10, y: 20 });
    expect(s.partnerStaleMs()).toBe(250);
  });

  it("clock never runs backwards", () => {
    const s = startedSession();
    s.apply(env({ type: "heartbeat", t_ms: 5000 }));
    s.apply(env({ type: "pose", from: "B", t_ms: 4000, payload: { x_mm: 0, y_mm: 0 } }));
    expect(s.clockMs).toBe(5000);
  });

  it("enables agree only when co-located on an open question", () => {
    const s = startedSession();
    expect(s.agreeEnabled("nucleus")).toBe(false); // no partner yet
    s.apply(env({ type: "zone", from: "B", t_ms: 10, payload: { zone_id: "golgi" } }));
    expect(s.agreeEnabled("nucleus")).toBe(false); // different zones
    s.apply(env({ type: "zone", from: "B", t_ms: 20, payload: { zone_id: "nucleus" } }));
    expect(s.agreeEnabled("nucleus")).toBe(true);
    s.apply(
      env({
        type: "submit_result",
        t_ms: 30,
        payload: { q_id: "q1", accepted: true, correct: true, reason: null },
      }),
    );
    expect(s.currentQId).toBe("q2"); // auto-advance to the next open question
    s.currentQId = "q1";
    expect(s.agreeEnabled("nucleus")).toBe(false); // answered question stays closed
  });

  it("renders rejections verbatim and accepts results once", () => {
    const s = startedSession();
    s.apply(
      env({
        type: "submit_result",
        payload: { q_id: "q1", accepted: false, correct: null, reason: "not_colocated" },
      }),
    );
    expect(s.lastResult).toEqual({ qId: "q1", accepted: false, correct: null, reason: "not_colocated" });
    expect(s.questions.get("q1")!.result).toBeNull();
    s.apply(
      env({
        type: "submit_result",
        payload: { q_id: "q1", accepted: true, correct: false, reason: null },
      }),
    );
    expect(s.questions.get("q1")!.result).toEqual({ accepted: true, correct: false });
    expect(s.score()).toBe(0);
  });

  it("tracks tasks, proposals and quiz navigation from either side", () => {
    const s = startedSession();
    s.apply(env({ type: "task_tick", from: "B", t_ms: 9, payload: { task_id: "t2", done: true } }));
    expect(s.tasks.get("t2")!.doneBy).toBe("B");
    s.apply(env({ type: "task_tick", from: "A", t_ms: 11, payload: { task_id: "t2", done: true } }));
    expect(s.tasks.get("t2")!.doneBy).toBe("B"); // first ticker wins
    s.apply(env({ type: "propose", from: "B", payload: { q_id: "q1", zone_id: "golgi" } }));
    expect(s.questions.get("q1")!.proposals).toEqual({ B: "golgi" });
    s.apply(env({ type: "quiz_nav", from: "B", payload: { q_id: "q2" } }));
    expect(s.currentQId).toBe("q2");
  });

  it("marks the partner offline on the server's peer-left bye", () => {
    const s = startedSession();
    s.apply(env({ type: "zone", from: "B", t_ms: 10, payload: { zone_id: "nucleus" } }));
    s.apply(env({ type: "bye", payload: { who: "B", reason: "disconnected" } }));
    expect(s.partnerPresent).toBe(false);
    expect(s.closed).toBe(false);
    expect(s.agreeEnabled("nucleus")).toBe(false);
  });

  it("records a session rejection", () => {
    const s = new SessionState(CONTENT);
    s.apply(env({ type: "bye", payload: { reason: "session full" } }));
    expect(s.closed).toBe(true);
    expect(s.rejectedReason).toBe("session full");
  });

  it("reconstructs the same view from a replayed event stream (stateless client)", () => {
    const stream: Envelope[] = [
      env({ type: "hello", payload: { role: "A", session_id: "s1" } }),
      env({ type: "session_start", payload: startedSession().config as unknown as Record<string, unknown> }),
      env({ type: "zone", from: "B", t_ms: 10, payload: { zone_id: "nucleus" } }),
      env({ type: "pose", from: "B", t_ms: 20, payload: { x_mm: 5, y_mm: 6 } }),
      env({ type: "task_tick", from: "A", t_ms: 30, payload: { task_id: "t1", done: true } }),
      env({ type: "quiz_nav", from: "A", t_ms: 40, payload: { q_id: "q1" } }),
      env({ type: "propose", from: "A", t_ms: 50, payload: { q_id: "q1", zone_id: "nucleus" } }),
      env({
        type: "submit_result",
        t_ms: 60,
        payload: { q_id: "q1", accepted: true, correct: true, reason: null },
      }),
    ];
    const live = new SessionState(CONTENT);
    stream.forEach((e) => live.apply(e));
    const rejoined = new SessionState(CONTENT);
    stream.forEach((e) => rejoined.apply(e));
    expect(JSON.stringify(rejoined)).toBe(JSON.stringify(live));
    expect(rejoined.score()).toBe(1);
  });
});
