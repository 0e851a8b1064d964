/** Browser entry point: join the session, run the local 100 Hz robot sim,
 * stream poses at the configured rate, render map + partner ghost + haptic
 * overlays, and drive the task/quiz panel. */

import { clampToMap, locate, parseMap, sha256Hex, zoneById, type ZoneMap } from "./mapdata.js";
import { initialState, step, type RobotState } from "./dynamics.js";
import { HapticPipeline, type PartnerView } from "./haptics.js";
import { EnvelopeSender, decodeLine, type Envelope, type SessionConfig } from "./protocol.js";
import { SessionState, type ActivityContent } from "./session.js";
import { WsLink } from "./net.js";
import { canvasSize, draw, pxToMm } from "./render.js";
import { Panel } from "./ui.js";
import { clampNorm, lerp, norm, scale, sub, type Vec2 } from "./vec.js";

const DRAG_GAIN = 0.08; // same proportional-drag law as the scripted agents
const GHOST_INTERP_MS = 100;

interface Boot {
  map: ZoneMap;
  mapHash: string;
  activity: ActivityContent;
  wsUrl: string;
}

async function boot(): Promise<Boot> {
  const meta = await (await fetch("/session")).json();
  const mapRes = await fetch(meta.map_url);
  const mapBytes = await mapRes.arrayBuffer();
  const mapHash = await sha256Hex(mapBytes);
  const map = parseMap(JSON.parse(new TextDecoder().decode(mapBytes)));
  const activityDoc = await (await fetch(meta.activity_url)).json();
  const activity: ActivityContent = {
    tasks: activityDoc.tasks.map((t: { id: string; text: string }) => ({ id: t.id, text: t.text })),
    questions: activityDoc.questions.map((q: { id: string; text: string }) => ({
      id: q.id,
      text: q.text,
    })),
  };
  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  return { map, mapHash, activity, wsUrl: `${proto}//${location.host}${meta.ws_path}` };
}

function makeApp(b: Boot): void {
  const canvas = document.getElementById("map") as HTMLCanvasElement;
  const { w, h } = canvasSize(b.map);
  canvas.width = w;
  canvas.height = h;
  const ctx = canvas.getContext("2d")!;

  let state = new SessionState(b.activity);
  let robot: RobotState = initialState({ x: b.map.widthMm / 2, y: b.map.heightMm / 2 });
  let pipeline: HapticPipeline | null = null;
  let config: SessionConfig | null = null;
  let selfZone = b.map.backgroundZoneId;
  let dragTarget: Vec2 | null = null;
  let lastPoseSent = 0;
  let lastBandForce = 0;
  let shakeUntil = 0;
  let ghostDrawn: Vec2 | null = null;
  let simAccumulator = 0;
  let lastFrame = performance.now();

  const panel = new Panel(document.getElementById("panel")!, {
    onTick: (taskId) => sender.send("task_tick", { task_id: taskId, done: true }),
    onNav: (qId) => {
      state.currentQId = qId;
      sender.send("quiz_nav", { q_id: qId });
      panel.render(state, selfZone);
    },
    onAgree: () => {
      if (!state.currentQId) return;
      sender.send("propose", { q_id: state.currentQId, zone_id: selfZone });
      sender.send("agree", { q_id: state.currentQId, zone_id: selfZone });
    },
  });

  const link = new WsLink(b.wsUrl, {
    onLine: (line) => {
      let env: Envelope;
      try {
        env = decodeLine(line);
      } catch {
        return;
      }
      handle(env);
    },
    onOpen: () => panel.setStatus("connected, waiting for session…"),
    onDown: (retry) => {
      panel.setStatus(retry ? "connection lost — reconnecting…" : "disconnected", true);
      if (retry) {
        // Stateless client: rebuild everything from the server's replay.
        state = new SessionState(b.activity);
        pipeline = null;
        config = null;
        sender.role = "A";
      }
    },
  });
  const sender = new EnvelopeSender((line) => link.send(line), "A", () => state.clockMs);

  function handle(env: Envelope): void {
    state.apply(env);
    if (env.type === "hello" && env.from === "server") {
      sender.role = state.role ?? "A";
      sender.send("hello", { map_hash: b.mapHash });
      panel.setStatus(`joined as ${state.role}`);
    } else if (env.type === "session_start") {
      config = state.config;
      pipeline = new HapticPipeline(
        config!.mode,
        config!.coupling,
        config!.vibration,
        b.map,
      );
      sender.send("zone", { zone_id: selfZone });
      sender.send("pose", { x_mm: robot.p.x, y_mm: robot.p.y, theta_rad: robot.thetaRad });
      panel.setStatus(`session ${state.sessionId} — mode ${config!.mode}`);
    } else if (env.type === "consensus_edge" && env.payload.edge === "entered") {
      shakeUntil = performance.now() + 400;
    } else if (env.type === "submit_result" || env.type === "task_tick" || env.type === "propose" || env.type === "quiz_nav") {
      panel.render(state, selfZone);
    } else if (env.type === "bye" && state.closed) {
      panel.setStatus(`rejected: ${state.rejectedReason}`, true);
      link.stop();
    }
  }

  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    dragTarget = clampToMap(b.map, pxToMm({ x: ev.offsetX, y: ev.offsetY }));
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (dragTarget !== null) {
      dragTarget = clampToMap(b.map, pxToMm({ x: ev.offsetX, y: ev.offsetY }));
    }
  });
  const release = () => {
    dragTarget = null;
  };
  canvas.addEventListener("pointerup", release);
  canvas.addEventListener("pointercancel", release);

  function simTick(nowMs: number): void {
    if (!config || !pipeline || !state.started) return;
    const partner: PartnerView | null = state.partner;
    const result = pipeline.tick(robot.p, dragTarget !== null, selfZone, partner, state.clockMs);
    lastBandForce = config.mode === "co_location" ? norm(result.force) : 0;
    if (result.edge !== "none") {
      sender.send("consensus_edge", { edge: result.edge });
      if (result.edge === "entered") shakeUntil = performance.now() + 400;
    }
    let fUser = { x: 0, y: 0 };
    if (dragTarget !== null) {
      fUser = clampNorm(scale(sub(dragTarget, robot.p), DRAG_GAIN), 2 * config.coupling.f_max);
    }
    robot.grasped = dragTarget !== null;
    robot = step(robot, fUser, result.force, config.dynamics, b.map);

    const zone = locate(b.map, robot.p);
    if (zone !== selfZone) {
      selfZone = zone;
      sender.send("zone", { zone_id: zone });
      panel.showZone(zoneById(b.map, zone));
      panel.render(state, selfZone);
    }
    const poseInterval = 1000 / config.pose_rate_hz;
    if (nowMs - lastPoseSent >= poseInterval) {
      sender.send("pose", { x_mm: robot.p.x, y_mm: robot.p.y, theta_rad: robot.thetaRad });
      lastPoseSent = nowMs;
    }
  }

  function frame(now: number): void {
    const dtMs = Math.min(now - lastFrame, 250);
    lastFrame = now;
    if (config) {
      const stepMs = config.dynamics.dt_s * 1000;
      simAccumulator += dtMs;
      while (simAccumulator >= stepMs) {
        simAccumulator -= stepMs;
        simTick(now);
      }
    }
    const target = state.partner?.pose.p ?? null;
    if (target) {
      // fixed interpolation delay for smooth ghost motion
      ghostDrawn = ghostDrawn
        ? lerp(ghostDrawn, target, Math.min(1, dtMs / GHOST_INTERP_MS))
        : target;
    }
    draw(ctx, {
      map: b.map,
      selfP: robot.p,
      selfZone,
      role: state.role ?? "?",
      ghostP: ghostDrawn,
      ghostStaleMs: state.partnerStaleMs(),
      partnerPresent: state.partnerPresent,
      bandForce: lastBandForce,
      bandMax: config?.coupling.f_max ?? 2,
      shake: performance.now() < shakeUntil ? (shakeUntil - performance.now()) / 400 : 0,
      mode: config?.mode ?? "…",
    });
    requestAnimationFrame(frame);
  }

  panel.showZone(zoneById(b.map, selfZone));
  panel.render(state, selfZone);
  link.start();
  requestAnimationFrame(frame);
}

boot()
  .then(makeApp)
  .catch((err) => {
    const el = document.getElementById("panel");
    if (el) el.textContent = `failed to load session: ${err}`;
  });
