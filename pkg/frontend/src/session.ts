/** Client-side session state, rebuilt purely from server envelopes.
 *
 * The client holds no truth of its own: on (re)connect the server replays
 * hello, session_start and the current activity state as ordinary envelopes,
 * and this reducer reconstructs the identical view.  The UI votes; only the
 * server decides submissions.
 */

import type { Envelope, SessionConfig, Sender } from "./protocol.js";
import type { PartnerView } from "./haptics.js";

export interface TaskView {
  taskId: string;
  text: string;
  doneBy: string | null;
}

export interface QuestionView {
  qId: string;
  text: string;
  proposals: Record<string, string>;
  result: { accepted: boolean; correct: boolean | null } | null;
}

export interface SubmitResult {
  qId: string;
  accepted: boolean;
  correct: boolean | null;
  reason: string | null;
}

export interface ActivityContent {
  tasks: { id: string; text: string }[];
  questions: { id: string; text: string }[];
}

export class SessionState {
  role: Sender | null = null;
  peerRole: Sender | null = null;
  sessionId: string | null = null;
  config: SessionConfig | null = null;
  started = false;
  clockMs = 0;
  partner: PartnerView | null = null;
  partnerPresent = true;
  rejectedReason: string | null = null;
  closed = false;
  tasks = new Map<string, TaskView>();
  questions = new Map<string, QuestionView>();
  questionOrder: string[] = [];
  currentQId: string | null = null;
  lastResult: SubmitResult | null = null;
  consensusPulseAt = -1;

  constructor(content: ActivityContent) {
    for (const t of content.tasks) {
      this.tasks.set(t.id, { taskId: t.id, text: t.text, doneBy: null });
    }
    for (const q of content.questions) {
      this.questions.set(q.id, { qId: q.id, text: q.text, proposals: {}, result: null });
      this.questionOrder.push(q.id);
    }
    if (this.questionOrder.length > 0) this.currentQId = this.questionOrder[0];
  }

  /** Apply one inbound envelope; returns it for chaining/logging. */
  apply(env: Envelope): Envelope {
    if (env.t_ms > this.clockMs) this.clockMs = env.t_ms;
    switch (env.type) {
      case "hello":
        if (env.from === "server") {
          this.role = env.payload.role as Sender;
          this.peerRole = this.role === "A" ? "B" : "A";
          this.sessionId = String(env.payload.session_id ?? "");
        }
        break;
      case "session_start":
        this.config = env.payload as unknown as SessionConfig;
        this.started = true;
        break;
      case "pose":
        if (env.from === this.peerRole) {
          const prev = this.partner;
          this.partner = {
            pose: {
              p: { x: Number(env.payload.x_mm), y: Number(env.payload.y_mm) },
              thetaRad: Number(env.payload.theta_rad ?? 0),
            },
            zoneId: prev?.zoneId ?? "",
            receivedTms: Math.max(env.t_ms, prev?.receivedTms ?? 0),
          };
          this.partnerPresent = true;
        }
        break;
      case "zone":
        if (env.from === this.peerRole) {
          const prev = this.partner;
          this.partner = {
            pose: prev?.pose ?? { p: { x: 0, y: 0 }, thetaRad: 0 },
            zoneId: String(env.payload.zone_id),
            receivedTms: Math.max(env.t_ms, prev?.receivedTms ?? 0),
          };
        }
        break;
      case "consensus_edge":
        if (env.payload.edge === "entered") this.consensusPulseAt = this.clockMs;
        break;
      case "task_tick": {
        const task = this.tasks.get(String(env.payload.task_id));
        if (task && task.doneBy === null) task.doneBy = env.from;
        break;
      }
      case "quiz_nav":
        if (this.questions.has(String(env.payload.q_id))) {
          this.currentQId = String(env.payload.q_id);
        }
        break;
      case "propose": {
        const q = this.questions.get(String(env.payload.q_id));
        if (q && q.result === null) {
          q.proposals[env.from] = String(env.payload.zone_id);
        }
        break;
      }
      case "submit_result": {
        const result: SubmitResult = {
          qId: String(env.payload.q_id),
          accepted: Boolean(env.payload.accepted),
          correct: (env.payload.correct ?? null) as boolean | null,
          reason: (env.payload.reason ?? null) as string | null,
        };
        this.lastResult = result;
        const q = this.questions.get(result.qId);
        if (q && result.accepted) {
          q.result = { accepted: true, correct: result.correct };
          const next = this.questionOrder.find((id) => this.questions.get(id)!.result === null);
          this.currentQId = next ?? null;
        }
        break;
      }
      case "bye": {
        const who = env.payload.who as string | undefined;
        if (who !== undefined && who === this.peerRole) {
          this.partnerPresent = false;
        } else if (who === undefined && env.from === "server") {
          this.rejectedReason = String(env.payload.reason ?? "closed");
          this.closed = true;
        }
        break;
      }
      default:
        break;
    }
    return env;
  }

  /** The client-side gate heuristic: enable "agree" only when the current
   * question is open and both robots' latest zones match.  The server still
   * makes the actual decision. */
  agreeEnabled(selfZone: string): boolean {
    if (this.currentQId === null) return false;
    const q = this.questions.get(this.currentQId);
    if (!q || q.result !== null) return false;
    if (!this.partner || !this.partnerPresent) return false;
    return this.partner.zoneId === selfZone;
  }

  partnerStaleMs(): number | null {
    if (!this.partner) return null;
    return Math.max(0, this.clockMs - this.partner.receivedTms);
  }

  quizDone(): boolean {
    return this.questionOrder.every((id) => this.questions.get(id)!.result !== null);
  }

  score(): number {
    let n = 0;
    for (const id of this.questionOrder) {
      const q = this.questions.get(id)!;
      if (q.result?.correct) n += 1;
    }
    return n;
  }
}
