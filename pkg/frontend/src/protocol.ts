/** Wire protocol: version-1 newline-delimited JSON envelopes.
 *
 * Mirrors the server contract exactly; the same lines travel over the
 * WebSocket (one or more per text frame) and over raw TCP.
 */

export const PROTOCOL_VERSION = 1;

export type Sender = "A" | "B" | "server";

export const MESSAGE_KINDS = [
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
] as const;

export type MessageKind = (typeof MESSAGE_KINDS)[number];

export interface Envelope {
  v: number;
  type: MessageKind;
  seq: number;
  t_ms: number;
  from: Sender;
  payload: Record<string, unknown>;
}

export interface CouplingParams {
  k: number;
  deadzone_mm: number;
  f_max: number;
  stale_ms: number;
  decay_ms: number;
  symmetric: boolean;
}

export interface VibrationParams {
  amplitude: number;
  freq_hz: number;
}

export interface DynamicsParams {
  mass_eq: number;
  damping: number;
  v_max: number;
  dt_s: number;
}

export type HapticMode = "co_location" | "consensus" | "none";

export interface SessionConfig {
  session_id: string;
  mode: HapticMode;
  coupling: CouplingParams;
  vibration: VibrationParams;
  map_hash: string;
  pose_rate_hz: number;
  sim_rate_hz: number;
  dynamics: DynamicsParams;
}

export class ProtocolError extends Error {}

const KIND_SET = new Set<string>(MESSAGE_KINDS);
const SENDER_SET = new Set<string>(["A", "B", "server"]);

export function encodeEnvelope(env: Envelope): string {
  return JSON.stringify(env) + "\n";
}

export function decodeLine(line: string): Envelope {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch (err) {
    throw new ProtocolError(`malformed envelope JSON: ${String(err)}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new ProtocolError("envelope must be a JSON object");
  }
  const d = doc as Record<string, unknown>;
  if (d.v !== PROTOCOL_VERSION) {
    throw new ProtocolError(`protocol version mismatch: ${String(d.v)}`);
  }
  if (typeof d.type !== "string" || !KIND_SET.has(d.type)) {
    throw new ProtocolError(`unknown message type: ${String(d.type)}`);
  }
  if (typeof d.from !== "string" || !SENDER_SET.has(d.from)) {
    throw new ProtocolError(`unknown sender: ${String(d.from)}`);
  }
  if (!Number.isInteger(d.seq) || !Number.isInteger(d.t_ms)) {
    throw new ProtocolError("seq and t_ms must be integers");
  }
  if (typeof d.payload !== "object" || d.payload === null || Array.isArray(d.payload)) {
    throw new ProtocolError("payload must be an object");
  }
  return {
    v: PROTOCOL_VERSION,
    type: d.type as MessageKind,
    seq: d.seq as number,
    t_ms: d.t_ms as number,
    from: d.from as Sender,
    payload: d.payload as Record<string, unknown>,
  };
}

/** Buffers stream chunks and yields complete newline-terminated lines. */
export class LineBuffer {
  private buf = "";

  feed(chunk: string): string[] {
    this.buf += chunk;
    const lines: string[] = [];
    for (;;) {
      const idx = this.buf.indexOf("\n");
      if (idx < 0) return lines;
      lines.push(this.buf.slice(0, idx));
      this.buf = this.buf.slice(idx + 1);
    }
  }

  get pending(): number {
    return this.buf.length;
  }
}

/** Monotone per-sender sequence numbering for outbound envelopes. */
export class EnvelopeSender {
  private seq = 0;

  constructor(
    private readonly sendLine: (line: string) => void,
    public role: Sender = "A",
    public clockMs: () => number = () => 0,
  ) {}

  send(type: MessageKind, payload: Record<string, unknown>): Envelope {
    this.seq += 1;
    const env: Envelope = {
      v: PROTOCOL_VERSION,
      type,
      seq: this.seq,
      t_ms: Math.floor(this.clockMs()),
      from: this.role,
      payload,
    };
    this.sendLine(encodeEnvelope(env));
    return env;
  }
}
