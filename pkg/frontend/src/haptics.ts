/** Haptic force laws, mirroring the session's configured parameters.
 *
 * co_location: deadzone + linear spring clamped at f_max, linearly decayed
 * once the partner snapshot is stale.  consensus: a bounded planar buzz while
 * both robots report the same organelle (the background zone never counts).
 */

import type { CouplingParams, HapticMode, VibrationParams } from "./protocol.js";
import type { ZoneMap } from "./mapdata.js";
import { zoneById } from "./mapdata.js";
import type { Vec2 } from "./vec.js";
import { ZERO } from "./vec.js";

export interface PartnerView {
  pose: { p: Vec2; thetaRad: number };
  zoneId: string;
  receivedTms: number;
}

export function colocationForce(
  selfP: Vec2,
  partner: PartnerView,
  nowMs: number,
  cp: CouplingParams,
): Vec2 {
  const dx = partner.pose.p.x - selfP.x;
  const dy = partner.pose.p.y - selfP.y;
  const d = Math.hypot(dx, dy);
  if (d <= cp.deadzone_mm || d === 0) return ZERO;
  let magnitude = Math.min(cp.k * (d - cp.deadzone_mm), cp.f_max);
  const age = nowMs - partner.receivedTms;
  if (age > cp.stale_ms) {
    if (cp.decay_ms <= 0) return ZERO;
    const fade = Math.max(0, 1 - (age - cp.stale_ms) / cp.decay_ms);
    if (fade === 0) return ZERO;
    magnitude *= fade;
  }
  return { x: (magnitude * dx) / d, y: (magnitude * dy) / d };
}

export function consensusState(selfZone: string, partnerZone: string, map: ZoneMap): boolean {
  const z = zoneById(map, selfZone);
  return selfZone === partnerZone && z !== undefined && z.kind === "organelle";
}

export function vibrationForce(active: boolean, tMs: number, vp: VibrationParams): Vec2 {
  if (!active) return ZERO;
  const s = vp.amplitude * Math.sin((2 * Math.PI * vp.freq_hz * tMs) / 1000);
  const halfPeriods = Math.floor((tMs * 2 * vp.freq_hz) / 1000);
  return halfPeriods % 2 === 0 ? { x: s, y: 0 } : { x: 0, y: s };
}

export type ConsensusEdge = "none" | "entered" | "exited";

export interface HapticResult {
  force: Vec2;
  edge: ConsensusEdge;
  consensusActive: boolean;
}

/** Stateful per-session dispatcher; tracks the previous consensus flag so
 * enter/exit edges fire exactly on transitions. */
export class HapticPipeline {
  private active = false;

  constructor(
    private readonly mode: HapticMode,
    private readonly coupling: CouplingParams,
    private readonly vibration: VibrationParams,
    private readonly map: ZoneMap,
  ) {}

  tick(
    selfP: Vec2,
    selfGrasped: boolean,
    selfZone: string,
    partner: PartnerView | null,
    nowMs: number,
  ): HapticResult {
    if (this.mode === "none" || partner === null) {
      return { force: ZERO, edge: "none", consensusActive: false };
    }
    if (this.mode === "co_location") {
      if (!this.coupling.symmetric && selfGrasped) {
        return { force: ZERO, edge: "none", consensusActive: false };
      }
      return {
        force: colocationForce(selfP, partner, nowMs, this.coupling),
        edge: "none",
        consensusActive: false,
      };
    }
    const active = consensusState(selfZone, partner.zoneId, this.map);
    let edge: ConsensusEdge = "none";
    if (active && !this.active) edge = "entered";
    else if (!active && this.active) edge = "exited";
    this.active = active;
    return { force: vibrationForce(active, nowMs, this.vibration), edge, consensusActive: active };
  }
}
