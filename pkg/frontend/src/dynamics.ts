/** Local robot simulation: the same fixed-timestep point-mass update the
 * server's scripted agents run, so both participants and any scripted peer
 * experience identical physics.  Constants arrive in session_start. */

import type { DynamicsParams } from "./protocol.js";
import type { ZoneMap } from "./mapdata.js";
import { clampNorm, type Vec2 } from "./vec.js";

export interface RobotState {
  p: Vec2;
  thetaRad: number;
  v: Vec2;
  omegaRadS: number;
  grasped: boolean;
}

export function initialState(p: Vec2): RobotState {
  return { p, thetaRad: 0, v: { x: 0, y: 0 }, omegaRadS: 0, grasped: false };
}

export function step(
  state: RobotState,
  fUser: Vec2,
  fHaptic: Vec2,
  params: DynamicsParams,
  map: ZoneMap,
): RobotState {
  const dt = params.dt_s;
  const fx = fUser.x + fHaptic.x - params.damping * state.v.x;
  const fy = fUser.y + fHaptic.y - params.damping * state.v.y;
  const v = clampNorm(
    { x: state.v.x + (dt * fx) / params.mass_eq, y: state.v.y + (dt * fy) / params.mass_eq },
    params.v_max,
  );
  let x = state.p.x + dt * v.x;
  let y = state.p.y + dt * v.y;
  let vx = v.x;
  let vy = v.y;
  if (x < 0) {
    x = 0;
    vx = Math.max(vx, 0);
  } else if (x > map.widthMm) {
    x = map.widthMm;
    vx = Math.min(vx, 0);
  }
  if (y < 0) {
    y = 0;
    vy = Math.max(vy, 0);
  } else if (y > map.heightMm) {
    y = map.heightMm;
    vy = Math.min(vy, 0);
  }
  return {
    p: { x, y },
    thetaRad: state.thetaRad + dt * state.omegaRadS,
    v: { x: vx, y: vy },
    omegaRadS: state.omegaRadS,
    grasped: state.grasped,
  };
}
