"""Fixed-timestep planar robot dynamics.

Point mass with viscous damping, driven by the superposition of the user's
grasp force and the haptic coupling force.  Semi-implicit Euler keeps the
update deterministic and stable for all shipped constants; the same step runs
in the scripted agents, the session clients and the browser client.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .geometry import Vec2, clamp_norm
from .zonemap import ZoneMap


@dataclass(frozen=True)
class RobotPose:
    p: Vec2
    theta_rad: float = 0.0


@dataclass(frozen=True)
class RobotState:
    pose: RobotPose
    v: Vec2 = Vec2(0.0, 0.0)
    omega_rad_s: float = 0.0
    grasped: bool = False


@dataclass(frozen=True)
class DynamicsParams:
    mass_eq: float = 0.01   # force-units * s^2 / mm
    damping: float = 0.08   # force-units * s / mm
    v_max: float = 185.0    # mm/s
    dt_s: float = 0.01      # 100 Hz tick, fixed per session

    def __post_init__(self) -> None:
        for name in ("mass_eq", "damping", "v_max", "dt_s"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")


def step(
    state: RobotState,
    f_user: Vec2,
    f_haptic: Vec2,
    params: DynamicsParams,
    zone_map: ZoneMap,
) -> RobotState:
    """Advance one tick: integrate forces, clamp speed, clamp to map bounds.

    v' = clamp_norm(v + dt*(f_user + f_haptic - damping*v)/mass, v_max)
    p' = clamp_to_bounds(p + dt*v'), zeroing the velocity component that
    pushes into a wall.  Heading integrates omega and is never force-driven.
    """
    dt = params.dt_s
    f_total = Vec2(
        f_user.x_mm + f_haptic.x_mm - params.damping * state.v.x_mm,
        f_user.y_mm + f_haptic.y_mm - params.damping * state.v.y_mm,
    )
    v = Vec2(
        state.v.x_mm + dt * f_total.x_mm / params.mass_eq,
        state.v.y_mm + dt * f_total.y_mm / params.mass_eq,
    )
    v = clamp_norm(v, params.v_max)

    x = state.pose.p.x_mm + dt * v.x_mm
    y = state.pose.p.y_mm + dt * v.y_mm
    vx, vy = v.x_mm, v.y_mm
    if x < 0.0:
        x = 0.0
        vx = max(vx, 0.0)
    elif x > zone_map.width_mm:
        x = zone_map.width_mm
        vx = min(vx, 0.0)
    if y < 0.0:
        y = 0.0
        vy = max(vy, 0.0)
    elif y > zone_map.height_mm:
        y = zone_map.height_mm
        vy = min(vy, 0.0)

    theta = state.pose.theta_rad + dt * state.omega_rad_s
    theta = math.remainder(theta, 2.0 * math.pi) if abs(theta) > 2.0 * math.pi else theta
    return replace(
        state,
        pose=RobotPose(p=Vec2(x, y), theta_rad=theta),
        v=Vec2(vx, vy),
    )
