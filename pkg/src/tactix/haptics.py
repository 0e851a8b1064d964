"""Haptic coupling force laws and the per-tick haptic pipeline.

Two mutually exclusive modes, fixed for the whole session:

* co_location: a virtual elastic band pulls each robot toward its partner's
  last known position (deadzone + linear spring + force clamp, with linear
  decay once the snapshot goes stale).
* consensus: both robots buzz with a small oscillating planar force while the
  two report the same organelle; the background zone never triggers it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .dynamics import RobotPose, RobotState
from .geometry import Vec2, ZERO
from .zonemap import ZoneKind, ZoneMap


class HapticMode(str, Enum):
    CO_LOCATION = "co_location"
    CONSENSUS = "consensus"
    NONE = "none"


class ConsensusEdge(str, Enum):
    NONE = "none"
    ENTERED = "entered"
    EXITED = "exited"


@dataclass(frozen=True)
class CouplingParams:
    k: float = 0.05            # force units per mm beyond the deadzone
    deadzone_mm: float = 10.0
    f_max: float = 2.0
    stale_ms: int = 500
    decay_ms: int = 250
    symmetric: bool = True     # False: a grasped robot is exempt from the pull

    def __post_init__(self) -> None:
        if min(self.k, self.deadzone_mm, self.stale_ms, self.decay_ms) < 0:
            raise ValueError("coupling parameters must be non-negative")
        if self.f_max <= 0.0:
            raise ValueError("f_max must be positive")


@dataclass(frozen=True)
class VibrationParams:
    amplitude: float = 0.3
    freq_hz: float = 15.0

    def __post_init__(self) -> None:
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be non-negative")
        if self.freq_hz <= 0.0:
            raise ValueError("freq_hz must be positive")


@dataclass(frozen=True)
class PartnerView:
    """Network-side snapshot of the partner robot."""
    pose: RobotPose
    zone_id: str
    received_t_ms: int


def colocation_force(
    self_p: Vec2,
    partner: PartnerView,
    now_ms: int,
    cp: CouplingParams,
) -> Vec2:
    """Elastic-band pull toward the partner's last known position.

    Zero inside the deadzone, linear spring clamped at f_max outside it,
    linearly decayed to zero once the snapshot is older than stale_ms.
    """
    dx = partner.pose.p.x_mm - self_p.x_mm
    dy = partner.pose.p.y_mm - self_p.y_mm
    d = math.hypot(dx, dy)
    if d <= cp.deadzone_mm or d == 0.0:
        return ZERO
    magnitude = min(cp.k * (d - cp.deadzone_mm), cp.f_max)

    age = now_ms - partner.received_t_ms
    if age > cp.stale_ms:
        if cp.decay_ms <= 0:
            return ZERO
        scale = max(0.0, 1.0 - (age - cp.stale_ms) / cp.decay_ms)
        if scale == 0.0:
            return ZERO
        magnitude *= scale
    return Vec2(magnitude * dx / d, magnitude * dy / d)


def consensus_state(self_zone: str, partner_zone: str, zone_map: ZoneMap) -> bool:
    """True iff both robots sit on the same organelle (background never counts)."""
    self_kind = zone_map.zone(self_zone).kind
    zone_map.zone(partner_zone)  # validate the partner id too
    return self_zone == partner_zone and self_kind is ZoneKind.ORGANELLE


def vibration_force(active: bool, t_ms: int, vp: VibrationParams) -> Vec2:
    """Planar buzz: a sine force alternating between the x and y axes each
    half-period; magnitude never exceeds the amplitude."""
    if not active:
        return ZERO
    s = vp.amplitude * math.sin(2.0 * math.pi * vp.freq_hz * t_ms / 1000.0)
    half_periods = int(t_ms * 2.0 * vp.freq_hz / 1000.0)
    if half_periods % 2 == 0:
        return Vec2(s, 0.0)
    return Vec2(0.0, s)


@dataclass(frozen=True)
class PipelineResult:
    force: Vec2
    consensus_edge: ConsensusEdge
    consensus_active: bool


class HapticPipeline:
    """Per-robot haptic dispatcher; holds the previous consensus state so
    enter/exit edges fire exactly on transitions."""

    def __init__(
        self,
        mode: HapticMode,
        coupling: CouplingParams,
        vibration: VibrationParams,
        zone_map: ZoneMap,
    ) -> None:
        self.mode = mode
        self.coupling = coupling
        self.vibration = vibration
        self.zone_map = zone_map
        self._consensus_active = False

    def tick(
        self,
        self_state: RobotState,
        self_zone: str,
        partner: PartnerView | None,
        now_ms: int,
    ) -> PipelineResult:
        if self.mode is HapticMode.NONE or partner is None:
            return PipelineResult(ZERO, ConsensusEdge.NONE, False)

        if self.mode is HapticMode.CO_LOCATION:
            if not self.coupling.symmetric and self_state.grasped:
                return PipelineResult(ZERO, ConsensusEdge.NONE, False)
            force = colocation_force(self_state.pose.p, partner, now_ms, self.coupling)
            return PipelineResult(force, ConsensusEdge.NONE, False)

        active = consensus_state(self_zone, partner.zone_id, self.zone_map)
        edge = ConsensusEdge.NONE
        if active and not self._consensus_active:
            edge = ConsensusEdge.ENTERED
        elif not active and self._consensus_active:
            edge = ConsensusEdge.EXITED
        self._consensus_active = active
        return PipelineResult(vibration_force(active, now_ms, self.vibration), edge, active)
