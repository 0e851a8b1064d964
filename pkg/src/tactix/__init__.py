"""tactix: two-party haptic collaboration simulator.

Simulated planar robots coupled by configurable haptic force laws, a
two-participant session relay with an agreement-gated quiz, scripted agents
for reproducible experiments, and trace analytics (Pearson correlation
matrices with permutation p-values, tandem fraction, dwell times).
"""

from .geometry import Vec2
from .zonemap import (
    Zone,
    ZoneKind,
    ZoneMap,
    load_map,
    load_map_file,
    load_default_map,
    locate,
    zone_centroid,
    map_sha256,
)
from .dynamics import DynamicsParams, RobotPose, RobotState, step
from .haptics import (
    ConsensusEdge,
    CouplingParams,
    HapticMode,
    HapticPipeline,
    PartnerView,
    VibrationParams,
    colocation_force,
    consensus_state,
    vibration_force,
)
from .protocol import Envelope, LatencyProfile, SessionConfig, decode, encode
from .activity import Activity, ActivityEngine, load_activity, load_default_activity
from .trace import Trace, TraceSample, TraceWriter, load_trace, parse_trace
from .analytics import (
    CorrelationReport,
    correlation_matrix,
    pearson,
    perm_pvalue,
    resample,
    session_summary,
    tandem_fraction,
)
from .agents import AgentScript, SessionRun, run_pair
from .server import SessionServer
from .simnet import SimScheduler, simulated_transport

__version__ = "0.1.0"

__all__ = [
    "Vec2",
    "Zone",
    "ZoneKind",
    "ZoneMap",
    "load_map",
    "load_map_file",
    "load_default_map",
    "locate",
    "zone_centroid",
    "map_sha256",
    "DynamicsParams",
    "RobotPose",
    "RobotState",
    "step",
    "ConsensusEdge",
    "CouplingParams",
    "HapticMode",
    "HapticPipeline",
    "PartnerView",
    "VibrationParams",
    "colocation_force",
    "consensus_state",
    "vibration_force",
    "Envelope",
    "LatencyProfile",
    "SessionConfig",
    "decode",
    "encode",
    "Activity",
    "ActivityEngine",
    "load_activity",
    "load_default_activity",
    "Trace",
    "TraceSample",
    "TraceWriter",
    "load_trace",
    "parse_trace",
    "CorrelationReport",
    "correlation_matrix",
    "pearson",
    "perm_pvalue",
    "resample",
    "session_summary",
    "tandem_fraction",
    "AgentScript",
    "SessionRun",
    "run_pair",
    "SessionServer",
    "SimScheduler",
    "simulated_transport",
]
