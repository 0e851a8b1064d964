"""Operator command line: serve live sessions, run seeded experiments,
analyze traces, validate content files.

Exit codes: 0 success, 1 usage, 2 validation, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
import uuid
from pathlib import Path

from .activity import (
    ActivityEngine,
    ActivityError,
    default_activity_bytes,
    load_activity,
    validate_activity_against_map,
)
from .agents import AgentScript, make_itinerary, run_pair
from .analytics import AnalysisError, plot_series_csv, session_summary
from .dynamics import DynamicsParams
from .haptics import CouplingParams, HapticMode, VibrationParams
from .protocol import LatencyProfile, SessionConfig
from .realtime import RealtimeSessionServer
from .trace import TraceError, TraceWriter, load_events, load_trace
from .zonemap import (
    MapFormatError,
    MapValidationError,
    default_map_bytes,
    load_map,
    map_sha256,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

DEFAULT_PORT = 7741


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MapFormatError, MapValidationError, ActivityError, TraceError, AnalysisError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        return EXIT_OK
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tactix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run a live two-participant session server")
    serve.add_argument("--map", type=Path, default=None, help="map JSON (default: packaged)")
    serve.add_argument("--activity", type=Path, default=None, help="activity JSON (default: packaged)")
    serve.add_argument("--mode", default="co_location", help="co_location | consensus | none")
    serve.add_argument("--port", type=int, default=None, help=f"TCP port (env TACTIX_PORT, default {DEFAULT_PORT})")
    serve.add_argument("--http-port", type=int, default=None, help="HTTP/WebSocket port (default: port+1)")
    serve.add_argument("--out", type=Path, default=None, help="output dir for trace/events (default runs/<session>)")
    serve.add_argument("--session-id", default=None)
    serve.add_argument("--web-dir", type=Path, default=None, help="static files for the browser client")
    serve.add_argument("--realtime", action="store_true", help="accepted for symmetry; serve is always realtime")
    serve.set_defaults(func=cmd_serve)

    exp = sub.add_parser("experiment", help="run seeded scripted-agent sessions and reports")
    exp.add_argument("--mode", default="both", help="co_location | consensus | none | both")
    exp.add_argument("--seeds", default="1..5", help="e.g. 1..20 or 3,5,8")
    exp.add_argument("--latency", default="100:50", help="BASE_MS:JITTER_MS")
    exp.add_argument("--duration-s", type=float, default=120.0)
    exp.add_argument("--hz", type=float, default=10.0, help="analysis resample rate")
    exp.add_argument("--n-perm", type=int, default=500, help="permutations for p-values")
    exp.add_argument("--stops", type=int, default=6, help="itinerary length per agent")
    exp.add_argument("--disagree-first", action="store_true", help="agent B first proposes a wrong zone")
    exp.add_argument("--out", type=Path, default=Path("runs/experiment"))
    exp.add_argument("--manifest", type=Path, default=None, help="re-run exactly from a saved manifest")
    exp.set_defaults(func=cmd_experiment)

    ana = sub.add_parser("analyze", help="produce a report from a recorded trace")
    ana.add_argument("--trace", type=Path, required=True)
    ana.add_argument("--events", type=Path, default=None)
    ana.add_argument("--map", type=Path, default=None)
    ana.add_argument("--activity", type=Path, default=None)
    ana.add_argument("--hz", type=float, default=10.0)
    ana.add_argument("--n-perm", type=int, default=10000)
    ana.add_argument("--seed", type=int, default=0)
    ana.add_argument("--out", type=Path, default=Path("analysis"))
    ana.set_defaults(func=cmd_analyze)

    val = sub.add_parser("validate", help="check map/activity files and cross-references")
    val.add_argument("--map", type=Path, default=None)
    val.add_argument("--activity", type=Path, default=None)
    val.set_defaults(func=cmd_validate)
    return parser


def _load_content(map_path: Path | None, activity_path: Path | None):
    map_bytes = map_path.read_bytes() if map_path else default_map_bytes()
    activity_bytes = activity_path.read_bytes() if activity_path else default_activity_bytes()
    return load_map(map_bytes), map_bytes, load_activity(activity_bytes), activity_bytes


def _parse_mode(text: str) -> HapticMode:
    try:
        return HapticMode(text)
    except ValueError:
        raise UsageError(f"unknown mode {text!r} (use co_location, consensus or none)") from None


def _parse_seeds(text: str) -> list[int]:
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"bad seed list {text!r}") from None
    if not seeds:
        raise UsageError("empty seed list")
    return seeds


def _parse_latency(text: str) -> tuple[int, int]:
    try:
        base, jitter = (int(p) for p in text.split(":", 1))
    except ValueError:
        raise UsageError(f"bad latency spec {text!r} (expected BASE:JITTER)") from None
    if base < 0 or jitter < 0:
        raise UsageError("latency values must be non-negative")
    return base, jitter


# -- serve ---------------------------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    zone_map, map_bytes, activity, activity_bytes = _load_content(args.map, args.activity)
    problems = validate_activity_against_map(activity, zone_map)
    if problems:
        for p in problems:
            print(f"validation error: {p}", file=sys.stderr)
        return EXIT_VALIDATION

    mode = _parse_mode(args.mode)
    port = args.port if args.port is not None else int(os.environ.get("TACTIX_PORT", DEFAULT_PORT))
    http_port = args.http_port if args.http_port is not None else port + 1
    session_id = args.session_id or uuid.uuid4().hex[:12]
    config = SessionConfig(session_id=session_id, mode=mode, map_hash=map_sha256(map_bytes))

    out_dir = args.out or Path("runs") / session_id
    out_dir.mkdir(parents=True, exist_ok=True)

    async def _run() -> None:
        sample_fh = open(out_dir / "trace.csv", "w", encoding="utf-8", newline="")
        event_fh = open(out_dir / "events.jsonl", "w", encoding="utf-8")
        digest = map_sha256(json.dumps(config.to_payload(), sort_keys=True).encode("utf-8"))
        recorder = TraceWriter(sample_fh, event_fh, config_digest=digest)
        server = RealtimeSessionServer(
            config,
            zone_map,
            activity,
            map_bytes,
            activity_bytes,
            recorder=recorder,
            web_dir=args.web_dir,
        )
        endpoints = await server.start(port, http_port)
        print(f"session {session_id} mode={mode.value}")
        print(f"  tcp      127.0.0.1:{endpoints.tcp_port}")
        print(f"  http/ws  http://127.0.0.1:{endpoints.http_port}/  (ws path /ws/session/{session_id})")
        print(f"  output   {out_dir}", flush=True)
        try:
            while True:
                await asyncio.sleep(3600)
        finally:
            await server.close()
            quiz_state = server.session.engine.snapshot()
            (out_dir / "quiz_state.json").write_text(
                json.dumps(quiz_state, indent=2, sort_keys=True), encoding="utf-8"
            )
            sample_fh.close()
            event_fh.close()

    try:
        asyncio.run(_run())
    except OSError as exc:
        print(f"error: cannot listen on port {port}/{http_port}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


# -- experiment ---------------------------------------------------------------------


def _manifest_from_args(args: argparse.Namespace) -> dict:
    mode = args.mode
    if mode == "both":
        modes = ["co_location", "consensus"]
    else:
        modes = [_parse_mode(mode).value]
    base, jitter = _parse_latency(args.latency)
    if args.duration_s <= 0:
        raise UsageError("duration must be positive")
    if args.hz <= 0:
        raise UsageError("resample rate must be positive")
    return {
        "version": 1,
        "modes": modes,
        "seeds": _parse_seeds(args.seeds),
        "latency": {"base_delay_ms": base, "jitter_ms": jitter},
        "duration_s": args.duration_s,
        "hz": args.hz,
        "n_perm": args.n_perm,
        "perm_seed": 0,
        "stops": args.stops,
        "disagree_first": bool(args.disagree_first),
        "agents": {
            "dwell_ms": 3000,
            "drag_gain": 0.08,
            "noise_std_mm": 5.0,
            "stop_timeout_ms": 12000,
            "yield_ms": 2000,
        },
        "starts": {"A": [60.0, 160.0], "B": [250.0, 40.0]},
    }


def _scripts_for(manifest: dict, zone_map, seed: int) -> tuple[AgentScript, AgentScript]:
    ag = manifest["agents"]
    starts = manifest["starts"]

    def script(agent_seed: int, start, disagree: bool) -> AgentScript:
        return AgentScript(
            itinerary=make_itinerary(zone_map, agent_seed, manifest["stops"]),
            dwell_ms=ag["dwell_ms"],
            drag_gain=ag["drag_gain"],
            noise_std_mm=ag["noise_std_mm"],
            seed=agent_seed,
            disagree_first=disagree,
            stop_timeout_ms=ag["stop_timeout_ms"],
            yield_ms=ag["yield_ms"],
            start_xy=(start[0], start[1]),
        )

    return (
        script(seed * 2 + 1, starts["A"], False),
        script(seed * 2 + 2, starts["B"], manifest["disagree_first"]),
    )


def run_experiment(manifest: dict, out_dir: Path) -> dict:
    """Execute every (mode, seed) cell of the manifest; returns the aggregate."""
    from .zonemap import load_default_map
    from .activity import load_default_activity

    zone_map = load_default_map()
    activity = load_default_activity()
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )

    aggregate: dict = {"modes": {}, "seeds": manifest["seeds"]}
    per_mode_stats: dict[str, list[dict]] = {}
    for mode in manifest["modes"]:
        for seed in manifest["seeds"]:
            run_dir = out_dir / mode / f"seed_{seed:03d}"
            config = SessionConfig(
                session_id=f"exp-{mode}-{seed}",
                mode=HapticMode(mode),
                coupling=CouplingParams(),
                vibration=VibrationParams(),
                dynamics=DynamicsParams(),
            )
            script_a, script_b = _scripts_for(manifest, zone_map, seed)
            latency = LatencyProfile(
                manifest["latency"]["base_delay_ms"],
                manifest["latency"]["jitter_ms"],
                seed,
            )
            run = run_pair(
                script_a,
                script_b,
                config,
                latency,
                duration_s=manifest["duration_s"],
                zone_map=zone_map,
                activity=activity,
                out_dir=run_dir,
            )
            engine = ActivityEngine(activity, zone_map)
            report = session_summary(
                run.trace,
                run.events,
                engine,
                hz=manifest["hz"],
                n_perm=manifest["n_perm"],
                seed=manifest["perm_seed"],
            )
            report["protocol_errors"] = run.protocol_errors
            report["mean_distance_mm"] = run.mean_distance_mm
            (run_dir / "report.json").write_text(
                json.dumps(report, indent=2, sort_keys=True), encoding="utf-8"
            )
            corr = report.get("correlation")
            stats = {
                "seed": seed,
                "r_x1x2": corr["r"][0][2] if corr else None,
                "r_y1y2": corr["r"][1][3] if corr else None,
                "tandem_fraction": report.get("tandem_fraction"),
                "score": report.get("quiz", {}).get("score"),
                "quiz_duration_s": report.get("quiz", {}).get("duration_s"),
                "mean_distance_mm": run.mean_distance_mm,
            }
            per_mode_stats.setdefault(mode, []).append(stats)

    for mode, rows in per_mode_stats.items():
        rs = [((r["r_x1x2"] or 0.0) + (r["r_y1y2"] or 0.0)) / 2.0 for r in rows]
        tf = [r["tandem_fraction"] for r in rows if r["tandem_fraction"] is not None]
        aggregate["modes"][mode] = {
            "runs": rows,
            "mean_paired_r": sum(rs) / len(rs) if rs else None,
            "mean_tandem_fraction": sum(tf) / len(tf) if tf else None,
        }
    modes = manifest["modes"]
    if "co_location" in modes and "consensus" in modes:
        aggregate["mean_r_gap"] = (
            aggregate["modes"]["co_location"]["mean_paired_r"]
            - aggregate["modes"]["consensus"]["mean_paired_r"]
        )
    (out_dir / "aggregate.json").write_text(
        json.dumps(aggregate, indent=2, sort_keys=True), encoding="utf-8"
    )
    return aggregate


def cmd_experiment(args: argparse.Namespace) -> int:
    if args.manifest is not None:
        manifest = json.loads(args.manifest.read_text(encoding="utf-8"))
    else:
        manifest = _manifest_from_args(args)
    aggregate = run_experiment(manifest, args.out)
    for mode, stats in aggregate["modes"].items():
        print(
            f"{mode}: mean paired r={stats['mean_paired_r']:.3f} "
            f"tandem={stats['mean_tandem_fraction']:.3f} over {len(stats['runs'])} seeds"
        )
    if "mean_r_gap" in aggregate:
        print(f"mean r gap (co_location - consensus): {aggregate['mean_r_gap']:.3f}")
    return EXIT_OK


# -- analyze -------------------------------------------------------------------------


def cmd_analyze(args: argparse.Namespace) -> int:
    if args.hz <= 0:
        raise UsageError("--hz must be positive")
    if args.n_perm < 1:
        raise UsageError("--n-perm must be at least 1")
    trace = load_trace(args.trace)
    if not {"A", "B"} <= trace.robots:
        raise AnalysisError("both robots required in the trace")
    events = load_events(args.events) if args.events else []
    zone_map, _, activity, _ = _load_content(args.map, args.activity)
    engine = ActivityEngine(activity, zone_map)
    report = session_summary(trace, events, engine, hz=args.hz, n_perm=args.n_perm, seed=args.seed)

    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True), encoding="utf-8"
    )
    for robot in sorted(trace.robots):
        (args.out / f"{robot}_xy.csv").write_text(plot_series_csv(trace, robot), encoding="utf-8")
    for warning in report["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"report written to {args.out / 'report.json'}")
    return EXIT_OK


# -- validate ------------------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    problems: list[str] = []
    zone_map = None
    try:
        zone_map, _, activity, _ = _load_content(args.map, args.activity)
    except (MapFormatError, MapValidationError, ActivityError, OSError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION if not isinstance(exc, OSError) else EXIT_RUNTIME
    problems.extend(validate_activity_against_map(activity, zone_map))
    if problems:
        for p in problems:
            print(f"validation error: {p}", file=sys.stderr)
        return EXIT_VALIDATION
    print("ok")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
