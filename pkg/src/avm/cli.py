"""Command-line front door: plan, render, simulate, serve."""

from __future__ import annotations

import argparse
import json
import signal
import sys
import time
from pathlib import Path

import cv2

from .calibration import RigAttitude
from .camgeom import planning_report
from .config import (
    default_profile,
    default_rig,
    load_profile,
    load_rig,
    load_scene,
)
from .errors import ConfigError
from .projection import build_lookup_maps, camera_pose_matrix, compose_topview, coverage_report
from .scene_sim import default_scene, render_camera_view
from .service import AvmService, run_pipeline
from .wire import WireServer


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avm",
        description="Surround-view monitoring pipeline for a simulated excavator rig.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="check lens adequacy for every camera")
    p_plan.add_argument("--config", metavar="FILE", help="rig configuration JSON")
    p_plan.add_argument("--report", metavar="FILE", help="write the table as JSON")

    p_render = sub.add_parser("render", help="render camera views and the stitched top view")
    p_render.add_argument("--config", metavar="FILE")
    p_render.add_argument("--scene", metavar="FILE")
    p_render.add_argument("--attitude", metavar="R,P,Y", default="0,0,0",
                          help="rig roll,pitch,yaw in degrees (default level)")
    p_render.add_argument("--out", metavar="DIR", default="avm-out",
                          help="output directory for PNG files")
    p_render.add_argument("--report", metavar="FILE", help="write the coverage report as JSON")

    p_sim = sub.add_parser("simulate", help="run the pipeline over a motion profile")
    p_sim.add_argument("--config", metavar="FILE")
    p_sim.add_argument("--scene", metavar="FILE")
    p_sim.add_argument("--profile", metavar="FILE")
    p_sim.add_argument("--virtual", action="store_true",
                       help="run unpaced in simulated time instead of wall clock")
    p_sim.add_argument("--report", metavar="FILE", help="write final pipeline stats as JSON")
    p_sim.add_argument("--out", metavar="DIR", help="also export published frames as a PNG sequence")

    p_serve = sub.add_parser("serve", help="serve frames and commands over TCP/WebSocket")
    p_serve.add_argument("--config", metavar="FILE")
    p_serve.add_argument("--scene", metavar="FILE")
    p_serve.add_argument("--profile", metavar="FILE")
    p_serve.add_argument("--port", type=int, default=8700)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--static", metavar="DIR",
                         help="console bundle to serve over HTTP (default: ./frontend/dist if present)")
    return parser


def _load_common(args):
    rig = load_rig(args.config) if args.config else default_rig()
    scene = None
    if getattr(args, "scene", None):
        scene = load_scene(args.scene)
    return rig, scene


def _cmd_plan(args) -> int:
    rig = load_rig(args.config) if args.config else default_rig()
    report = planning_report(rig.planning_rows(), rig.lens)
    print(report.to_text())
    verdict = "all cameras pass" if report.all_ok else "LENS INADEQUATE for at least one camera"
    print(f"\nlens fov {report.lens_fov_deg:.1f} deg: {verdict}")
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n")
        print(f"report written to {args.report}")
    return 0


def _parse_attitude(text: str) -> RigAttitude:
    try:
        parts = [float(p) for p in text.split(",")]
        roll, pitch, yaw = (parts + [0.0, 0.0, 0.0])[:3]
    except ValueError as exc:
        raise ConfigError(f"--attitude expects R,P,Y degrees, got {text!r}") from exc
    return RigAttitude(roll_deg=roll, pitch_deg=pitch, yaw_deg=yaw)


def _cmd_render(args) -> int:
    rig, scene = _load_common(args)
    if scene is None:
        scene = default_scene(rig.mosaic.extent)
    attitude = _parse_attitude(args.attitude)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    cameras = rig.camera_models()
    frames = []
    for cam in cameras:
        pose = camera_pose_matrix(cam.mount, attitude)
        frame = render_camera_view(scene, cam, pose)
        frames.append(frame)
        path = out / f"camera_{cam.mount.azimuth}.png"
        cv2.imwrite(str(path), frame)
        print(f"wrote {path}")
    maps = build_lookup_maps(cameras, attitude, rig.mosaic, body=rig.body)
    mosaic = compose_topview(frames, maps)
    cv2.imwrite(str(out / "topview.png"), mosaic)
    print(f"wrote {out / 'topview.png'}")
    cov = coverage_report(maps)
    print(f"coverage radius {cov.radius_m:.2f} m (scan limit {cov.scan_limit_m:.1f} m), "
          f"blind pixels {cov.blind_px}")
    if args.report:
        Path(args.report).write_text(json.dumps(cov.to_dict(), indent=2) + "\n")
        print(f"report written to {args.report}")
    return 0


def _cmd_simulate(args) -> int:
    rig, scene = _load_common(args)
    profile = load_profile(args.profile) if args.profile else default_profile()
    mode = "virtual" if args.virtual else "realtime"
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    count = 0
    t0 = time.monotonic()
    stats = None
    service = AvmService(rig, scene=scene, profile=profile, mode=mode)
    if mode == "virtual":
        frames = service.run_virtual()
    else:
        print("prewarming renderer and maps...")
        service.prewarm()
        service.start()
        frames = service.stream()
    try:
        for frame in frames:
            count += 1
            if out is not None:
                cv2.imwrite(str(out / f"frame_{frame.frame_seq:05d}.png"), frame.image)
        stats = service.stats_report()
    finally:
        if mode == "realtime":
            service.stop()
    elapsed = time.monotonic() - t0
    print(f"published {count} frames in {elapsed:.1f} s ({mode})")
    print(json.dumps(stats.to_dict(), indent=2))
    if args.report:
        payload = {"mode": mode, "frames": count, "elapsed_s": round(elapsed, 3),
                   "stats": stats.to_dict()}
        Path(args.report).write_text(json.dumps(payload, indent=2) + "\n")
        print(f"report written to {args.report}")
    return 0


def _raise_interrupt(signum, frame):
    raise KeyboardInterrupt


def _cmd_serve(args) -> int:
    signal.signal(signal.SIGTERM, _raise_interrupt)
    rig, scene = _load_common(args)
    profile = load_profile(args.profile) if args.profile else None
    static = args.static
    if static is None and Path("frontend/dist/index.html").is_file():
        static = "frontend/dist"

    service = AvmService(rig, scene=scene, profile=profile, mode="realtime")
    print("prewarming renderer and maps...")
    service.prewarm()
    service.start()
    server = WireServer(service, host=args.host, port=args.port, static_dir=static)
    server.start()
    print(f"serving on {args.host}:{server.port}"
          + (f" (console from {static})" if static else " (no console bundle)"))
    print("raw TCP and WebSocket clients speak the same JSON envelopes; ctrl-c stops")
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        print("\nshutting down")
    finally:
        server.stop()
        service.stop()
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "plan": _cmd_plan,
        "render": _cmd_render,
        "simulate": _cmd_simulate,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 0
    except Exception as exc:  # runtime failure: anything past config validation
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
