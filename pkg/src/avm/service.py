"""Real-time pipeline: telemetry in, composed top-view frames out.

The pipeline runs three loosely-coupled stages.  A telemetry producer
paces joint/attitude records onto a latest-value slot; a preparation
worker keeps camera frames and lookup maps ready for the most recent
(debounced) attitude; a composer stitches, overlays, and publishes at
its own rhythm.  Every hand-off is an immutable snapshot: slow readers
always see the newest complete result and never accumulate a backlog.

In ``virtual`` mode the same stages run inline on one thread with no
pacing at all, which makes runs deterministic and as fast as the
machine allows.
"""

from __future__ import annotations

import itertools
import threading
import time
from collections import deque
from dataclasses import dataclass

import cv2
import numpy as np

from .calibration import DEBOUNCE_DEG, IDENTITY_ATTITUDE, MapCache, RigAttitude
from .config import RigConfig, profile_from_dict
from .errors import CommandError, ConfigError
from .kinematics import (
    JointState,
    OverlayPayload,
    PoseSolution,
    forward_kinematics,
    overlay_payload,
)
from .projection import LookupMaps, camera_pose_matrix, compose_topview
from .scene_sim import MotionProfile, Scene, default_scene, render_camera_view, telemetry_stream

TOPVIEW = "topview"

OVERLAY_LINK = (40, 220, 255, 255)
OVERLAY_JOINT = (30, 30, 230, 255)
OVERLAY_RING = (60, 200, 60, 255)
OVERLAY_TEXT = (245, 245, 245, 255)


def _att_key(att: RigAttitude) -> tuple[float, float, float]:
    q = att.quantized(DEBOUNCE_DEG)
    return (q.roll_deg, q.pitch_deg, q.yaw_deg)


@dataclass(frozen=True)
class CadenceStats:
    """Observed period of one telemetry stream, milliseconds."""

    mean_ms: float
    min_ms: float
    max_ms: float
    samples: int

    def to_dict(self) -> dict:
        return {
            "mean_ms": round(self.mean_ms, 2),
            "min_ms": round(self.min_ms, 2),
            "max_ms": round(self.max_ms, 2),
            "samples": self.samples,
        }


@dataclass(frozen=True)
class PipelineStats:
    """Pipeline health counters.

    ``fps`` is measured over a sliding one-second window of publishes.
    Cadence statistics appear only once a stream has produced at least
    ten intervals; before that the corresponding field is ``None`` and
    the serialized form omits it entirely.
    """

    fps: float
    unpaced: bool
    frame_latency_ms: float | None
    dropped_frames: int
    frames_published: int
    info_cadence: CadenceStats | None
    attitude_cadence: CadenceStats | None

    MIN_CADENCE_SAMPLES = 10

    def to_dict(self) -> dict:
        out: dict = {
            "fps": round(self.fps, 2),
            "dropped_frames": self.dropped_frames,
            "frames_published": self.frames_published,
        }
        if self.unpaced:
            out["unpaced"] = True
        if self.frame_latency_ms is not None:
            out["frame_latency_ms"] = round(self.frame_latency_ms, 2)
        if self.info_cadence is not None:
            out["info_cadence"] = self.info_cadence.to_dict()
        if self.attitude_cadence is not None:
            out["attitude_cadence"] = self.attitude_cadence.to_dict()
        return out


@dataclass(frozen=True)
class ViewState:
    """Everything a display client needs to mirror the service."""

    active_view: str
    overlay_on: bool
    calibration_on: bool
    joints: JointState
    attitude: RigAttitude
    pose: PoseSolution

    def to_dict(self) -> dict:
        return {
            "active_view": self.active_view,
            "overlay_on": self.overlay_on,
            "calibration_on": self.calibration_on,
            "joints": {
                "boom_deg": self.joints.boom_deg,
                "arm_deg": self.joints.arm_deg,
                "bucket_deg": self.joints.bucket_deg,
                "timestamp_ms": self.joints.timestamp_ms,
            },
            "attitude": {
                "roll_deg": self.attitude.roll_deg,
                "pitch_deg": self.attitude.pitch_deg,
                "yaw_deg": self.attitude.yaw_deg,
                "timestamp_ms": self.attitude.timestamp_ms,
            },
            "pose": {
                "boom_tip": list(self.pose.boom_tip),
                "arm_tip": list(self.pose.arm_tip),
                "bucket_tip": list(self.pose.bucket_tip),
                "ground_distance": self.pose.ground_distance,
                "slew_radius": self.pose.slew_radius,
            },
        }


@dataclass(frozen=True)
class PublishedFrame:
    """One frame as it leaves the pipeline."""

    image: np.ndarray
    view: str
    frame_seq: int
    telemetry_seq: int
    timestamp_ms: int
    overlay: OverlayPayload | None


@dataclass(frozen=True)
class _Telemetry:
    joints: JointState
    attitude: RigAttitude
    seq: int


@dataclass(frozen=True)
class _Prepared:
    """Camera frames plus maps, all built for one debounced attitude."""

    key: tuple[float, float, float]
    frames: tuple[np.ndarray, ...]
    maps: LookupMaps


def draw_overlay(image: np.ndarray, payload: OverlayPayload, spec) -> np.ndarray:
    """Draw the working-information overlay onto a composed top view.

    The linkage works in the vertical plane through the rig's forward
    axis, so its ground projection is a ray along +y from the slew
    axis: a point at horizontal reach x sits at ground (0, slew_offset
    + x).  The slew circle and the numeric readouts complete the
    overlay.  Draws in place and returns the image.
    """
    h, w = image.shape[:2]

    def ground_pt(reach: float) -> tuple[int, int]:
        px, py = spec.ground_to_px(0.0, payload.slew_offset + reach)
        return int(round(px)), int(round(py))

    center = (int(round(spec.center_px)), int(round(spec.center_px)))
    ring_px = int(round(payload.radius_m * spec.scale))
    if 0 < ring_px < 4 * max(h, w):
        cv2.circle(image, center, ring_px, OVERLAY_RING, 2, cv2.LINE_AA)

    pts = [ground_pt(0.0)]
    for _, (x1, _z1) in payload.segments:
        pts.append(ground_pt(x1))
    for a, b in zip(pts, pts[1:]):
        cv2.line(image, a, b, OVERLAY_LINK, 3, cv2.LINE_AA)
    for p in pts:
        cv2.circle(image, p, 5, OVERLAY_JOINT, -1, cv2.LINE_AA)

    text = (
        f"D {payload.readout_ground_distance_m:+.2f} m   "
        f"R {payload.readout_radius_m:.2f} m"
    )
    cv2.putText(image, text, (10, h - 12), cv2.FONT_HERSHEY_SIMPLEX, 0.55, (0, 0, 0, 255), 3, cv2.LINE_AA)
    cv2.putText(image, text, (10, h - 12), cv2.FONT_HERSHEY_SIMPLEX, 0.55, OVERLAY_TEXT, 1, cv2.LINE_AA)
    return image


class _FrameSource:
    """Renders and caches the four camera views per debounced attitude."""

    def __init__(self, scene: Scene, cameras, step_deg: float = DEBOUNCE_DEG, max_sets: int = 16):
        self._scene = scene
        self._cameras = list(cameras)
        self._step = step_deg
        self._max_sets = max_sets
        self._cache: dict[tuple, tuple[np.ndarray, ...]] = {}
        self._order: deque[tuple] = deque()
        self._lock = threading.Lock()

    def _key(self, attitude: RigAttitude) -> tuple:
        q = attitude.quantized(self._step)
        return (q.roll_deg, q.pitch_deg, q.yaw_deg)

    def render(self, attitude: RigAttitude) -> tuple[np.ndarray, ...]:
        """Frames for ``attitude``, rendering them now if not cached."""
        key = self._key(attitude)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        q = attitude.quantized(self._step)
        frames = tuple(
            render_camera_view(self._scene, cam, camera_pose_matrix(cam.mount, q))
            for cam in self._cameras
        )
        with self._lock:
            if key not in self._cache:
                self._cache[key] = frames
                self._order.append(key)
                while len(self._order) > self._max_sets:
                    self._cache.pop(self._order.popleft(), None)
            return self._cache[key]

    def ready(self, attitude: RigAttitude) -> tuple[np.ndarray, ...] | None:
        with self._lock:
            return self._cache.get(self._key(attitude))


_VALID_COMMANDS = (
    "set_joints",
    "set_attitude",
    "select_view",
    "toggle_overlay",
    "toggle_calibration",
    "set_profile",
    "snapshot",
)


class AvmService:
    """Owns the pipeline state machine and its worker threads.

    Headless callers drive it through :meth:`handle_command`,
    :meth:`stats_report`, :meth:`latest_frame` and
    :meth:`wait_for_frame`; the wire server is a thin adapter over the
    same surface.  ``mode`` selects wall-clock pacing (``realtime``) or
    single-threaded flat-out execution (``virtual``).
    """

    def __init__(
        self,
        rig: RigConfig,
        scene: Scene | None = None,
        profile: MotionProfile | None = None,
        mode: str = "realtime",
        compose_hz: float = 30.0,
    ):
        if mode not in ("realtime", "virtual"):
            raise ConfigError(f"mode must be 'realtime' or 'virtual', got {mode!r}")
        self.rig = rig
        self.scene = scene if scene is not None else default_scene(rig.mosaic.extent)
        self.scene.check_extent(rig.mosaic.extent)
        self.profile = profile
        self.mode = mode
        self.compose_period = 1.0 / compose_hz if compose_hz > 0 else 0.0

        self.cameras = rig.camera_models()
        self.maps_cache = MapCache(self.cameras, rig.mosaic, rig.body)
        self.flat_maps = self.maps_cache.get(IDENTITY_ATTITUDE)
        self.frame_source = _FrameSource(self.scene, self.cameras)

        joints = profile.joint_state(0) if profile else JointState(0.0, 0.0, 0.0)
        attitude = profile.attitude(0) if profile else IDENTITY_ATTITUDE
        self._lock = threading.RLock()
        self._telemetry = _Telemetry(joints=joints, attitude=attitude, seq=0)
        self._active_view = TOPVIEW
        self._overlay_on = True
        self._calibration_on = True
        self._prepared = None  # set by prewarm / workers
        self._published: PublishedFrame | None = None
        self._frame_cv = threading.Condition(self._lock)
        self._listeners: list = []
        self._state_listeners: list = []

        # stats
        self._publish_times: deque[float] = deque(maxlen=512)
        self._latency_ms: deque[float] = deque(maxlen=128)
        self._info_arrivals: deque[float] = deque(maxlen=256)
        self._att_arrivals: deque[float] = deque(maxlen=256)
        self._frames_published = 0
        self._dropped = 0
        self._last_composed_seq = 0
        self._frame_seq = itertools.count(1)

        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()
        self._telemetry_done = threading.Event()
        self._want_attitude: RigAttitude | None = None
        self._profile_gen = 0

    # ------------------------------------------------------------------
    # preparation

    def prewarm(self, attitudes: tuple[RigAttitude, ...] = (IDENTITY_ATTITUDE,)) -> None:
        """Render frames and build maps ahead of the clock.

        Ray-casting four full-resolution views takes seconds, far too
        slow to sit inside the frame loop; a realtime run renders every
        attitude it will visit up front (or accepts the preparation
        worker swapping sets in as they become ready).
        """
        last = None
        for att in attitudes:
            frames = self.frame_source.render(att)
            maps = self.maps_cache.get(att)
            last = _Prepared(key=_att_key(att), frames=frames, maps=maps)
        if last is not None:
            with self._lock:
                if self._prepared is None:
                    self._prepared = last

    def _prepare_now(self, attitude: RigAttitude) -> _Prepared:
        frames = self.frame_source.render(attitude)
        maps = self.maps_cache.get(attitude)
        prepared = _Prepared(key=_att_key(attitude), frames=frames, maps=maps)
        with self._lock:
            self._prepared = prepared
        return prepared

    # ------------------------------------------------------------------
    # state

    def _ingest(self, joints: JointState, attitude: RigAttitude, wall: float) -> None:
        with self._lock:
            seq = self._telemetry.seq + 1
            self._telemetry = _Telemetry(joints=joints, attitude=attitude, seq=seq)
            self._info_arrivals.append(wall)
            self._att_arrivals.append(wall)
            self._want_attitude = attitude

    def view_state(self) -> ViewState:
        with self._lock:
            tel = self._telemetry
            active = self._active_view
            overlay = self._overlay_on
            calib = self._calibration_on
        pose = forward_kinematics(self.rig.links, tel.joints, self.rig.limits)
        return ViewState(
            active_view=active,
            overlay_on=overlay,
            calibration_on=calib,
            joints=tel.joints,
            attitude=tel.attitude,
            pose=pose,
        )

    # ------------------------------------------------------------------
    # commands

    def handle_command(self, cmd: dict) -> ViewState:
        """Apply one operator command; invalid input leaves state as-is.

        Commands are serialized on the state lock, so concurrent
        callers observe some total order and the final state equals the
        sequential application of that order.
        """
        if not isinstance(cmd, dict) or "name" not in cmd:
            raise CommandError("command must be an object with a 'name'")
        name = cmd["name"]
        if name not in _VALID_COMMANDS:
            raise CommandError(f"unknown command {name!r}")
        handler = getattr(self, f"_cmd_{name}")
        with self._lock:
            handler(cmd)
        if name == "snapshot":
            self._compose_once()
        elif name == "set_profile" and self._threads:
            self._restart_telemetry()
        state = self.view_state()
        for cb in list(self._state_listeners):
            cb(state)
        return state

    def _cmd_set_joints(self, cmd: dict) -> None:
        tel = self._telemetry
        try:
            joints = JointState(
                boom_deg=float(cmd.get("boom_deg", tel.joints.boom_deg)),
                arm_deg=float(cmd.get("arm_deg", tel.joints.arm_deg)),
                bucket_deg=float(cmd.get("bucket_deg", tel.joints.bucket_deg)),
                timestamp_ms=int(time.monotonic() * 1000),
            )
        except (TypeError, ValueError) as exc:
            raise CommandError(f"bad set_joints payload: {exc}") from exc
        joints.check(self.rig.limits)
        self._telemetry = _Telemetry(joints=joints, attitude=tel.attitude, seq=tel.seq + 1)

    def _cmd_set_attitude(self, cmd: dict) -> None:
        tel = self._telemetry
        try:
            attitude = RigAttitude(
                roll_deg=float(cmd.get("roll_deg", tel.attitude.roll_deg)),
                pitch_deg=float(cmd.get("pitch_deg", tel.attitude.pitch_deg)),
                yaw_deg=float(cmd.get("yaw_deg", tel.attitude.yaw_deg)),
                timestamp_ms=int(time.monotonic() * 1000),
            )
        except (TypeError, ValueError) as exc:
            # covers both malformed numbers and out-of-envelope angles
            raise CommandError(f"bad set_attitude payload: {exc}") from exc
        self._telemetry = _Telemetry(joints=tel.joints, attitude=attitude, seq=tel.seq + 1)
        self._want_attitude = attitude

    def _cmd_select_view(self, cmd: dict) -> None:
        view = cmd.get("view")
        names = [TOPVIEW] + [f"camera-{i + 1}" for i in range(len(self.cameras))]
        azimuths = {c.mount.azimuth: f"camera-{i + 1}" for i, c in enumerate(self.cameras)}
        if view in azimuths:
            view = azimuths[view]
        if view not in names:
            raise CommandError(f"unknown view {view!r}; expected one of {names}")
        self._active_view = view

    def _cmd_toggle_overlay(self, cmd: dict) -> None:
        self._overlay_on = bool(cmd["on"]) if "on" in cmd else not self._overlay_on

    def _cmd_toggle_calibration(self, cmd: dict) -> None:
        self._calibration_on = bool(cmd["on"]) if "on" in cmd else not self._calibration_on

    def _cmd_set_profile(self, cmd: dict) -> None:
        if "profile" not in cmd:
            raise CommandError("set_profile needs a 'profile' object")
        try:
            profile = profile_from_dict(cmd["profile"])
        except ConfigError as exc:
            raise CommandError(f"bad profile: {exc}") from exc
        self.profile = profile

    def _cmd_snapshot(self, cmd: dict) -> None:
        # state is untouched; handle_command composes a frame from the
        # active view right after releasing the lock
        pass

    # ------------------------------------------------------------------
    # composing

    def _compose_once(self, wall_ms: int | None = None) -> PublishedFrame | None:
        """Compose and publish one frame from the newest inputs."""
        with self._lock:
            tel = self._telemetry
            prepared = self._prepared
            active = self._active_view
            overlay_on = self._overlay_on
            calibration_on = self._calibration_on
        if prepared is None:
            prepared = self._prepare_now(tel.attitude)

        # swap in frames matching the newest attitude once both they and
        # the maps are ready; never block composing on preparation
        if prepared.key != _att_key(tel.attitude):
            fresh = self.frame_source.ready(tel.attitude)
            maps = self.maps_cache.peek(tel.attitude)
            if fresh is not None and maps is not None:
                prepared = _Prepared(_att_key(tel.attitude), fresh, maps)
                with self._lock:
                    self._prepared = prepared

        t0 = time.perf_counter()
        pose = forward_kinematics(self.rig.links, tel.joints, self.rig.limits)
        payload = overlay_payload(pose, self.rig.links)
        if active == TOPVIEW:
            maps = prepared.maps if calibration_on else self.flat_maps
            image = compose_topview(prepared.frames, maps)
            if overlay_on:
                draw_overlay(image, payload, self.rig.mosaic)
        else:
            idx = int(active.split("-")[1]) - 1
            image = prepared.frames[idx].copy()

        now = time.perf_counter()
        frame = PublishedFrame(
            image=image,
            view=active,
            frame_seq=next(self._frame_seq),
            telemetry_seq=tel.seq,
            timestamp_ms=wall_ms if wall_ms is not None else int(time.monotonic() * 1000),
            overlay=payload if (overlay_on and active == TOPVIEW) else None,
        )
        with self._frame_cv:
            if self._last_composed_seq and tel.seq > self._last_composed_seq + 1:
                self._dropped += tel.seq - self._last_composed_seq - 1
            self._last_composed_seq = max(self._last_composed_seq, tel.seq)
            self._published = frame
            self._frames_published += 1
            self._publish_times.append(now)
            self._latency_ms.append((now - t0) * 1000.0)
            self._frame_cv.notify_all()
        for cb in list(self._listeners):
            cb(frame)
        return frame

    def snapshot(self) -> PublishedFrame:
        """Compose one frame immediately from the current state."""
        frame = self._compose_once()
        assert frame is not None
        return frame

    # ------------------------------------------------------------------
    # observation

    def latest_frame(self) -> PublishedFrame | None:
        with self._lock:
            return self._published

    def wait_for_frame(self, after_seq: int = 0, timeout: float = 2.0) -> PublishedFrame | None:
        """Block until a frame newer than ``after_seq`` is published."""
        deadline = time.monotonic() + timeout
        with self._frame_cv:
            while True:
                if self._published is not None and self._published.frame_seq > after_seq:
                    return self._published
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
                self._frame_cv.wait(remaining)

    def add_frame_listener(self, cb) -> None:
        self._listeners.append(cb)

    def remove_frame_listener(self, cb) -> None:
        if cb in self._listeners:
            self._listeners.remove(cb)

    def add_state_listener(self, cb) -> None:
        self._state_listeners.append(cb)

    def stats_report(self) -> PipelineStats:
        """Consistent snapshot of the pipeline counters."""
        now = time.perf_counter()
        with self._lock:
            window = [t for t in self._publish_times if now - t <= 1.0]
            if len(window) >= 2:
                span = window[-1] - window[0]
                fps = (len(window) - 1) / span if span > 0 else 0.0
            elif self._publish_times:
                fps = float(len(window))
            else:
                fps = 0.0
            latency = float(np.mean(self._latency_ms)) if self._latency_ms else None
            info = _cadence(self._info_arrivals)
            att = _cadence(self._att_arrivals)
            return PipelineStats(
                fps=fps,
                unpaced=self.mode == "virtual",
                frame_latency_ms=latency,
                dropped_frames=self._dropped,
                frames_published=self._frames_published,
                info_cadence=info,
                attitude_cadence=att,
            )

    # ------------------------------------------------------------------
    # realtime threads

    def start(self) -> None:
        """Spin up the realtime threads; no-op in virtual mode."""
        if self.mode != "realtime":
            raise ConfigError("start() applies to realtime mode; use run_virtual()")
        if self._threads:
            return
        self._stop.clear()
        self._telemetry_done.clear()
        if self._prepared is None:
            self.prewarm((self._telemetry.attitude,))
        threads = [threading.Thread(target=self._composer_loop, name="avm-composer", daemon=True)]
        if self.profile is not None:
            threads.append(
                threading.Thread(
                    target=self._telemetry_loop,
                    args=(self._profile_gen,),
                    name="avm-telemetry",
                    daemon=True,
                )
            )
        else:
            self._telemetry_done.set()
        threads.append(
            threading.Thread(target=self._prepare_loop, name="avm-prepare", daemon=True)
        )
        for t in threads:
            t.start()
        self._threads = threads

    def stop(self) -> None:
        self._stop.set()
        with self._frame_cv:
            self._frame_cv.notify_all()
        for t in self._threads:
            t.join(timeout=5.0)
        self._threads = []

    def _restart_telemetry(self) -> None:
        """Swap the live telemetry stream for the current profile."""
        with self._lock:
            self._profile_gen += 1
            gen = self._profile_gen
        self._telemetry_done.clear()
        t = threading.Thread(target=self._telemetry_loop, args=(gen,), name="avm-telemetry", daemon=True)
        t.start()
        self._threads.append(t)

    def _telemetry_loop(self, gen: int) -> None:
        profile = self.profile
        start = time.monotonic()
        for joints, attitude in telemetry_stream(profile, self.rig.limits):
            deadline = start + joints.timestamp_ms / 1000.0
            while not self._stop.is_set() and self._profile_gen == gen:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                time.sleep(min(remaining, 0.05))
            if self._stop.is_set() or self._profile_gen != gen:
                return
            self._ingest(joints, attitude, time.monotonic())
        self._telemetry_done.set()

    def _prepare_loop(self) -> None:
        while not self._stop.wait(0.01):
            with self._lock:
                want = self._want_attitude
                prepared = self._prepared
            if want is None:
                continue
            if prepared is not None and prepared.key == _att_key(want):
                continue
            # render and build outside the lock; if newer attitudes arrive
            # meanwhile the next cycle re-reads the slot and catches up
            self._prepare_now(want)

    def _composer_loop(self) -> None:
        while not self._stop.is_set():
            t0 = time.perf_counter()
            self._compose_once()
            elapsed = time.perf_counter() - t0
            budget = self.compose_period - elapsed
            if budget > 0:
                self._stop.wait(budget)

    def stream(self):
        """Yield published frames until the profile runs dry.

        Ends once the telemetry thread has delivered its last record and
        that record has reached a composed frame, so short profiles never
        lose their tail.  Requires :meth:`start` to have been called.
        """
        last_seq = 0
        while True:
            frame = self.wait_for_frame(after_seq=last_seq, timeout=2.0)
            if frame is not None:
                last_seq = frame.frame_seq
                yield frame
            if self._telemetry_done.is_set() and (
                frame is None or self.latest_frame().telemetry_seq >= self._telemetry.seq
            ):
                return

    # ------------------------------------------------------------------
    # virtual mode

    def run_virtual(self):
        """Drive the whole pipeline inline, one frame per telemetry record.

        Yields :class:`PublishedFrame`; timestamps carry the simulated
        clock.  A zero-duration profile still publishes one frame.
        """
        if self.mode != "virtual":
            raise ConfigError("run_virtual() applies to virtual mode")
        profile = self.profile or MotionProfile(duration_s=0.0)
        for joints, attitude in telemetry_stream(profile, self.rig.limits):
            self._ingest(joints, attitude, joints.timestamp_ms / 1000.0)
            self._prepare_now(attitude)
            frame = self._compose_once(wall_ms=joints.timestamp_ms)
            if frame is not None:
                yield frame


def _cadence(arrivals: deque) -> CadenceStats | None:
    if len(arrivals) < PipelineStats.MIN_CADENCE_SAMPLES + 1:
        return None
    gaps = np.diff(np.array(arrivals)) * 1000.0
    return CadenceStats(
        mean_ms=float(gaps.mean()),
        min_ms=float(gaps.min()),
        max_ms=float(gaps.max()),
        samples=int(gaps.size),
    )


def run_pipeline(
    rig: RigConfig,
    scene: Scene | None = None,
    profile: MotionProfile | None = None,
    mode: str = "realtime",
):
    """Run the pipeline for the profile's duration, yielding frames.

    Realtime mode paces telemetry against the wall clock and publishes
    at the composer rhythm; virtual mode produces exactly one frame per
    telemetry record as fast as possible.  The generator's ``.close()``
    shuts the service down; iterate fully or close explicitly.
    """
    service = AvmService(rig, scene=scene, profile=profile, mode=mode)
    if mode == "virtual":
        yield from service.run_virtual()
        return
    service.prewarm((service._telemetry.attitude,))
    service.start()
    try:
        yield from service.stream()
    finally:
        service.stop()
