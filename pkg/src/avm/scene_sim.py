"""Synthetic test world: fisheye renders of a known ground scene plus
simulated joint/attitude telemetry.

Stands in for cameras and sensors.  Camera views are ray cast through
the same equidistant model the projection module uses, so every pixel
has an exact provenance; the telemetry stream plays piecewise-linear
motion timelines at a fixed cadence in simulated time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .calibration import RigAttitude
from .errors import ConfigError
from .kinematics import DEFAULT_LIMITS, JointLimits, JointState
from .projection import CameraModel, CameraPose, MosaicSpec

BGR = tuple[int, int, int]

LIGHT_SQUARE: BGR = (205, 205, 205)
DARK_SQUARE: BGR = (70, 70, 70)
SKY: BGR = (190, 150, 60)
VIGNETTE: BGR = (0, 0, 0)


@dataclass(frozen=True)
class Marker:
    """Flat circular ground marker with an exactly known center."""

    id: str
    x: float
    y: float
    radius: float = 0.10
    color: BGR = (40, 40, 230)


@dataclass(frozen=True)
class BoxProp:
    """Axis-aligned box standing on the ground."""

    x: float
    y: float
    width: float
    depth: float
    height: float
    color: BGR = (60, 170, 230)


@dataclass(frozen=True)
class CylinderProp:
    """Vertical cylinder standing on the ground."""

    x: float
    y: float
    radius: float
    height: float
    color: BGR = (80, 200, 120)


@dataclass(frozen=True)
class Scene:
    """Checkerboard ground, unique markers, and a few solid props."""

    checker_pitch: float = 1.0
    light: BGR = LIGHT_SQUARE
    dark: BGR = DARK_SQUARE
    sky: BGR = SKY
    markers: tuple[Marker, ...] = ()
    props: tuple[BoxProp | CylinderProp, ...] = ()

    def __post_init__(self):
        if self.checker_pitch <= 0:
            raise ConfigError(f"checker pitch must be positive, got {self.checker_pitch}")
        ids = [m.id for m in self.markers]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"marker ids must be unique, got {ids}")

    def check_extent(self, extent: float) -> None:
        for m in self.markers:
            if abs(m.x) > extent or abs(m.y) > extent:
                raise ConfigError(f"marker {m.id!r} at ({m.x}, {m.y}) outside the {extent} m extent")


def ground_color(scene: Scene, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Color of the bare ground (checker + markers) at world (x, y)."""
    xi = np.floor(x / scene.checker_pitch).astype(np.int64)
    yi = np.floor(y / scene.checker_pitch).astype(np.int64)
    even = (xi + yi) % 2 == 0
    out = np.where(even[..., None], np.array(scene.light, np.uint8), np.array(scene.dark, np.uint8))
    for m in scene.markers:
        hit = (x - m.x) ** 2 + (y - m.y) ** 2 <= m.radius**2
        out[hit] = m.color
    return out.astype(np.uint8)


def _ray_box(origin: np.ndarray, dirs: np.ndarray, box: BoxProp) -> np.ndarray:
    lo = np.array([box.x - box.width / 2, box.y - box.depth / 2, 0.0])
    hi = np.array([box.x + box.width / 2, box.y + box.depth / 2, box.height])
    d = np.where(np.abs(dirs) < 1e-12, 1e-12, dirs)
    t_a = (lo - origin) / d
    t_b = (hi - origin) / d
    t_near = np.minimum(t_a, t_b).max(axis=-1)
    t_far = np.maximum(t_a, t_b).min(axis=-1)
    hit = (t_far >= t_near) & (t_far > 1e-9)
    t = np.where(t_near > 1e-9, t_near, t_far)
    return np.where(hit, t, np.inf)


def _ray_cylinder(origin: np.ndarray, dirs: np.ndarray, cyl: CylinderProp) -> np.ndarray:
    ox, oy, oz = origin
    dx, dy, dz = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    px, py = ox - cyl.x, oy - cyl.y

    a = dx**2 + dy**2
    b = 2.0 * (px * dx + py * dy)
    c = px**2 + py**2 - cyl.radius**2
    disc = b**2 - 4.0 * a * c
    sq = np.sqrt(np.clip(disc, 0.0, None))
    a_safe = np.where(a < 1e-12, 1.0, a)
    t0 = (-b - sq) / (2.0 * a_safe)
    t1 = (-b + sq) / (2.0 * a_safe)

    best = np.full(dirs.shape[:-1], np.inf)
    for t_side in (t0, t1):
        z = oz + t_side * dz
        ok = (disc >= 0) & (a >= 1e-12) & (t_side > 1e-9) & (z >= 0.0) & (z <= cyl.height)
        best = np.where(ok & (t_side < best), t_side, best)

    dz_safe = np.where(np.abs(dz) < 1e-12, 1e-12, dz)
    t_cap = (cyl.height - oz) / dz_safe
    cap_x = ox + t_cap * dx - cyl.x
    cap_y = oy + t_cap * dy - cyl.y
    ok = (np.abs(dz) >= 1e-12) & (t_cap > 1e-9) & (cap_x**2 + cap_y**2 <= cyl.radius**2)
    best = np.where(ok & (t_cap < best), t_cap, best)
    return best


def render_camera_view(scene: Scene, model: CameraModel, pose: CameraPose) -> np.ndarray:
    """Ray cast one fisheye view; uint8 BGR at the model's resolution."""
    w, h = model.width, model.height
    cx, cy = model.principal
    u, v = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    dx = u - cx
    dy = v - cy
    r = np.hypot(dx, dy)
    theta = r / model.focal_px
    in_circle = theta <= model.max_theta + 1e-12

    r_safe = np.where(r > 0, r, 1.0)
    sin_t = np.sin(theta)
    dirs = np.stack(
        [sin_t * dx / r_safe, sin_t * dy / r_safe, np.cos(theta)], axis=-1
    )
    dirs[r == 0] = (0.0, 0.0, 1.0)
    dirs = dirs @ pose.rotation.T

    origin = pose.position
    dz = dirs[..., 2]
    descending = dz < -1e-12
    t_ground = np.where(descending, -origin[2] / np.where(descending, dz, 1.0), np.inf)

    t_prop = np.full((h, w), np.inf)
    prop_color = np.zeros((h, w, 3), dtype=np.uint8)
    for prop in scene.props:
        t = _ray_box(origin, dirs, prop) if isinstance(prop, BoxProp) else _ray_cylinder(origin, dirs, prop)
        closer = t < t_prop
        t_prop = np.where(closer, t, t_prop)
        prop_color[closer] = prop.color

    out = np.zeros((h, w, 3), dtype=np.uint8)
    ground_hit = in_circle & np.isfinite(t_ground) & (t_ground < t_prop)
    if ground_hit.any():
        gx = origin[0] + t_ground[ground_hit] * dirs[..., 0][ground_hit]
        gy = origin[1] + t_ground[ground_hit] * dirs[..., 1][ground_hit]
        out[ground_hit] = ground_color(scene, gx, gy)
    prop_hit = in_circle & np.isfinite(t_prop) & (t_prop <= t_ground)
    out[prop_hit] = prop_color[prop_hit]
    sky_hit = in_circle & ~ground_hit & ~prop_hit
    out[sky_hit] = scene.sky
    out[~in_circle] = VIGNETTE
    return out


def _footprint_mask(prop, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    if isinstance(prop, BoxProp):
        return (np.abs(X - prop.x) <= prop.width / 2) & (np.abs(Y - prop.y) <= prop.depth / 2)
    return (X - prop.x) ** 2 + (Y - prop.y) ** 2 <= prop.radius**2


@dataclass(frozen=True)
class GroundTruth:
    """Orthographic reference view with exact marker pixel positions."""

    image: np.ndarray
    marker_px: dict[str, tuple[float, float]]
    occluded: frozenset[str]


def ground_truth(scene: Scene, spec: MosaicSpec) -> GroundTruth:
    """Rasterize the scene straight down at mosaic scale."""
    scene.check_extent(spec.extent)
    X, Y = spec.pixel_grid()
    image = ground_color(scene, X, Y)
    for prop in scene.props:
        image[_footprint_mask(prop, X, Y)] = prop.color

    marker_px = {}
    occluded = set()
    for m in scene.markers:
        px, py = spec.ground_to_px(m.x, m.y)
        marker_px[m.id] = (float(px), float(py))
        if any(_footprint_mask(p, np.array(m.x), np.array(m.y)) for p in scene.props):
            occluded.add(m.id)
    return GroundTruth(image=image, marker_px=marker_px, occluded=frozenset(occluded))


@dataclass(frozen=True)
class Timeline:
    """Piecewise-linear value over time; clamped outside the span."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.points:
            raise ConfigError("timeline needs at least one point")
        times = [t for t, _ in self.points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError(f"timeline times must strictly increase, got {times}")

    @classmethod
    def const(cls, value: float) -> "Timeline":
        return cls(((0.0, value),))

    def at(self, t_s: float) -> float:
        times = [t for t, _ in self.points]
        values = [v for _, v in self.points]
        return float(np.interp(t_s, times, values))


@dataclass(frozen=True)
class MotionProfile:
    """Joint and attitude timelines for one simulated run."""

    duration_s: float
    cadence_ms: int = 300
    boom: Timeline = field(default_factory=lambda: Timeline.const(0.0))
    arm: Timeline = field(default_factory=lambda: Timeline.const(0.0))
    bucket: Timeline = field(default_factory=lambda: Timeline.const(0.0))
    roll: Timeline = field(default_factory=lambda: Timeline.const(0.0))
    pitch: Timeline = field(default_factory=lambda: Timeline.const(0.0))
    yaw: Timeline = field(default_factory=lambda: Timeline.const(0.0))

    def __post_init__(self):
        if self.duration_s < 0:
            raise ConfigError(f"duration must be >= 0, got {self.duration_s}")
        if self.cadence_ms <= 0:
            raise ConfigError(f"cadence must be positive, got {self.cadence_ms}")

    def joint_state(self, t_ms: int) -> JointState:
        t = t_ms / 1000.0
        return JointState(
            boom_deg=self.boom.at(t),
            arm_deg=self.arm.at(t),
            bucket_deg=self.bucket.at(t),
            timestamp_ms=t_ms,
        )

    def attitude(self, t_ms: int) -> RigAttitude:
        t = t_ms / 1000.0
        return RigAttitude(
            roll_deg=self.roll.at(t),
            pitch_deg=self.pitch.at(t),
            yaw_deg=self.yaw.at(t),
            timestamp_ms=t_ms,
        )


def telemetry_stream(
    profile: MotionProfile,
    limits: JointLimits = DEFAULT_LIMITS,
) -> Iterator[tuple[JointState, RigAttitude]]:
    """Yield (joints, attitude) at the profile cadence, t=0 through the
    duration inclusive, timestamps in simulated milliseconds."""
    duration_ms = int(round(profile.duration_s * 1000.0))
    for t in range(0, duration_ms + 1, profile.cadence_ms):
        joints = profile.joint_state(t)
        joints.check(limits)
        yield joints, profile.attitude(t)


def default_scene(extent: float = 8.0) -> Scene:
    """Checkerboard with rings of markers and a couple of props."""
    markers = []
    for i, dist in enumerate((2.0, 3.5, 5.0, 6.5)):
        for j, bearing_deg in enumerate((0.0, 90.0, 180.0, 270.0)):
            b = np.radians(bearing_deg + 22.5 * i)
            markers.append(
                Marker(id=f"r{dist * 10:.0f}_{j}", x=float(dist * np.cos(b)), y=float(dist * np.sin(b)))
            )
    props = (
        BoxProp(x=5.5, y=5.5, width=0.8, depth=0.8, height=1.0),
        CylinderProp(x=-5.5, y=-4.5, radius=0.4, height=1.2),
    )
    scene = Scene(markers=tuple(markers), props=props)
    scene.check_extent(extent)
    return scene
