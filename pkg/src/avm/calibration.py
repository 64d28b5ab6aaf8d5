"""Rig attitude handling and tilt recalibration.

The rig body's roll/pitch/yaw is composed intrinsically: yaw about the
vertical axis first, then pitch about the lateral (right) axis, then
roll about the longitudinal (forward) axis.  Axes follow the rig frame
used everywhere in this package: x right, y forward, z up.  Positive
roll dips the right side; positive pitch dips the nose... rotations
follow the right-hand rule about +y and +x respectively, so a point at
lateral offset +1 m drops by sin(roll).

Recalibration rebuilds the projection lookup maps with each camera's
pose composed through the attitude rotation, instead of warping the
already-distorted mosaic; the ground stays the world z=0 plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .errors import AttitudeEnvelopeError, MarkerOutsideError

if TYPE_CHECKING:
    from .projection import CameraModel, LookupMaps, MosaicSpec, RigBody
    from .scene_sim import Scene

ENVELOPE_DEG = 30.0
DEBOUNCE_DEG = 0.1


@dataclass(frozen=True)
class RigAttitude:
    """Body roll/pitch/yaw in degrees, with the sample timestamp.

    Roll and pitch are limited to the operational envelope; yaw is
    normalized into [0, 360).
    """

    roll_deg: float = 0.0
    pitch_deg: float = 0.0
    yaw_deg: float = 0.0
    timestamp_ms: int = 0

    def __post_init__(self):
        if abs(self.roll_deg) > ENVELOPE_DEG or abs(self.pitch_deg) > ENVELOPE_DEG:
            raise AttitudeEnvelopeError(
                f"roll/pitch ({self.roll_deg:.2f}, {self.pitch_deg:.2f}) outside "
                f"the +/-{ENVELOPE_DEG:.0f} deg envelope"
            )
        object.__setattr__(self, "yaw_deg", self.yaw_deg % 360.0)

    @property
    def is_level(self) -> bool:
        return self.roll_deg == 0.0 and self.pitch_deg == 0.0 and self.yaw_deg == 0.0

    def quantized(self, step_deg: float = DEBOUNCE_DEG) -> "RigAttitude":
        """Snap to a ``step_deg`` grid so sensor noise reuses cached maps."""
        q = lambda a: round(a / step_deg) * step_deg
        return RigAttitude(q(self.roll_deg), q(self.pitch_deg), q(self.yaw_deg), self.timestamp_ms)


IDENTITY_ATTITUDE = RigAttitude()


def rot_x(angle_deg: float) -> np.ndarray:
    """Right-handed rotation about the x (lateral) axis."""
    c, s = math.cos(math.radians(angle_deg)), math.sin(math.radians(angle_deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle_deg: float) -> np.ndarray:
    """Right-handed rotation about the y (longitudinal) axis."""
    c, s = math.cos(math.radians(angle_deg)), math.sin(math.radians(angle_deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle_deg: float) -> np.ndarray:
    """Right-handed rotation about the z (vertical) axis."""
    c, s = math.cos(math.radians(angle_deg)), math.sin(math.radians(angle_deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def attitude_rotation(att: RigAttitude) -> np.ndarray:
    """3x3 rotation taking rig-frame vectors to world-frame vectors."""
    return rot_z(att.yaw_deg) @ rot_x(att.pitch_deg) @ rot_y(att.roll_deg)


def recalibrate(
    cameras: Sequence["CameraModel"],
    att: RigAttitude,
    spec: "MosaicSpec",
    body: "RigBody | None" = None,
) -> "LookupMaps":
    """Rebuild lookup maps with every camera pose tilted by ``att``.

    The identity attitude reproduces the flat-ground maps bit-exactly.
    """
    from . import projection

    if abs(att.roll_deg) > ENVELOPE_DEG or abs(att.pitch_deg) > ENVELOPE_DEG:
        raise AttitudeEnvelopeError(f"attitude {att} outside calibration envelope")
    return projection.build_lookup_maps(cameras, att, spec, body=body)


class MapCache:
    """Debounced cache of lookup maps keyed by quantized attitude."""

    def __init__(self, cameras: Sequence["CameraModel"], spec: "MosaicSpec",
                 body: "RigBody | None" = None, step_deg: float = DEBOUNCE_DEG):
        self._cameras = tuple(cameras)
        self._spec = spec
        self._body = body
        self._step = step_deg
        self._cache: dict[tuple[float, float, float], "LookupMaps"] = {}

    def _key(self, att: RigAttitude) -> tuple[float, float, float]:
        snapped = att.quantized(self._step)
        return (snapped.roll_deg, snapped.pitch_deg, snapped.yaw_deg)

    def get(self, att: RigAttitude) -> "LookupMaps":
        key = self._key(att)
        maps = self._cache.get(key)
        if maps is None:
            maps = recalibrate(self._cameras, RigAttitude(*key), self._spec, self._body)
            self._cache[key] = maps
        return maps

    def peek(self, att: RigAttitude) -> "LookupMaps | None":
        """Cached maps for ``att``, or None; never builds."""
        return self._cache.get(self._key(att))

    def __len__(self) -> int:
        return len(self._cache)


@dataclass(frozen=True)
class MosaicCapture:
    """A composed (or reference) top view plus exact marker positions.

    ``marker_px`` holds sub-pixel (x, y) image positions per marker id,
    computed analytically from the projection geometry rather than by
    vision: the scene simulator provides exact marker world positions,
    so where each marker lands in a mosaic is a matter of lookup.
    """

    image: np.ndarray
    marker_px: Mapping[str, tuple[float, float]]
    spec: "MosaicSpec"
    map_attitude: RigAttitude = IDENTITY_ATTITUDE
    scene_attitude: RigAttitude = IDENTITY_ATTITUDE


def predict_marker_positions(
    markers: Iterable[tuple[str, float, float]],
    cameras: Sequence["CameraModel"],
    maps: "LookupMaps",
    scene_attitude: RigAttitude,
) -> dict[str, tuple[float, float]]:
    """Mosaic position of each marker when frames taken at ``scene_attitude``
    are resampled through ``maps``.

    A marker imaged by camera pixel p shows up at the mosaic pixel whose
    stored source coordinate is p, i.e. at the ground point the map
    *believes* pixel p sees.  With matching attitudes that ground point
    is the marker itself; with mismatched attitudes it is displaced.
    """
    from . import projection

    spec = maps.spec
    out: dict[str, tuple[float, float]] = {}
    true_poses = [projection.camera_pose_matrix(c.mount, scene_attitude) for c in cameras]
    map_poses = [projection.camera_pose_matrix(c.mount, maps.attitude) for c in cameras]
    for mid, wx, wy in markers:
        world = np.array([[wx, wy, 0.0]])
        best: tuple[float, tuple[float, float]] | None = None
        for ci, cam in enumerate(cameras):
            uv, ok = projection.project_ground(cam, true_poses[ci], world)
            if not ok[0]:
                continue
            ground, gok = projection.unproject_to_ground(cam, map_poses[ci], uv)
            if not gok[0]:
                continue
            px, py = spec.ground_to_px(ground[0, 0], ground[0, 1])
            col, row = int(round(px)), int(round(py))
            side = spec.side_px
            if not (0 <= col < side and 0 <= row < side):
                continue
            w = float(maps.weight[ci, row, col])
            if best is None or w > best[0]:
                best = (w, (float(px), float(py)))
        if best is None:
            raise MarkerOutsideError(f"marker {mid!r} not visible on the mosaic")
        out[mid] = best[1]
    return out


def stitched_capture(
    scene: "Scene",
    cameras: Sequence["CameraModel"],
    maps: "LookupMaps",
    scene_attitude: RigAttitude,
    frames: Sequence[np.ndarray] | None = None,
) -> MosaicCapture:
    """Render (or reuse) camera frames at ``scene_attitude``, stitch them
    through ``maps``, and attach the analytic marker positions."""
    from . import projection, scene_sim

    if frames is None:
        frames = [
            scene_sim.render_camera_view(scene, cam, projection.camera_pose_matrix(cam.mount, scene_attitude))
            for cam in cameras
        ]
    image = projection.compose_topview(frames, maps)
    marker_px = predict_marker_positions(
        [(m.id, m.x, m.y) for m in scene.markers], cameras, maps, scene_attitude
    )
    return MosaicCapture(
        image=image,
        marker_px=marker_px,
        spec=maps.spec,
        map_attitude=maps.attitude,
        scene_attitude=scene_attitude,
    )


@dataclass(frozen=True)
class DistortionStats:
    """Marker displacement between two mosaics, meters on the ground."""

    mean_m: float
    max_m: float
    per_marker_m: dict[str, float] = field(default_factory=dict)


def distortion_metric(
    test: MosaicCapture,
    reference: MosaicCapture,
    marker_ids: Iterable[str] | None = None,
) -> DistortionStats:
    """Mean/max Euclidean displacement of marker images, in meters."""
    if test.spec.side_px != reference.spec.side_px or test.spec.scale != reference.spec.scale:
        raise ValueError("mosaics do not share a raster definition")
    ids = list(marker_ids) if marker_ids is not None else sorted(
        set(test.marker_px) & set(reference.marker_px)
    )
    if not ids:
        raise ValueError("no common markers to compare")
    side = test.spec.side_px
    per: dict[str, float] = {}
    for mid in ids:
        try:
            tx, ty = test.marker_px[mid]
            rx, ry = reference.marker_px[mid]
        except KeyError as exc:
            raise MarkerOutsideError(f"marker {mid!r} missing from a mosaic") from exc
        for x, y in ((tx, ty), (rx, ry)):
            if not (0 <= x < side and 0 <= y < side):
                raise MarkerOutsideError(f"marker {mid!r} falls off the mosaic at ({x:.1f}, {y:.1f})")
        per[mid] = math.hypot(tx - rx, ty - ry) / test.spec.scale
    values = list(per.values())
    return DistortionStats(mean_m=sum(values) / len(values), max_m=max(values), per_marker_m=per)
