"""Camera and lens planning for the four-camera top-view rig.

Given the ground rectangle each camera must display and the camera's
mounting geometry (height, depression tilt, in-plane rotation), these
relations chain from display range to required ground footprint, to
required field of view, to the minimum sensor-size-to-focal-length
ratio a lens has to provide:

    footprint width  = display width * cos(rot) + display depth * sin(rot)
    footprint depth  = (display width * sin(rot) + display depth * cos(rot)) / sin(tilt)
    fov              = 2 * atan(footprint diagonal / (2 * plane distance))
    K/f              = 2 * tan(fov / 2)

Angles are degrees at the API boundary and radians internally.  The
sensor size K is treated as the sensor diagonal throughout, matching
the use of the footprint diagonal in the field-of-view relation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence


class Azimuth(str, Enum):
    """Which rig face a camera points away from."""

    FRONT = "front"
    LEFT = "left"
    RIGHT = "right"
    REAR = "rear"


@dataclass(frozen=True)
class DisplayRange:
    """Ground rectangle a camera must cover: width x depth, meters."""

    width: float
    depth: float

    def __post_init__(self):
        if self.width <= 0 or self.depth <= 0:
            raise ValueError(f"display range must be positive, got {self.width} x {self.depth}")


@dataclass(frozen=True)
class ImageRange:
    """Ground footprint the camera must actually image, meters."""

    width: float
    depth: float

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.depth)


@dataclass(frozen=True)
class CameraMount:
    """Placement of one camera on the rig body.

    height          mount height above ground, m
    tilt_deg        depression below horizontal, (0, 90]
    yaw_offset_deg  in-plane rotation away from the face normal, [0, 90)
    plane_distance  distance from camera to the display-range reference plane, m
    azimuth         rig face the camera points from
    position        (x, y, z) of the camera on the rig body, m; x right,
                    y forward, z up, origin at rig center on the ground
    """

    height: float
    tilt_deg: float
    yaw_offset_deg: float
    plane_distance: float
    azimuth: Azimuth
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.height <= 0:
            raise ValueError(f"mount height must be > 0, got {self.height}")
        if not 0.0 < self.tilt_deg <= 90.0:
            raise ValueError(f"tilt must be in (0, 90] degrees, got {self.tilt_deg}")
        if not 0.0 <= self.yaw_offset_deg < 90.0:
            raise ValueError(f"in-plane rotation must be in [0, 90) degrees, got {self.yaw_offset_deg}")
        if self.plane_distance <= 0:
            raise ValueError(f"plane distance must be > 0, got {self.plane_distance}")


@dataclass(frozen=True)
class LensSpec:
    """Lens and sensor description.

    Either the full field of view or the (sensor diagonal, focal length)
    pair must be given; if both are given they must agree through
    fov = 2*atan(K / 2f).
    """

    fov_deg: float | None = None
    sensor_size: float | None = None
    focal_length: float | None = None
    resolution: tuple[int, int] = (1600, 1200)

    def __post_init__(self):
        if self.fov_deg is None and (self.sensor_size is None or self.focal_length is None):
            raise ValueError("lens needs fov_deg or both sensor_size and focal_length")
        if self.fov_deg is not None and not 0.0 < self.fov_deg < 180.0:
            raise ValueError(f"fov must be in (0, 180) degrees, got {self.fov_deg}")
        if self.sensor_size is not None and self.focal_length is not None:
            implied = math.degrees(2.0 * math.atan(self.sensor_size / (2.0 * self.focal_length)))
            if self.fov_deg is not None and abs(implied - self.fov_deg) > 0.1:
                raise ValueError(
                    f"inconsistent lens: fov {self.fov_deg} deg vs {implied:.2f} deg implied "
                    f"by sensor {self.sensor_size} / focal {self.focal_length}"
                )
        if self.resolution[0] < 2 or self.resolution[1] < 2:
            raise ValueError(f"resolution must be at least 2x2, got {self.resolution}")

    @property
    def full_fov_deg(self) -> float:
        if self.fov_deg is not None:
            return self.fov_deg
        return math.degrees(2.0 * math.atan(self.sensor_size / (2.0 * self.focal_length)))

    @property
    def size_focal_ratio(self) -> float:
        """K/f implied by the field of view."""
        return 2.0 * math.tan(math.radians(self.full_fov_deg) / 2.0)


def image_range(display: DisplayRange, mount: CameraMount) -> ImageRange:
    """Ground footprint needed to show ``display`` from this mount."""
    rot = math.radians(mount.yaw_offset_deg)
    tilt = math.radians(mount.tilt_deg)
    if math.sin(tilt) <= 0.0:
        raise ValueError(f"tilt {mount.tilt_deg} deg leaves no ground intersection")
    width = display.width * math.cos(rot) + display.depth * math.sin(rot)
    depth = (display.width * math.sin(rot) + display.depth * math.cos(rot)) / math.sin(tilt)
    return ImageRange(width=width, depth=depth)


def fov_from_image_range(footprint: ImageRange, plane_distance: float) -> float:
    """Full diagonal field of view, degrees, needed to image ``footprint``."""
    if plane_distance <= 0:
        raise ValueError(f"plane distance must be > 0, got {plane_distance}")
    return math.degrees(2.0 * math.atan(footprint.diagonal / (2.0 * plane_distance)))


def min_k_over_f(display: DisplayRange, mount: CameraMount) -> float:
    """Minimum sensor-size-to-focal-length ratio for this camera.

    Equals 2*tan(fov/2) with the fov chained from the display range;
    algebraically the same as footprint diagonal / plane distance.
    """
    fov = fov_from_image_range(image_range(display, mount), mount.plane_distance)
    return 2.0 * math.tan(math.radians(fov) / 2.0)


def lens_satisfies(lens: LensSpec, required_ratio: float) -> bool:
    """True iff the lens ratio strictly exceeds the required minimum."""
    return lens.size_focal_ratio > required_ratio


@dataclass(frozen=True)
class PlanningRow:
    camera: str
    azimuth: str
    display: DisplayRange
    footprint: ImageRange
    fov_required_deg: float
    min_ratio: float
    lens_ratio: float
    ok: bool


@dataclass(frozen=True)
class PlanningReport:
    """Per-camera lens adequacy table."""

    rows: tuple[PlanningRow, ...]
    lens_fov_deg: float

    @property
    def all_ok(self) -> bool:
        return all(row.ok for row in self.rows)

    def to_dict(self) -> dict:
        return {
            "lens_fov_deg": round(self.lens_fov_deg, 2),
            "lens_ratio": round(2.0 * math.tan(math.radians(self.lens_fov_deg) / 2.0), 2),
            "cameras": [
                {
                    "camera": r.camera,
                    "azimuth": r.azimuth,
                    "display_m": [r.display.width, r.display.depth],
                    "footprint_m": [round(r.footprint.width, 3), round(r.footprint.depth, 3)],
                    "fov_required_deg": round(r.fov_required_deg, 2),
                    "min_k_over_f": round(r.min_ratio, 2),
                    "pass": r.ok,
                }
                for r in self.rows
            ],
            "all_pass": self.all_ok,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        header = f"{'camera':<10} {'fov req':>8} {'min K/f':>8} {'lens K/f':>9} {'result':>7}"
        lines = [header, "-" * len(header)]
        lens_ratio = 2.0 * math.tan(math.radians(self.lens_fov_deg) / 2.0)
        for r in self.rows:
            lines.append(
                f"{r.camera:<10} {r.fov_required_deg:>7.1f}° {r.min_ratio:>8.2f} "
                f"{lens_ratio:>9.2f} {'pass' if r.ok else 'FAIL':>7}"
            )
        return "\n".join(lines)


def planning_report(
    cameras: Sequence[tuple[str, CameraMount, DisplayRange]],
    lens: LensSpec,
) -> PlanningReport:
    """Build the lens adequacy table for a set of named cameras.

    Each entry is (name, mount, display range); values are kept at full
    precision internally and rounded only in the rendered output.
    """
    rows = []
    for name, mount, display in cameras:
        footprint = image_range(display, mount)
        fov = fov_from_image_range(footprint, mount.plane_distance)
        ratio = 2.0 * math.tan(math.radians(fov) / 2.0)
        rows.append(
            PlanningRow(
                camera=name,
                azimuth=mount.azimuth.value,
                display=display,
                footprint=footprint,
                fov_required_deg=fov,
                min_ratio=ratio,
                lens_ratio=lens.size_focal_ratio,
                ok=lens_satisfies(lens, ratio),
            )
        )
    return PlanningReport(rows=tuple(rows), lens_fov_deg=lens.full_fov_deg)
