"""Forward kinematics of the boom/arm/bucket linkage.

Coordinates live in the vertical working plane of the linkage: origin at
the boom attachment point, x positive away from the rig, y positive up.
Boom and arm angles are measured against the horizontal; the bucket
angle against the vertical, so a zero bucket angle hangs the bucket
straight down.  All angles are signed degrees.

    boom tip   = (boom * cos(t_boom),             boom * sin(t_boom))
    arm tip    = boom tip + (arm * cos(t_arm),    arm * sin(t_arm))
    bucket tip = arm tip  + (-bucket * sin(t_bkt), -bucket * cos(t_bkt))
    ground distance = bucket tip y + pivot height
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import JointRangeError

Vec2 = tuple[float, float]


@dataclass(frozen=True)
class LinkGeometry:
    """Link lengths and mounting of the working linkage, meters."""

    boom_length: float
    arm_length: float
    bucket_length: float
    pivot_height: float
    slew_offset: float = 0.0  # horizontal distance slew axis -> boom pivot

    def __post_init__(self):
        for name in ("boom_length", "arm_length", "bucket_length"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.pivot_height < 0:
            raise ValueError(f"pivot_height must be >= 0, got {self.pivot_height}")


@dataclass(frozen=True)
class JointLimits:
    """Mechanical angle ranges, degrees. Configuration defaults, not measured values."""

    boom: tuple[float, float] = (-20.0, 80.0)
    arm: tuple[float, float] = (-160.0, 0.0)
    bucket: tuple[float, float] = (-90.0, 90.0)


DEFAULT_LIMITS = JointLimits()


@dataclass(frozen=True)
class JointState:
    """Signed joint angles, degrees, plus the sample timestamp."""

    boom_deg: float
    arm_deg: float
    bucket_deg: float
    timestamp_ms: int = 0

    def check(self, limits: JointLimits = DEFAULT_LIMITS) -> None:
        for value, (lo, hi), name in (
            (self.boom_deg, limits.boom, "boom"),
            (self.arm_deg, limits.arm, "arm"),
            (self.bucket_deg, limits.bucket, "bucket"),
        ):
            if not lo <= value <= hi:
                raise JointRangeError(
                    f"{name} angle {value:.2f} deg outside mechanical range [{lo}, {hi}]"
                )


@dataclass(frozen=True)
class PoseSolution:
    """Computed linkage pose in the working plane."""

    boom_tip: Vec2
    arm_tip: Vec2
    bucket_tip: Vec2
    ground_distance: float  # bucket tip above ground; negative below grade
    slew_radius: float      # bucket tip distance from the slew axis


def forward_kinematics(
    links: LinkGeometry,
    joints: JointState,
    limits: JointLimits = DEFAULT_LIMITS,
) -> PoseSolution:
    """Solve tip coordinates and derived readouts for one joint state."""
    joints.check(limits)
    t_boom = math.radians(joints.boom_deg)
    t_arm = math.radians(joints.arm_deg)
    t_bkt = math.radians(joints.bucket_deg)

    ax = links.boom_length * math.cos(t_boom)
    ay = links.boom_length * math.sin(t_boom)
    bx = ax + links.arm_length * math.cos(t_arm)
    by = ay + links.arm_length * math.sin(t_arm)
    cx = bx - links.bucket_length * math.sin(t_bkt)
    cy = by - links.bucket_length * math.cos(t_bkt)

    return PoseSolution(
        boom_tip=(ax, ay),
        arm_tip=(bx, by),
        bucket_tip=(cx, cy),
        ground_distance=cy + links.pivot_height,
        slew_radius=links.slew_offset + cx,
    )


@dataclass(frozen=True)
class OverlayPayload:
    """Linkage geometry prepared for drawing over the top view.

    Segments are in the working plane (origin at the boom pivot, x out,
    y up), full precision; readouts are rounded to centimeters for
    display only.  ``slew_offset`` places the pivot relative to the slew
    axis so the drawing layer can map plane x onto the rig forward axis.
    """

    segments: tuple[tuple[Vec2, Vec2], ...]
    radius_m: float
    ground_distance_m: float
    slew_offset: float
    pivot_height: float
    readout_radius_m: float = field(init=False)
    readout_ground_distance_m: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "readout_radius_m", round(self.radius_m, 2))
        object.__setattr__(self, "readout_ground_distance_m", round(self.ground_distance_m, 2))

    def to_dict(self) -> dict:
        return {
            "segments": [[list(p0), list(p1)] for p0, p1 in self.segments],
            "radius_m": self.radius_m,
            "ground_distance_m": self.ground_distance_m,
            "slew_offset": self.slew_offset,
            "pivot_height": self.pivot_height,
            "readout_radius_m": self.readout_radius_m,
            "readout_ground_distance_m": self.readout_ground_distance_m,
        }


def overlay_payload(sol: PoseSolution, links: LinkGeometry) -> OverlayPayload:
    """Package a pose for the display overlay."""
    origin: Vec2 = (0.0, 0.0)
    return OverlayPayload(
        segments=(
            (origin, sol.boom_tip),
            (sol.boom_tip, sol.arm_tip),
            (sol.arm_tip, sol.bucket_tip),
        ),
        radius_m=sol.slew_radius,
        ground_distance_m=sol.ground_distance,
        slew_offset=links.slew_offset,
        pivot_height=links.pivot_height,
    )
