"""Rig, scene, and motion-profile records with their JSON file formats.

The default rig reproduces the measured four-camera layout: a low
front camera with an in-plane slant, taller side and rear cameras, a
148-degree lens at 1600x1200, and a 16 m square mosaic at 50 px/m on a
2.5 x 3.5 m body.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .camgeom import Azimuth, CameraMount, DisplayRange, LensSpec
from .errors import ConfigError
from .kinematics import JointLimits, LinkGeometry
from .projection import CameraModel, MosaicSpec, RigBody
from .scene_sim import BoxProp, CylinderProp, Marker, MotionProfile, Scene, Timeline


@dataclass(frozen=True)
class RigCamera:
    """One camera with the ground rectangle it is responsible for."""

    name: str
    mount: CameraMount
    display: DisplayRange


@dataclass(frozen=True)
class RigConfig:
    cameras: tuple[RigCamera, ...]
    lens: LensSpec
    links: LinkGeometry
    limits: JointLimits
    body: RigBody
    mosaic: MosaicSpec

    def camera_models(self) -> list[CameraModel]:
        return [CameraModel(mount=c.mount, lens=self.lens) for c in self.cameras]

    def planning_rows(self) -> list[tuple[str, CameraMount, DisplayRange]]:
        return [(c.name, c.mount, c.display) for c in self.cameras]


def default_rig() -> RigConfig:
    body = RigBody(width=2.5, depth=3.5, height=2.2)
    half_w, half_d = body.width / 2.0, body.depth / 2.0
    cameras = (
        RigCamera(
            name="front",
            mount=CameraMount(
                height=1.50, tilt_deg=24.40, yaw_offset_deg=10.80, plane_distance=3.63,
                azimuth=Azimuth.FRONT, position=(0.0, half_d, 1.50),
            ),
            display=DisplayRange(width=9.80, depth=6.50),
        ),
        RigCamera(
            name="left",
            mount=CameraMount(
                height=2.20, tilt_deg=33.90, yaw_offset_deg=0.0, plane_distance=3.94,
                azimuth=Azimuth.LEFT, position=(-half_w, 0.0, 2.20),
            ),
            display=DisplayRange(width=15.60, depth=6.55),
        ),
        RigCamera(
            name="right",
            mount=CameraMount(
                height=2.20, tilt_deg=33.90, yaw_offset_deg=0.0, plane_distance=3.94,
                azimuth=Azimuth.RIGHT, position=(half_w, 0.0, 2.20),
            ),
            display=DisplayRange(width=15.60, depth=6.55),
        ),
        RigCamera(
            name="rear",
            mount=CameraMount(
                height=2.20, tilt_deg=37.90, yaw_offset_deg=0.0, plane_distance=3.58,
                azimuth=Azimuth.REAR, position=(0.0, -half_d, 2.20),
            ),
            display=DisplayRange(width=9.80, depth=5.65),
        ),
    )
    return RigConfig(
        cameras=cameras,
        lens=LensSpec(fov_deg=148.0, resolution=(1600, 1200)),
        links=LinkGeometry(boom_length=4.6, arm_length=2.5, bucket_length=1.0,
                           pivot_height=1.2, slew_offset=0.3),
        limits=JointLimits(),
        body=body,
        mosaic=MosaicSpec(extent=8.0, scale=50.0),
    )


def rig_to_dict(rig: RigConfig) -> dict:
    return {
        "lens": {"fov_deg": rig.lens.full_fov_deg, "resolution": list(rig.lens.resolution)},
        "body": {"width": rig.body.width, "depth": rig.body.depth, "height": rig.body.height},
        "mosaic": {"extent": rig.mosaic.extent, "scale": rig.mosaic.scale},
        "links": {
            "boom": rig.links.boom_length,
            "arm": rig.links.arm_length,
            "bucket": rig.links.bucket_length,
            "pivot_height": rig.links.pivot_height,
            "slew_offset": rig.links.slew_offset,
        },
        "limits": {
            "boom": list(rig.limits.boom),
            "arm": list(rig.limits.arm),
            "bucket": list(rig.limits.bucket),
        },
        "cameras": [
            {
                "name": c.name,
                "azimuth": c.mount.azimuth.value,
                "height": c.mount.height,
                "tilt_deg": c.mount.tilt_deg,
                "yaw_offset_deg": c.mount.yaw_offset_deg,
                "plane_distance": c.mount.plane_distance,
                "position": list(c.mount.position),
                "display": [c.display.width, c.display.depth],
            }
            for c in rig.cameras
        ],
    }


def rig_from_dict(data: dict) -> RigConfig:
    try:
        lens = LensSpec(
            fov_deg=data["lens"].get("fov_deg"),
            sensor_size=data["lens"].get("sensor_size"),
            focal_length=data["lens"].get("focal_length"),
            resolution=tuple(data["lens"].get("resolution", (1600, 1200))),
        )
        body_d = data.get("body", {})
        body = RigBody(
            width=body_d.get("width", 2.5),
            depth=body_d.get("depth", 3.5),
            height=body_d.get("height", 2.2),
        )
        mosaic_d = data.get("mosaic", {})
        mosaic = MosaicSpec(extent=mosaic_d.get("extent", 8.0), scale=mosaic_d.get("scale", 50.0))
        links_d = data["links"]
        links = LinkGeometry(
            boom_length=links_d["boom"],
            arm_length=links_d["arm"],
            bucket_length=links_d["bucket"],
            pivot_height=links_d["pivot_height"],
            slew_offset=links_d.get("slew_offset", 0.0),
        )
        limits_d = data.get("limits", {})
        limits = JointLimits(
            boom=tuple(limits_d.get("boom", (-20.0, 80.0))),
            arm=tuple(limits_d.get("arm", (-160.0, 0.0))),
            bucket=tuple(limits_d.get("bucket", (-90.0, 90.0))),
        )
        cameras = tuple(
            RigCamera(
                name=c.get("name", c["azimuth"]),
                mount=CameraMount(
                    height=c["height"],
                    tilt_deg=c["tilt_deg"],
                    yaw_offset_deg=c.get("yaw_offset_deg", 0.0),
                    plane_distance=c["plane_distance"],
                    azimuth=Azimuth(c["azimuth"]),
                    position=tuple(c["position"]),
                ),
                display=DisplayRange(width=c["display"][0], depth=c["display"][1]),
            )
            for c in data["cameras"]
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad rig config: {exc!r}") from exc
    return RigConfig(cameras=cameras, lens=lens, links=links, limits=limits, body=body, mosaic=mosaic)


def scene_to_dict(scene: Scene) -> dict:
    props = []
    for p in scene.props:
        if isinstance(p, BoxProp):
            props.append({"kind": "box", "x": p.x, "y": p.y, "width": p.width,
                          "depth": p.depth, "height": p.height, "color": list(p.color)})
        else:
            props.append({"kind": "cylinder", "x": p.x, "y": p.y, "radius": p.radius,
                          "height": p.height, "color": list(p.color)})
    return {
        "checker_pitch": scene.checker_pitch,
        "light": list(scene.light),
        "dark": list(scene.dark),
        "sky": list(scene.sky),
        "markers": [
            {"id": m.id, "x": m.x, "y": m.y, "radius": m.radius, "color": list(m.color)}
            for m in scene.markers
        ],
        "props": props,
    }


def scene_from_dict(data: dict) -> Scene:
    try:
        markers = tuple(
            Marker(
                id=m["id"], x=m["x"], y=m["y"],
                radius=m.get("radius", 0.10),
                color=tuple(m.get("color", (40, 40, 230))),
            )
            for m in data.get("markers", ())
        )
        props = []
        for p in data.get("props", ()):
            kind = p.get("kind", "box")
            if kind == "box":
                props.append(BoxProp(x=p["x"], y=p["y"], width=p["width"], depth=p["depth"],
                                     height=p["height"], color=tuple(p.get("color", (60, 170, 230)))))
            elif kind == "cylinder":
                props.append(CylinderProp(x=p["x"], y=p["y"], radius=p["radius"],
                                          height=p["height"], color=tuple(p.get("color", (80, 200, 120)))))
            else:
                raise ConfigError(f"unknown prop kind {kind!r}")
        return Scene(
            checker_pitch=data.get("checker_pitch", 1.0),
            light=tuple(data.get("light", (205, 205, 205))),
            dark=tuple(data.get("dark", (70, 70, 70))),
            sky=tuple(data.get("sky", (190, 150, 60))),
            markers=markers,
            props=tuple(props),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad scene config: {exc!r}") from exc


def _timeline_from(value: Any) -> Timeline:
    if isinstance(value, (int, float)):
        return Timeline.const(float(value))
    return Timeline(tuple((float(t), float(v)) for t, v in value))


def profile_to_dict(profile: MotionProfile) -> dict:
    def tl(t: Timeline):
        return [[a, b] for a, b in t.points]

    return {
        "duration_s": profile.duration_s,
        "cadence_ms": profile.cadence_ms,
        "boom": tl(profile.boom),
        "arm": tl(profile.arm),
        "bucket": tl(profile.bucket),
        "roll": tl(profile.roll),
        "pitch": tl(profile.pitch),
        "yaw": tl(profile.yaw),
    }


def profile_from_dict(data: dict) -> MotionProfile:
    try:
        return MotionProfile(
            duration_s=data["duration_s"],
            cadence_ms=data.get("cadence_ms", 300),
            boom=_timeline_from(data.get("boom", 0.0)),
            arm=_timeline_from(data.get("arm", 0.0)),
            bucket=_timeline_from(data.get("bucket", 0.0)),
            roll=_timeline_from(data.get("roll", 0.0)),
            pitch=_timeline_from(data.get("pitch", 0.0)),
            yaw=_timeline_from(data.get("yaw", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad motion profile: {exc!r}") from exc


def default_profile(duration_s: float = 10.0) -> MotionProfile:
    """Gentle dig-and-swing cycle with a roll wobble inside the envelope."""
    d = duration_s
    return MotionProfile(
        duration_s=d,
        cadence_ms=300,
        boom=Timeline(((0.0, 10.0), (d * 0.4, 35.0), (d, 15.0))),
        arm=Timeline(((0.0, -30.0), (d * 0.5, -70.0), (d, -40.0))),
        bucket=Timeline(((0.0, 0.0), (d * 0.6, 25.0), (d, 5.0))),
        roll=Timeline(((0.0, 0.0), (d * 0.5, 3.0), (d, 0.0))),
        pitch=Timeline.const(0.0),
        yaw=Timeline.const(0.0),
    )


def _load_json(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {p}: {exc}") from exc


def load_rig(path) -> RigConfig:
    return rig_from_dict(_load_json(path))


def load_scene(path) -> Scene:
    return scene_from_dict(_load_json(path))


def load_profile(path) -> MotionProfile:
    return profile_from_dict(_load_json(path))


def save_json(data: dict, path) -> None:
    Path(path).write_text(json.dumps(data, indent=2) + "\n")
