"""Ground-plane projection and 360-degree top-view stitching.

Conventions used throughout:

* World/rig frame: x right, y forward, z up; origin at the rig center
  on the ground.  With a level rig the two frames coincide; under tilt
  the attitude rotates each camera's viewing direction while mounting
  positions stay as measured (see camera_pose_matrix).
* Mosaic raster: square, ``side = 2 * extent * scale`` pixels, rig
  center at the middle; image columns grow with +x, rows grow with -y.
* Camera frame: image x right, image y down, optical axis +z (out of
  the lens).  Fisheye mapping is equidistant, ``r_px = f_px * theta``
  with theta the angle off the optical axis; the image circle is
  inscribed in the sensor (radius ``min(width, height) / 2``) so the
  whole angular cone is captured on the short side.

Stitching is inverse-mapped: every mosaic pixel knows, per camera,
which source pixel to sample and with what blend weight.  Weights come
from fixed angular sectors per rig face, feathered linearly across a
band at the diagonal seams, masked by per-camera visibility and
renormalized.  Where the owning sector's cameras cannot see the ground
point but some other camera can, the camera closest in bearing takes
over, so coverage degrades gracefully instead of leaving seams blind.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import cv2
import numpy as np

from .calibration import IDENTITY_ATTITUDE, RigAttitude, attitude_rotation, rot_x, rot_z
from .camgeom import Azimuth, CameraMount, LensSpec
from .errors import ConfigError

MAPS_VERSION = 1
DEFAULT_FEATHER_DEG = 10.0

# Camera axes (columns) in the rig frame for a front-facing camera with
# no tilt: image x -> rig +x, image y -> rig -z, optical axis -> rig +y.
_CAMERA_BASE = np.array([
    [1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, -1.0, 0.0],
])

_FACE_YAW_DEG = {
    Azimuth.FRONT: 0.0,
    Azimuth.LEFT: 90.0,
    Azimuth.REAR: 180.0,
    Azimuth.RIGHT: -90.0,
}

# Ground bearing (counterclockwise from +x, degrees) of each sector center.
_FACE_BEARING_DEG = {
    Azimuth.FRONT: 90.0,
    Azimuth.LEFT: 180.0,
    Azimuth.REAR: -90.0,
    Azimuth.RIGHT: 0.0,
}


@dataclass(frozen=True)
class RigBody:
    """Rig body footprint/height used for self-occlusion and the glyph."""

    width: float = 2.5
    depth: float = 3.5
    height: float = 2.2

    def __post_init__(self):
        if self.width <= 0 or self.depth <= 0 or self.height <= 0:
            raise ConfigError(f"rig body dimensions must be positive, got {self}")


DEFAULT_BODY = RigBody()


@dataclass(frozen=True)
class MosaicSpec:
    """Top-view raster: half-width in meters and pixels per meter."""

    extent: float = 8.0
    scale: float = 50.0

    def __post_init__(self):
        if self.extent <= 0 or self.scale <= 0:
            raise ConfigError(f"mosaic extent and scale must be positive, got {self}")

    @property
    def side_px(self) -> int:
        return int(round(2.0 * self.extent * self.scale))

    @property
    def center_px(self) -> float:
        """Rig-center position along either axis, pixel-center convention."""
        return (self.side_px - 1) / 2.0

    def ground_to_px(self, x, y):
        """Ground meters -> (column, row), sub-pixel."""
        return self.center_px + np.asarray(x) * self.scale, self.center_px - np.asarray(y) * self.scale

    def px_to_ground(self, col, row):
        """(column, row) -> ground meters."""
        return (np.asarray(col) - self.center_px) / self.scale, (self.center_px - np.asarray(row)) / self.scale

    def pixel_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Ground (X, Y) coordinates of every pixel center, shape [side, side]."""
        idx = np.arange(self.side_px, dtype=np.float64)
        cols, rows = np.meshgrid(idx, idx)
        return self.px_to_ground(cols, rows)


@dataclass(frozen=True)
class CameraModel:
    """A mounted fisheye camera: placement plus equidistant optics."""

    mount: CameraMount
    lens: LensSpec
    image_circle_px: float | None = None

    def __post_init__(self):
        if self.image_circle_px is not None and self.image_circle_px <= 0:
            raise ConfigError(f"image circle radius must be positive, got {self.image_circle_px}")

    @property
    def width(self) -> int:
        return self.lens.resolution[0]

    @property
    def height(self) -> int:
        return self.lens.resolution[1]

    @property
    def principal(self) -> tuple[float, float]:
        return (self.width - 1) / 2.0, (self.height - 1) / 2.0

    @property
    def max_theta(self) -> float:
        """Half field of view, radians."""
        return math.radians(self.lens.full_fov_deg) / 2.0

    @property
    def circle_radius_px(self) -> float:
        """Image radius at max_theta; defaults to the inscribed circle."""
        if self.image_circle_px is not None:
            return self.image_circle_px
        return min(self.width, self.height) / 2.0

    @property
    def focal_px(self) -> float:
        return self.circle_radius_px / self.max_theta


@dataclass(frozen=True)
class CameraPose:
    """Rigid camera pose: rotation columns are camera axes in world."""

    rotation: np.ndarray
    position: np.ndarray

    def world_to_cam(self, pts: np.ndarray) -> np.ndarray:
        return (np.asarray(pts, dtype=np.float64) - self.position) @ self.rotation

    def dirs_to_world(self, dirs: np.ndarray) -> np.ndarray:
        return np.asarray(dirs, dtype=np.float64) @ self.rotation.T

    @property
    def optical_axis(self) -> np.ndarray:
        """Viewing direction in world coordinates."""
        return self.rotation[:, 2].copy()


def camera_pose_matrix(mount: CameraMount, attitude: RigAttitude = IDENTITY_ATTITUDE) -> CameraPose:
    """World pose of a mounted camera under the given rig attitude.

    The mount pose points the camera out of its rig face, swings it by
    the in-plane rotation (positive toward the rig's left), then dips
    it by the tilt.  The rig attitude then tilts the viewing direction
    about the camera's own mounting point: orientations carry the whole
    inclination signal, while mounting positions are used as measured —
    where a tilting rig actually pivots depends on the terrain, and the
    resulting position change is second-order next to the orientation
    change, which grows with viewing range.
    """
    r_att = attitude_rotation(attitude)
    yaw = _FACE_YAW_DEG[Azimuth(mount.azimuth)] + mount.yaw_offset_deg
    rotation = r_att @ rot_z(yaw) @ rot_x(-mount.tilt_deg) @ _CAMERA_BASE
    position = np.asarray(mount.position, dtype=np.float64)
    return CameraPose(rotation=rotation, position=position)


def project_ground(model: CameraModel, pose: CameraPose, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project world points into the fisheye image.

    pts is [N, 2] (ground, z=0 implied) or [N, 3].  Returns ([N, 2]
    sub-pixel (u, v), [N] validity).  Out-of-view is reported through
    the validity mask, never as an error.
    """
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise ValueError(f"expected [N, 2] or [N, 3] points, got shape {pts.shape}")
    if pts.shape[1] == 2:
        pts = np.column_stack([pts, np.zeros(len(pts))])

    v = pose.world_to_cam(pts)
    norm = np.linalg.norm(v, axis=1)
    safe_norm = np.where(norm > 0, norm, 1.0)
    theta = np.arccos(np.clip(v[:, 2] / safe_norm, -1.0, 1.0))

    rho = np.hypot(v[:, 0], v[:, 1])
    safe_rho = np.where(rho > 0, rho, 1.0)
    r_px = model.focal_px * theta
    cx, cy = model.principal
    u = cx + r_px * v[:, 0] / safe_rho
    vv = cy + r_px * v[:, 1] / safe_rho
    on_axis = rho == 0
    u[on_axis] = cx
    vv[on_axis] = cy

    valid = (
        (norm > 1e-12)
        & (theta <= model.max_theta + 1e-12)
        & (u >= 0.0) & (u <= model.width - 1.0)
        & (vv >= 0.0) & (vv <= model.height - 1.0)
    )
    return np.column_stack([u, vv]), valid


def unproject_to_ground(model: CameraModel, pose: CameraPose, uv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cast pixel rays back onto the world ground plane z=0.

    Returns ([N, 2] ground (x, y), [N] validity); invalid where the
    pixel is outside the image circle or its ray never hits the ground.
    """
    uv = np.asarray(uv, dtype=np.float64)
    cx, cy = model.principal
    dx = uv[:, 0] - cx
    dy = uv[:, 1] - cy
    r_px = np.hypot(dx, dy)
    theta = r_px / model.focal_px
    inside = theta <= model.max_theta + 1e-12

    safe_r = np.where(r_px > 0, r_px, 1.0)
    sin_t = np.sin(theta)
    dirs = np.column_stack([sin_t * dx / safe_r, sin_t * dy / safe_r, np.cos(theta)])
    dirs[r_px == 0] = (0.0, 0.0, 1.0)

    d_world = pose.dirs_to_world(dirs)
    dz = d_world[:, 2]
    descending = dz < -1e-12
    t = np.where(descending, -pose.position[2] / np.where(descending, dz, 1.0), np.nan)
    ground = pose.position[None, :2] + t[:, None] * d_world[:, :2]
    valid = inside & descending & (t > 0)
    ground[~valid] = 0.0
    return ground, valid


def _sector_weights(bearing_deg: np.ndarray, center_deg: float, feather_deg: float) -> np.ndarray:
    """Weight of one face's sector at each bearing: 1 inside, linear
    ramp across the feather band at the 45-degree seams, 0 outside."""
    delta = np.abs((bearing_deg - center_deg + 180.0) % 360.0 - 180.0)
    half = 45.0
    fe = feather_deg / 2.0
    w = np.clip((half + fe - delta) / (2.0 * fe), 0.0, 1.0)
    w[delta <= half - fe] = 1.0
    return w


@dataclass(frozen=True, eq=False)
class LookupMaps:
    """Precomputed per-pixel stitching tables for one attitude.

    mapx/mapy/weight are [n_cams, side, side] float32; a weight of 0
    means the camera does not contribute there.  ``covered`` flags
    pixels any camera serves; the rig-body footprint is never covered.
    """

    spec: MosaicSpec
    attitude: RigAttitude
    azimuths: tuple[str, ...]
    resolutions: tuple[tuple[int, int], ...]
    mapx: np.ndarray
    mapy: np.ndarray
    weight: np.ndarray
    covered: np.ndarray
    rig_mask: np.ndarray
    key: str
    version: int = MAPS_VERSION

    @property
    def weight3(self) -> np.ndarray:
        """Blend weights repeated across 3 channels, built lazily once;
        keeps the per-frame compose loop free of large allocations."""
        cached = getattr(self, "_weight3", None)
        if cached is None:
            cached = np.ascontiguousarray(np.repeat(self.weight[:, :, :, None], 3, axis=3))
            object.__setattr__(self, "_weight3", cached)
        return cached

    def save(self, path) -> None:
        np.savez_compressed(
            path,
            version=np.int64(self.version),
            key=np.str_(self.key),
            spec=np.array([self.spec.extent, self.spec.scale]),
            attitude=np.array([self.attitude.roll_deg, self.attitude.pitch_deg, self.attitude.yaw_deg]),
            attitude_ts=np.int64(self.attitude.timestamp_ms),
            azimuths=np.array(list(self.azimuths)),
            resolutions=np.array(self.resolutions, dtype=np.int64),
            mapx=self.mapx,
            mapy=self.mapy,
            weight=self.weight,
            covered=self.covered,
            rig_mask=self.rig_mask,
        )

    @classmethod
    def load(cls, path) -> "LookupMaps":
        with np.load(path, allow_pickle=False) as data:
            version = int(data["version"])
            if version != MAPS_VERSION:
                raise ConfigError(f"lookup-map cache version {version} not supported (expected {MAPS_VERSION})")
            roll, pitch, yaw = (float(a) for a in data["attitude"])
            return cls(
                spec=MosaicSpec(extent=float(data["spec"][0]), scale=float(data["spec"][1])),
                attitude=RigAttitude(roll, pitch, yaw, int(data["attitude_ts"])),
                azimuths=tuple(str(a) for a in data["azimuths"]),
                resolutions=tuple((int(w), int(h)) for w, h in data["resolutions"]),
                mapx=data["mapx"],
                mapy=data["mapy"],
                weight=data["weight"],
                covered=data["covered"],
                rig_mask=data["rig_mask"],
                key=str(data["key"]),
                version=version,
            )


def maps_cache_key(
    cameras: Sequence[CameraModel],
    attitude: RigAttitude,
    spec: MosaicSpec,
    body: RigBody,
    feather_deg: float,
) -> str:
    """Stable hash identifying one lookup-map build configuration."""
    desc = {
        "version": MAPS_VERSION,
        "spec": [spec.extent, spec.scale],
        "attitude": [attitude.roll_deg, attitude.pitch_deg, attitude.yaw_deg],
        "body": [body.width, body.depth, body.height],
        "feather": feather_deg,
        "cameras": [
            {
                "azimuth": str(c.mount.azimuth.value if isinstance(c.mount.azimuth, Azimuth) else c.mount.azimuth),
                "tilt": c.mount.tilt_deg,
                "yaw_offset": c.mount.yaw_offset_deg,
                "position": list(c.mount.position),
                "fov": c.lens.full_fov_deg,
                "resolution": list(c.lens.resolution),
                "circle": c.circle_radius_px,
            }
            for c in cameras
        ],
    }
    return hashlib.sha256(json.dumps(desc, sort_keys=True).encode()).hexdigest()


def build_lookup_maps(
    cameras: Sequence[CameraModel],
    attitude: RigAttitude = IDENTITY_ATTITUDE,
    spec: MosaicSpec = MosaicSpec(),
    body: RigBody | None = None,
    feather_deg: float = DEFAULT_FEATHER_DEG,
) -> LookupMaps:
    """Inverse-map every mosaic pixel into every camera and assign
    blend weights.  Deterministic for identical inputs."""
    if not cameras:
        raise ConfigError("at least one camera is required")
    azimuths = [Azimuth(c.mount.azimuth) for c in cameras]
    if len(set(azimuths)) != len(azimuths):
        raise ConfigError(f"cameras must have distinct azimuths, got {[a.value for a in azimuths]}")
    if body is None:
        body = DEFAULT_BODY

    side = spec.side_px
    X, Y = spec.pixel_grid()
    flat_pts = np.column_stack([X.ravel(), Y.ravel()])
    bearing = np.degrees(np.arctan2(Y.ravel(), X.ravel()))

    n = len(cameras)
    mapx = np.full((n, side, side), -1.0, dtype=np.float32)
    mapy = np.full((n, side, side), -1.0, dtype=np.float32)
    visible = np.zeros((n, side * side), dtype=bool)
    sector = np.zeros((n, side * side), dtype=np.float64)
    uvs = np.zeros((n, side * side, 2), dtype=np.float64)

    for i, cam in enumerate(cameras):
        pose = camera_pose_matrix(cam.mount, attitude)
        uv, ok = project_ground(cam, pose, flat_pts)
        visible[i] = ok
        uvs[i] = uv
        sector[i] = _sector_weights(bearing, _FACE_BEARING_DEG[azimuths[i]], feather_deg)

    weights = sector * visible
    total = weights.sum(axis=0)

    # Seam rescue: a pixel whose sector owners cannot see it falls back
    # to the visible camera nearest in bearing (first wins on ties).
    orphan = (total <= 0) & visible.any(axis=0)
    if orphan.any():
        gap = np.stack([
            np.abs((bearing - _FACE_BEARING_DEG[az] + 180.0) % 360.0 - 180.0)
            for az in azimuths
        ])
        gap = np.where(visible, gap, np.inf)
        champion = gap.argmin(axis=0)
        weights[:, orphan] = 0.0
        weights[champion[orphan], np.flatnonzero(orphan)] = 1.0
        total = weights.sum(axis=0)

    rig_mask = (np.abs(X) <= body.width / 2.0) & (np.abs(Y) <= body.depth / 2.0)
    total[rig_mask.ravel()] = 0.0
    weights[:, rig_mask.ravel()] = 0.0

    covered_flat = total > 0
    weights = np.where(covered_flat, weights / np.where(covered_flat, total, 1.0), 0.0)

    weight = weights.reshape(n, side, side).astype(np.float32)
    for i in range(n):
        use = (weights[i] > 0)
        mx = np.where(use, uvs[i, :, 0], -1.0)
        my = np.where(use, uvs[i, :, 1], -1.0)
        mapx[i] = mx.reshape(side, side).astype(np.float32)
        mapy[i] = my.reshape(side, side).astype(np.float32)

    return LookupMaps(
        spec=spec,
        attitude=attitude,
        azimuths=tuple(a.value for a in azimuths),
        resolutions=tuple((c.width, c.height) for c in cameras),
        mapx=mapx,
        mapy=mapy,
        weight=weight,
        covered=covered_flat.reshape(side, side),
        rig_mask=rig_mask,
        key=maps_cache_key(cameras, attitude, spec, body, feather_deg),
    )


def compose_topview(
    frames: Sequence[np.ndarray] | Mapping[str, np.ndarray],
    maps: LookupMaps,
    rig_glyph: bool = True,
) -> np.ndarray:
    """Stitch camera frames into a BGRA mosaic.

    Accepts frames as a sequence aligned with ``maps.azimuths`` or as a
    mapping keyed by azimuth name.  Uncovered pixels are pure black
    with alpha 0; the rig footprint is painted with a body glyph.
    """
    if isinstance(frames, Mapping):
        try:
            ordered = [frames[a] for a in maps.azimuths]
        except KeyError as exc:
            raise ConfigError(f"missing frame for azimuth {exc.args[0]!r}") from exc
    else:
        ordered = list(frames)
    if len(ordered) != len(maps.azimuths):
        raise ConfigError(f"expected {len(maps.azimuths)} frames, got {len(ordered)}")
    for frame, (w, h), az in zip(ordered, maps.resolutions, maps.azimuths):
        if frame.shape[0] != h or frame.shape[1] != w:
            raise ConfigError(
                f"frame for {az} is {frame.shape[1]}x{frame.shape[0]}, camera expects {w}x{h}"
            )

    acc = None
    for i, frame in enumerate(ordered):
        if frame.ndim == 2:
            frame = cv2.cvtColor(frame, cv2.COLOR_GRAY2BGR)
        warped = cv2.remap(
            frame, maps.mapx[i], maps.mapy[i],
            interpolation=cv2.INTER_LINEAR,
            borderMode=cv2.BORDER_CONSTANT,
            borderValue=0,
        )
        term = cv2.multiply(warped, maps.weight3[i], dtype=cv2.CV_32F)
        acc = term if acc is None else cv2.add(acc, term, dst=acc)

    rgb = cv2.convertScaleAbs(acc)
    rgb[~maps.covered] = 0
    alpha = np.where(maps.covered, 255, 0).astype(np.uint8)

    if rig_glyph and maps.rig_mask.any():
        _paint_rig_glyph(rgb, alpha, maps)

    return np.dstack([rgb, alpha])


def _paint_rig_glyph(rgb: np.ndarray, alpha: np.ndarray, maps: LookupMaps) -> None:
    rows, cols = np.nonzero(maps.rig_mask)
    top, bottom = rows.min(), rows.max()
    left, right = cols.min(), cols.max()
    rgb[maps.rig_mask] = (70, 70, 70)
    cv2.rectangle(rgb, (left, top), (right, bottom), (110, 110, 110), 1)
    # Heading wedge pointing toward the rig front (+y is up in the image).
    cx = (left + right) // 2
    h = bottom - top
    wedge = np.array([
        [cx, top + max(2, h // 12)],
        [cx - max(3, (right - left) // 6), top + h // 3],
        [cx + max(3, (right - left) // 6), top + h // 3],
    ])
    cv2.fillPoly(rgb, [wedge], (160, 160, 160))
    alpha[maps.rig_mask] = 255


@dataclass(frozen=True)
class CoverageReport:
    """How much ground the stitched view actually serves."""

    radius_m: float
    scan_limit_m: float
    blind_px: int
    covered_px: int
    sector_px: dict[str, int]
    scale: float

    @property
    def sector_area_m2(self) -> dict[str, float]:
        return {az: px / self.scale**2 for az, px in self.sector_px.items()}

    def to_dict(self) -> dict:
        return {
            "radius_m": round(self.radius_m, 3),
            "scan_limit_m": self.scan_limit_m,
            "blind_px": self.blind_px,
            "covered_px": self.covered_px,
            "sector_px": dict(self.sector_px),
            "sector_area_m2": {az: round(a, 2) for az, a in self.sector_area_m2.items()},
        }


def coverage_report(maps: LookupMaps) -> CoverageReport:
    """Largest radius around the rig with no blind pixel, plus per-camera
    sector tallies.  The scan cannot vouch past the raster half-width,
    so the radius is capped at the mosaic extent."""
    X, Y = maps.spec.pixel_grid()
    dist = np.hypot(X, Y)
    uncovered = ~maps.covered & ~maps.rig_mask
    if uncovered.any():
        radius = float(min(dist[uncovered].min(), maps.spec.extent))
    else:
        radius = float(maps.spec.extent)

    owner = maps.weight.argmax(axis=0)
    sector_px = {}
    for i, az in enumerate(maps.azimuths):
        sector_px[az] = int(((owner == i) & maps.covered).sum())
    return CoverageReport(
        radius_m=radius,
        scan_limit_m=maps.spec.extent,
        blind_px=int(uncovered.sum()),
        covered_px=int(maps.covered.sum()),
        sector_px=sector_px,
        scale=maps.spec.scale,
    )
