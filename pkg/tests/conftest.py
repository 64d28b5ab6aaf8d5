from dataclasses import replace

import pytest

from avm import (
    CameraModel,
    LensSpec,
    MosaicSpec,
    build_lookup_maps,
    camera_pose_matrix,
    default_rig,
    default_scene,
    render_camera_view,
)


@pytest.fixture(scope="session")
def rig():
    return default_rig()


@pytest.fixture(scope="session")
def cams(rig):
    return rig.camera_models()


@pytest.fixture(scope="session")
def scene():
    return default_scene()


@pytest.fixture(scope="session")
def flat_maps(rig, cams):
    return build_lookup_maps(cams, spec=rig.mosaic, body=rig.body)


@pytest.fixture(scope="session")
def flat_frames(scene, cams):
    return [render_camera_view(scene, c, camera_pose_matrix(c.mount)) for c in cams]


@pytest.fixture(scope="session")
def small_cams(rig):
    # Same geometry at low resolution: keeps repeated map builds and
    # renders cheap in property tests.
    lens = LensSpec(fov_deg=148.0, resolution=(320, 240))
    return [CameraModel(mount=c.mount, lens=lens) for c in rig.cameras]


@pytest.fixture(scope="session")
def small_spec():
    return MosaicSpec(extent=8.0, scale=12.5)


@pytest.fixture(scope="session")
def small_rig(rig, small_spec):
    # Full default geometry at a quarter of the resolution so each
    # render set takes tenths of a second instead of seconds.
    return replace(
        rig,
        lens=LensSpec(fov_deg=148.0, resolution=(320, 240)),
        mosaic=small_spec,
    )
