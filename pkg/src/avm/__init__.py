"""Around-view monitoring for excavators: camera planning, top-view
stitching, working-information overlay, and tilt recalibration, driven
by a synthetic scene and served over a small TCP/JSON protocol."""

from .calibration import (
    IDENTITY_ATTITUDE,
    DistortionStats,
    MapCache,
    MosaicCapture,
    RigAttitude,
    attitude_rotation,
    distortion_metric,
    predict_marker_positions,
    recalibrate,
    stitched_capture,
)
from .camgeom import (
    Azimuth,
    CameraMount,
    DisplayRange,
    ImageRange,
    LensSpec,
    PlanningReport,
    fov_from_image_range,
    image_range,
    lens_satisfies,
    min_k_over_f,
    planning_report,
)
from .config import (
    RigCamera,
    RigConfig,
    default_profile,
    default_rig,
    load_profile,
    load_rig,
    load_scene,
)
from .errors import (
    AttitudeEnvelopeError,
    CommandError,
    ConfigError,
    JointRangeError,
    MarkerOutsideError,
    ProtocolError,
)
from .kinematics import (
    DEFAULT_LIMITS,
    JointLimits,
    JointState,
    LinkGeometry,
    OverlayPayload,
    PoseSolution,
    forward_kinematics,
    overlay_payload,
)
from .projection import (
    CameraModel,
    CameraPose,
    CoverageReport,
    LookupMaps,
    MosaicSpec,
    RigBody,
    build_lookup_maps,
    camera_pose_matrix,
    compose_topview,
    coverage_report,
    project_ground,
    unproject_to_ground,
)
from .scene_sim import (
    BoxProp,
    CylinderProp,
    GroundTruth,
    Marker,
    MotionProfile,
    Scene,
    Timeline,
    default_scene,
    ground_truth,
    render_camera_view,
    telemetry_stream,
)
from .service import (
    AvmService,
    CadenceStats,
    PipelineStats,
    PublishedFrame,
    ViewState,
    draw_overlay,
    run_pipeline,
)
from .wire import (
    WireServer,
    decode_envelope,
    encode_envelope,
    make_envelope,
)

__version__ = "0.1.0"
