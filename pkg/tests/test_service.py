"""Pipeline service: virtual runs, operator commands, realtime threads."""

import time

import numpy as np
import pytest

from avm.calibration import IDENTITY_ATTITUDE, RigAttitude
from avm.config import profile_to_dict
from avm.errors import CommandError, ConfigError, JointRangeError
from avm.kinematics import JointState, OverlayPayload, forward_kinematics, overlay_payload
from avm.scene_sim import MotionProfile, Timeline
from avm.service import (
    AvmService,
    CadenceStats,
    PipelineStats,
    ViewState,
    draw_overlay,
    run_pipeline,
)


def flat_profile(duration_s: float, cadence_ms: int = 300) -> MotionProfile:
    return MotionProfile(
        duration_s=duration_s,
        cadence_ms=cadence_ms,
        boom=Timeline(((0.0, 10.0), (max(duration_s, 0.001), 40.0))),
        arm=Timeline.const(-45.0),
    )


class TestVirtualRun:
    def test_zero_duration_yields_one_frame(self, small_rig):
        svc = AvmService(small_rig, profile=MotionProfile(duration_s=0.0), mode="virtual")
        frames = list(svc.run_virtual())
        assert len(frames) == 1
        assert frames[0].image.shape == (200, 200, 4)
        assert frames[0].image.dtype == np.uint8

    def test_one_frame_per_telemetry_record(self, small_rig):
        svc = AvmService(small_rig, profile=flat_profile(1.2), mode="virtual")
        frames = list(svc.run_virtual())
        assert len(frames) == 5
        assert [f.frame_seq for f in frames] == [1, 2, 3, 4, 5]
        assert [f.telemetry_seq for f in frames] == [1, 2, 3, 4, 5]
        assert [f.timestamp_ms for f in frames] == [0, 300, 600, 900, 1200]

    def test_stats_carry_unpaced_marker(self, small_rig):
        svc = AvmService(small_rig, profile=flat_profile(1.2), mode="virtual")
        list(svc.run_virtual())
        report = svc.stats_report()
        d = report.to_dict()
        assert d["unpaced"] is True
        assert d["frames_published"] == 5
        assert d["fps"] > 0

    def test_cadence_absent_below_sample_floor(self, small_rig):
        svc = AvmService(small_rig, profile=flat_profile(1.2), mode="virtual")
        list(svc.run_virtual())  # 5 records, too few gaps to trust
        d = svc.stats_report().to_dict()
        assert "info_cadence" not in d
        assert "attitude_cadence" not in d

    def test_cadence_reports_simulated_clock(self, small_rig):
        svc = AvmService(small_rig, profile=flat_profile(3.6), mode="virtual")
        list(svc.run_virtual())  # 13 records -> 12 gaps
        d = svc.stats_report().to_dict()
        assert d["info_cadence"]["mean_ms"] == pytest.approx(300.0)
        assert d["info_cadence"]["samples"] == 12
        assert d["attitude_cadence"]["mean_ms"] == pytest.approx(300.0)

    def test_rejects_realtime_entry_points(self, small_rig):
        svc = AvmService(small_rig, mode="virtual")
        with pytest.raises(ConfigError):
            svc.start()
        rt = AvmService(small_rig, mode="realtime")
        with pytest.raises(ConfigError):
            list(rt.run_virtual())

    def test_bad_mode_rejected(self, small_rig):
        with pytest.raises(ConfigError):
            AvmService(small_rig, mode="batch")


class TestCommands:
    @pytest.fixture()
    def svc(self, small_rig):
        return AvmService(small_rig, mode="virtual")

    def test_set_joints_merges_partial_payload(self, svc):
        svc.handle_command({"name": "set_joints", "boom_deg": 25.0, "arm_deg": -50.0})
        state = svc.handle_command({"name": "set_joints", "boom_deg": 30.0})
        assert state.joints.boom_deg == 30.0
        assert state.joints.arm_deg == -50.0  # untouched by the second command

    def test_out_of_range_joint_preserves_state(self, svc):
        svc.handle_command({"name": "set_joints", "boom_deg": 25.0})
        with pytest.raises(JointRangeError):
            svc.handle_command({"name": "set_joints", "boom_deg": 999.0})
        assert svc.view_state().joints.boom_deg == 25.0

    def test_set_attitude_updates_state(self, svc):
        state = svc.handle_command({"name": "set_attitude", "roll_deg": 2.5, "pitch_deg": -1.0})
        assert state.attitude.roll_deg == 2.5
        assert state.attitude.pitch_deg == -1.0

    def test_attitude_outside_envelope_rejected(self, svc):
        with pytest.raises(CommandError):
            svc.handle_command({"name": "set_attitude", "roll_deg": 31.0})
        assert svc.view_state().attitude.roll_deg == 0.0

    def test_select_view_accepts_azimuth_names(self, svc):
        azimuths = [c.mount.azimuth for c in svc.cameras]
        want = f"camera-{azimuths.index('left') + 1}"
        state = svc.handle_command({"name": "select_view", "view": "left"})
        assert state.active_view == want

    def test_select_view_rejects_unknown(self, svc):
        for view in ("camera-99", "sideways", None):
            with pytest.raises(CommandError):
                svc.handle_command({"name": "select_view", "view": view})
        assert svc.view_state().active_view == "topview"

    def test_toggles_flip_and_take_explicit_values(self, svc):
        assert svc.view_state().overlay_on is True
        assert svc.handle_command({"name": "toggle_overlay"}).overlay_on is False
        assert svc.handle_command({"name": "toggle_overlay"}).overlay_on is True
        assert svc.handle_command({"name": "toggle_overlay", "on": False}).overlay_on is False
        assert svc.handle_command({"name": "toggle_calibration", "on": False}).calibration_on is False
        assert svc.handle_command({"name": "toggle_calibration"}).calibration_on is True

    def test_unknown_command_rejected(self, svc):
        with pytest.raises(CommandError):
            svc.handle_command({"name": "self_destruct"})
        with pytest.raises(CommandError):
            svc.handle_command({"nome": "typo"})
        with pytest.raises(CommandError):
            svc.handle_command("set_joints")

    def test_set_profile_replaces_profile(self, svc):
        svc.handle_command({"name": "set_profile", "profile": profile_to_dict(flat_profile(0.6))})
        assert svc.profile.duration_s == 0.6
        with pytest.raises(CommandError):
            svc.handle_command({"name": "set_profile", "profile": {"cadence_ms": -1}})
        with pytest.raises(CommandError):
            svc.handle_command({"name": "set_profile"})

    def test_snapshot_publishes_current_view(self, svc):
        assert svc.latest_frame() is None
        svc.handle_command({"name": "snapshot"})
        frame = svc.latest_frame()
        assert frame is not None
        assert frame.view == "topview"
        assert frame.image.shape == (200, 200, 4)

    def test_camera_view_snapshot_is_raw_frame(self, svc):
        svc.handle_command({"name": "select_view", "view": "rear"})
        svc.handle_command({"name": "snapshot"})
        frame = svc.latest_frame()
        assert frame.view.startswith("camera-")
        assert frame.image.shape == (240, 320, 3)
        assert frame.overlay is None

    def test_state_listener_sees_every_command(self, svc):
        seen = []
        svc.add_state_listener(seen.append)
        svc.handle_command({"name": "set_joints", "boom_deg": 12.0})
        svc.handle_command({"name": "toggle_overlay"})
        assert len(seen) == 2
        assert all(isinstance(s, ViewState) for s in seen)
        assert seen[0].joints.boom_deg == 12.0

    def test_frame_listener_fires_on_snapshot(self, svc):
        seen = []
        svc.add_frame_listener(seen.append)
        svc.handle_command({"name": "snapshot"})
        assert len(seen) == 1
        assert seen[0].frame_seq == 1
        svc.remove_frame_listener(seen.append)
        svc.handle_command({"name": "snapshot"})
        assert len(seen) == 1

    def test_overlay_toggle_changes_pixels(self, svc):
        svc.handle_command({"name": "snapshot"})
        with_overlay = svc.latest_frame().image.copy()
        svc.handle_command({"name": "toggle_overlay", "on": False})
        svc.handle_command({"name": "snapshot"})
        without = svc.latest_frame().image
        assert with_overlay.shape == without.shape
        assert not np.array_equal(with_overlay, without)
        assert svc.latest_frame().overlay is None

    def test_overlay_payload_attached_to_topview_frames(self, svc):
        svc.handle_command({"name": "set_joints", "boom_deg": 30.0, "arm_deg": -60.0})
        svc.handle_command({"name": "snapshot"})
        frame = svc.latest_frame()
        assert isinstance(frame.overlay, OverlayPayload)
        assert frame.overlay.radius_m > 0


class TestCalibrationEffect:
    def test_tilt_correction_changes_mosaic(self, small_rig):
        profile = MotionProfile(duration_s=0.6, roll=Timeline.const(4.0))
        svc = AvmService(small_rig, profile=profile, mode="virtual")
        corrected = list(svc.run_virtual())[-1].image.copy()
        svc.handle_command({"name": "toggle_calibration", "on": False})
        svc.handle_command({"name": "snapshot"})
        flat = svc.latest_frame().image
        assert not np.array_equal(corrected, flat)

    def test_level_rig_correction_is_identity(self, small_rig):
        svc = AvmService(small_rig, profile=MotionProfile(duration_s=0.0), mode="virtual")
        corrected = list(svc.run_virtual())[-1].image.copy()
        svc.handle_command({"name": "toggle_calibration", "on": False})
        svc.handle_command({"name": "snapshot"})
        assert np.array_equal(corrected, svc.latest_frame().image)


class TestRealtime:
    def test_paced_run_publishes_at_compose_rate(self, small_rig):
        frames = list(run_pipeline(small_rig, profile=flat_profile(1.2), mode="realtime"))
        assert len(frames) >= 10  # ~36 at 30 Hz; leave head-room for slow machines
        seqs = [f.frame_seq for f in frames]
        assert seqs == sorted(seqs)
        assert len(set(seqs)) == len(seqs)
        tel = [f.telemetry_seq for f in frames]
        assert tel == sorted(tel)
        assert tel[-1] == 5  # the final record reached the screen

    def test_stream_stops_after_profile_drains(self, small_rig):
        svc = AvmService(small_rig, profile=flat_profile(0.6), mode="realtime")
        svc.prewarm()
        svc.start()
        t0 = time.monotonic()
        frames = list(svc.stream())
        elapsed = time.monotonic() - t0
        svc.stop()
        assert frames
        assert elapsed < 10.0
        assert svc._threads == []

    def test_set_profile_restarts_telemetry(self, small_rig):
        svc = AvmService(small_rig, mode="realtime")
        svc.prewarm()
        svc.start()
        try:
            # without a profile the stream has nothing pending
            svc.handle_command(
                {"name": "set_profile", "profile": profile_to_dict(flat_profile(0.6))}
            )
            frames = list(svc.stream())
            assert frames
            assert frames[-1].telemetry_seq >= 3
        finally:
            svc.stop()

    def test_wait_for_frame_times_out_quietly(self, small_rig):
        svc = AvmService(small_rig, mode="virtual")
        assert svc.wait_for_frame(after_seq=0, timeout=0.05) is None


class TestPrewarm:
    def test_prewarm_seeds_composer(self, small_rig):
        svc = AvmService(small_rig, mode="realtime")
        assert svc._prepared is None
        svc.prewarm()
        assert svc._prepared is not None
        svc.handle_command({"name": "snapshot"})
        assert svc.latest_frame() is not None

    def test_prewarm_covers_requested_attitudes(self, small_rig):
        svc = AvmService(small_rig, mode="realtime")
        tilted = RigAttitude(roll_deg=3.0)
        svc.prewarm((IDENTITY_ATTITUDE, tilted))
        assert svc.frame_source.ready(IDENTITY_ATTITUDE) is not None
        assert svc.frame_source.ready(tilted) is not None
        assert svc.maps_cache.peek(tilted) is not None


class TestStatsShapes:
    def test_report_omits_unknown_fields(self):
        stats = PipelineStats(
            fps=12.5,
            unpaced=False,
            frame_latency_ms=None,
            dropped_frames=0,
            frames_published=3,
            info_cadence=None,
            attitude_cadence=None,
        )
        d = stats.to_dict()
        assert d == {"fps": 12.5, "dropped_frames": 0, "frames_published": 3}

    def test_cadence_rounding(self):
        c = CadenceStats(mean_ms=300.12345, min_ms=299.999, max_ms=301.0051, samples=30)
        assert c.to_dict() == {
            "mean_ms": 300.12,
            "min_ms": 300.0,
            "max_ms": 301.01,
            "samples": 30,
        }

    def test_view_state_serialization(self, small_rig):
        svc = AvmService(small_rig, mode="virtual")
        d = svc.view_state().to_dict()
        assert d["active_view"] == "topview"
        assert d["overlay_on"] is True
        assert set(d["joints"]) >= {"boom_deg", "arm_deg", "bucket_deg"}
        assert set(d["attitude"]) >= {"roll_deg", "pitch_deg", "yaw_deg"}
        assert "ground_distance" in d["pose"] or "ground_distance_m" in d["pose"]


class TestDrawOverlay:
    def test_overlay_marks_canvas(self, small_rig):
        joints = JointState(boom_deg=30.0, arm_deg=-60.0, bucket_deg=10.0)
        pose = forward_kinematics(small_rig.links, joints, small_rig.limits)
        payload = overlay_payload(pose, small_rig.links)
        canvas = np.zeros((200, 200, 4), dtype=np.uint8)
        draw_overlay(canvas, payload, small_rig.mosaic)
        assert canvas.any()
        # the working-radius ring must put opaque pixels near its radius
        ys, xs = np.nonzero(canvas[..., 3])
        r = np.hypot(xs - 99.5, ys - 99.5) / small_rig.mosaic.scale
        on_ring = np.abs(r - payload.radius_m) < 0.2
        assert on_ring.sum() > 50
