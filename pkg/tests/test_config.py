import json

import pytest

from avm.config import (
    default_profile,
    default_rig,
    load_profile,
    load_rig,
    load_scene,
    profile_from_dict,
    profile_to_dict,
    rig_from_dict,
    rig_to_dict,
    save_json,
    scene_from_dict,
    scene_to_dict,
)
from avm.camgeom import planning_report
from avm.errors import ConfigError
from avm.scene_sim import BoxProp, CylinderProp, default_scene, telemetry_stream


class TestDefaultRig:
    def test_lens_clears_every_camera(self):
        rig = default_rig()
        report = planning_report(rig.planning_rows(), rig.lens)
        assert report.all_ok

    def test_four_cameras_distinct_azimuths(self):
        rig = default_rig()
        assert len(rig.cameras) == 4
        assert len({c.mount.azimuth for c in rig.cameras}) == 4

    def test_camera_models_align_with_cameras(self):
        rig = default_rig()
        models = rig.camera_models()
        assert len(models) == 4
        for cam, model in zip(rig.cameras, models):
            assert model.mount is cam.mount


class TestRigRoundTrip:
    def test_dict_round_trip(self):
        rig = default_rig()
        again = rig_from_dict(rig_to_dict(rig))
        assert rig_to_dict(again) == rig_to_dict(rig)

    def test_json_serializable(self):
        payload = json.dumps(rig_to_dict(default_rig()))
        assert rig_to_dict(rig_from_dict(json.loads(payload))) == rig_to_dict(default_rig())

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "rig.json"
        save_json(rig_to_dict(default_rig()), path)
        rig = load_rig(path)
        assert rig_to_dict(rig) == rig_to_dict(default_rig())

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_rig(tmp_path / "absent.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_rig(path)

    def test_missing_key_reported_as_config_error(self):
        d = rig_to_dict(default_rig())
        del d["lens"]
        with pytest.raises(ConfigError):
            rig_from_dict(d)

    def test_bad_camera_entry(self):
        d = rig_to_dict(default_rig())
        d["cameras"][0]["tilt_deg"] = -5.0
        with pytest.raises(ConfigError):
            rig_from_dict(d)


class TestSceneRoundTrip:
    def test_dict_round_trip(self):
        scene = default_scene()
        again = scene_from_dict(scene_to_dict(scene))
        assert scene_to_dict(again) == scene_to_dict(scene)
        assert again.markers == scene.markers

    def test_prop_kinds_preserved(self):
        scene = default_scene()
        again = scene_from_dict(scene_to_dict(scene))
        kinds = [type(p) for p in again.props]
        assert BoxProp in kinds and CylinderProp in kinds

    def test_unknown_prop_kind_rejected(self):
        d = scene_to_dict(default_scene())
        d["props"][0]["kind"] = "sphere"
        with pytest.raises(ConfigError):
            scene_from_dict(d)

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "scene.json"
        save_json(scene_to_dict(default_scene()), path)
        assert scene_to_dict(load_scene(path)) == scene_to_dict(default_scene())


class TestProfileRoundTrip:
    def test_dict_round_trip(self):
        profile = default_profile()
        again = profile_from_dict(profile_to_dict(profile))
        assert profile_to_dict(again) == profile_to_dict(profile)

    def test_scalar_becomes_constant_timeline(self):
        d = profile_to_dict(default_profile())
        d["bucket"] = 12.5
        profile = profile_from_dict(d)
        assert profile.bucket.at(0.0) == 12.5
        assert profile.bucket.at(99.0) == 12.5

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "profile.json"
        save_json(profile_to_dict(default_profile(duration_s=4.0)), path)
        profile = load_profile(path)
        assert profile.duration_s == 4.0

    def test_default_profile_streams_clean(self):
        profile = default_profile(duration_s=6.0)
        records = list(telemetry_stream(profile))
        assert len(records) == 21
        rolls = [a.roll_deg for _, a in records]
        assert max(rolls) == pytest.approx(3.0)
        assert rolls[0] == 0.0 and rolls[-1] == 0.0
