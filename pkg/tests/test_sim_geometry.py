import json

import numpy as np
import pytest

from pegrl.sim import (
    GEOMETRY_NAMES,
    ConfigError,
    GeometrySpec,
    SimConfig,
    WallProfile,
    default_config,
    make_geometry,
)


class TestPresets:
    @pytest.mark.parametrize("name", GEOMETRY_NAMES)
    @pytest.mark.parametrize("clearance", [1.5, 0.25, 0.05])
    def test_all_presets_validate(self, name, clearance):
        geo = make_geometry(name, clearance_c=clearance)
        assert geo.name == name
        # the bore gap the peg mates with is exactly peg width + clearance
        bore = geo.left_wall.min_half_width() + geo.right_wall.min_half_width()
        assert bore == pytest.approx(geo.peg_width + clearance, abs=1e-9)

    @pytest.mark.parametrize("name", GEOMETRY_NAMES)
    def test_width_non_increasing_with_depth(self, name):
        geo = make_geometry(name, clearance_c=0.25)
        depths = np.linspace(0, geo.hole_depth, 200)
        widths = [geo.width_at(d) for d in depths]
        assert all(b <= a + 1e-9 for a, b in zip(widths, widths[1:]))

    def test_lead_in_features_are_wider_than_bore(self):
        for name in ("hexagonal", "l_shape", "triangular"):
            geo = make_geometry(name, clearance_c=0.25)
            assert geo.width_at(0.0) > geo.peg_width + 0.25


class TestValidation:
    def test_zero_clearance_rejected(self):
        with pytest.raises(ConfigError, match="clearance_c"):
            make_geometry("square", clearance_c=0.0)

    def test_overhang_rejected(self):
        with pytest.raises(ConfigError, match="overhang"):
            WallProfile([(0.0, 10.0), (5.0, 11.0), (15.0, 11.0)])

    def test_non_monotone_depth_rejected(self):
        with pytest.raises(ConfigError, match="depths"):
            WallProfile([(0.0, 10.0), (5.0, 10.0), (4.0, 10.0)])

    def test_bore_width_mismatch_rejected(self):
        with pytest.raises(ConfigError, match="bore width"):
            GeometrySpec(
                name="square",
                hole_depth=15.0,
                peg_width=20.0,
                peg_length=30.0,
                clearance_c=0.25,
                left_wall=WallProfile([(0.0, 10.0), (15.0, 10.0)]),
                right_wall=WallProfile([(0.0, 10.0), (15.0, 10.0)]),
            )

    def test_sim_config_names_violated_field(self):
        with pytest.raises(ConfigError, match="success_depth_frac"):
            default_config("square", 0.25, success_depth_frac=1.5)
        with pytest.raises(ConfigError, match="jam_window_J"):
            default_config("square", 0.25, jam_window_J=0)
        with pytest.raises(ConfigError, match="peg_init_region"):
            default_config("square", 0.25, peg_init_region=(50.0, 50.0))


class TestSerialization:
    def test_geometry_round_trip(self, tmp_path):
        geo = make_geometry("l_shape", clearance_c=0.05)
        p = tmp_path / "geo.json"
        geo.save(p)
        loaded = GeometrySpec.load(p)
        assert loaded.to_dict() == geo.to_dict()

    def test_config_round_trip(self, tmp_path):
        cfg = default_config("hexagonal", clearance_c=1.5, friction_mu=0.4)
        p = tmp_path / "cfg.json"
        cfg.save(p)
        loaded = SimConfig.load(p)
        assert loaded.to_dict() == cfg.to_dict()

    def test_schema_version_checked(self, tmp_path):
        geo = make_geometry("square", clearance_c=0.25)
        d = geo.to_dict()
        d["schema_version"] = 99
        with pytest.raises(ConfigError, match="schema_version"):
            GeometrySpec.from_dict(d)

    def test_files_are_human_readable_json(self, tmp_path):
        cfg = default_config("square", clearance_c=0.25)
        p = tmp_path / "cfg.json"
        cfg.save(p)
        raw = json.loads(p.read_text())
        assert raw["schema_version"] == 1
        assert raw["geometry"]["left_wall"]  # polyline array present
