"""场景服务测试"""
import itertools
import math

import numpy as np
import pytest
from loguru import logger
from pydantic import ValidationError

from app.errors import ConfigurationError
from app.models import (
    OwcWavelength,
    Receiver,
    ReceiverCalibration,
    ReceiverKind,
    Reflectances,
    Scenario,
    SurfaceName,
    Vec3,
)
from app.services import scene_service
from app.services.scene_service import (
    apply_overrides,
    build_room,
    load_calibration,
    load_scenario,
    paper_default_scenario,
    receiver_detectors,
    resolve_targets,
    room_mesh,
    save_scenario,
)
from app.utils.geometry import branch_direction


class TestBranchDirection:
    def test_straight_down(self):
        assert branch_direction(0.0, 90.0) == pytest.approx((0.0, 0.0, -1.0), abs=1e-12)

    def test_horizontal_plus_y(self):
        assert branch_direction(90.0, 0.0) == pytest.approx((0.0, 1.0, 0.0), abs=1e-12)

    def test_symmetry(self):
        assert branch_direction(180.0, 45.0) == pytest.approx((-0.7071067811865476, 0.0, -0.7071067811865476), abs=1e-12)

    def test_norm_preserved_over_angle_grid(self):
        for az, el in itertools.product(np.linspace(-720, 720, 37), np.linspace(-180, 180, 25)):
            assert math.isclose(math.hypot(*branch_direction(az, el)), 1.0, abs_tol=1e-12)


class TestBuildRoom:
    def test_default_room_reflectances(self):
        elements = build_room((8.0, 8.0, 3.0), Reflectances(), 0.5)
        by_surface = {}
        for e in elements:
            by_surface.setdefault(e.surface, set()).add(e.reflectance)
        assert set(by_surface) == set(SurfaceName)
        assert by_surface[SurfaceName.CEILING] == {0.8}
        assert by_surface[SurfaceName.FLOOR] == {0.3}
        for wall in (SurfaceName.WEST, SurfaceName.EAST, SurfaceName.SOUTH, SurfaceName.NORTH):
            assert by_surface[wall] == {0.8}

    def test_ceiling_at_half_metre(self):
        ceiling = [e for e in build_room((8.0, 8.0, 3.0), Reflectances(), 0.5) if e.surface is SurfaceName.CEILING]
        assert len(ceiling) == 256
        assert all(e.area_m2 == pytest.approx(0.25) for e in ceiling)
        assert all(e.center.z == 3.0 for e in ceiling)

    def test_unit_cube(self):
        elements = build_room((1.0, 1.0, 1.0), Reflectances(), 1.0)
        assert len(elements) == 6
        assert math.fsum(e.area_m2 for e in elements) == pytest.approx(6.0, rel=1e-12)

    @pytest.mark.parametrize("resolution", [0.1, 0.15, 0.3, 0.5, 0.7, 1.3, 3.0, 10.0])
    def test_partition_is_exact_per_surface(self, resolution):
        dims = (8.0, 8.0, 3.0)
        mesh = room_mesh(dims, Reflectances(), resolution)
        expected = {
            SurfaceName.CEILING: 64.0, SurfaceName.FLOOR: 64.0,
            SurfaceName.WEST: 24.0, SurfaceName.EAST: 24.0,
            SurfaceName.SOUTH: 24.0, SurfaceName.NORTH: 24.0,
        }
        surfaces = np.array([s.value for s in mesh.surfaces])
        for surface, area in expected.items():
            total = math.fsum(mesh.areas[surfaces == surface.value].tolist())
            assert abs(total - area) / area <= 1e-6
        assert mesh.total_area == pytest.approx(224.0, rel=1e-6)

    def test_normals_point_inward(self):
        mesh = room_mesh((4.0, 5.0, 3.0), Reflectances(), 0.5)
        centre = np.array([2.0, 2.5, 1.5])
        inward = np.einsum("ij,ij->i", mesh.normals, centre - mesh.centers)
        assert np.all(inward > 0)
        assert np.allclose(np.linalg.norm(mesh.normals, axis=1), 1.0)

    def test_large_coupling_warns(self, monkeypatch):
        monkeypatch.setattr(scene_service, "LARGE_COUPLING_WARNING", 10)
        mesh = room_mesh((2.0, 2.0, 2.0), Reflectances(), 1.0)
        messages = []
        handler = logger.add(messages.append, level="WARNING")
        try:
            k, _ = mesh.coupling()
        finally:
            logger.remove(handler)
        assert k.shape == (24, 24)
        assert any("耦合矩阵" in str(m) for m in messages)

    @pytest.mark.parametrize("dims", [(0.0, 8.0, 3.0), (8.0, -1.0, 3.0), (8.0, 8.0, float("nan"))])
    def test_non_positive_dimension(self, dims):
        with pytest.raises(ConfigurationError):
            build_room(dims, Reflectances(), 0.5)

    @pytest.mark.parametrize("resolution", [0.0, -0.1])
    def test_non_positive_resolution(self, resolution):
        with pytest.raises(ConfigurationError):
            build_room((8.0, 8.0, 3.0), Reflectances(), resolution)


class TestPaperScenario:
    def test_adt2_elevations(self):
        scenario = paper_default_scenario()
        assert [b.elevation_deg for b in scenario.transmitters[1].branches] == [18.5, 45.0, 45.0, 18.5]

    def test_adt_positions_and_angles(self):
        scenario = paper_default_scenario()
        assert [tuple(t.position.to_array()) for t in scenario.transmitters] == [
            (4.0, 1.0, 3.0), (4.0, 3.0, 3.0), (4.0, 5.0, 3.0), (4.0, 7.0, 3.0)
        ]
        assert [b.azimuth_deg for b in scenario.transmitters[0].branches] == [167.0, 207.0, 231.0, 243.0]
        assert [b.elevation_deg for b in scenario.transmitters[3].branches] == [11.0, 16.0, 20.0, 16.0]

    def test_receiver_one_position(self):
        assert paper_default_scenario().receivers[0].position == Vec3(x=1.3, y=1.6, z=2.0)

    def test_sixteen_pairs(self):
        scenario = paper_default_scenario()
        assert len(scenario.transmitters) * len(scenario.receivers) == 16

    def test_branch_wavelengths_and_power(self):
        for tx in paper_default_scenario().transmitters:
            assert [b.wavelength for b in tx.branches] == list(OwcWavelength)
            assert [b.wavelength.nm for b in tx.branches] == [850, 880, 900, 950]
            assert all(b.power_w == 4e-3 for b in tx.branches)

    def test_lambertian_order_from_semi_angle(self):
        branch = paper_default_scenario().transmitters[0].branches[0]
        assert branch.lambertian_order == pytest.approx(-math.log(2) / math.log(math.cos(math.radians(5.0))))
        assert branch.lambertian_order == pytest.approx(181.8, abs=0.05)

    def test_construction_is_deterministic(self):
        assert paper_default_scenario().model_dump_json() == paper_default_scenario().model_dump_json()

    def test_matches_golden_file(self, data_dir):
        assert load_scenario(data_dir / "paper_scenario.json") == paper_default_scenario()


class TestScenarioFiles:
    def test_save_then_load(self, tmp_path):
        path = save_scenario(paper_default_scenario(), tmp_path / "nested" / "scenario.json")
        assert load_scenario(path) == paper_default_scenario()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_scenario(tmp_path / "absent.json")

    def test_invalid_document(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"schema_version": "scenario.v1", "transmitters": [], "receivers": [], "controls": {"max_reflection_order": 5}}')
        with pytest.raises(ConfigurationError):
            load_scenario(path)

    def test_calibration_file(self, data_dir):
        calibration = load_calibration(data_dir / "calibration.json")
        assert calibration.model_dump(exclude={"note"}) == ReceiverCalibration().model_dump(exclude={"note"})

    def test_missing_calibration_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_calibration(tmp_path / "absent.json")

    def test_calibration_override_reaches_every_receiver(self):
        calibration = ReceiverCalibration(bandwidth_hz=1e9)
        scenario = apply_overrides(paper_default_scenario(), calibration=calibration)
        assert all(rx.calibration == calibration for rx in scenario.receivers)

    def test_duplicate_wavelength_rejected(self):
        with pytest.raises(ValueError, match="波长必须互不相同"):
            Scenario.model_validate({
                "transmitters": [{
                    "name": "T", "position": {"x": 1, "y": 1, "z": 3},
                    "branches": [
                        {"azimuth_deg": 0, "elevation_deg": 90, "wavelength": "L1"},
                        {"azimuth_deg": 90, "elevation_deg": 45, "wavelength": "L1"},
                    ],
                }],
                "receivers": [{"name": "R", "position": {"x": 1, "y": 1, "z": 1}}],
            })

    def test_receivers_required(self):
        with pytest.raises(ValidationError, match="receivers"):
            Scenario.model_validate({"transmitters": [], "receivers": []})


class TestOverrides:
    def test_receiver_kind_switch_resets_fov(self):
        scenario = apply_overrides(paper_default_scenario(), receiver_kind=ReceiverKind.WFOV)
        assert all(r.kind is ReceiverKind.WFOV and r.effective_fov_deg == 90.0 for r in scenario.receivers)

    def test_controls_and_resolution(self):
        scenario = apply_overrides(
            paper_default_scenario(), max_reflection_order=0, time_bin_s=5e-10,
            first_order_resolution_m=0.2, interference=True,
        )
        assert scenario.controls.max_reflection_order == 0
        assert scenario.controls.time_bin_s == 5e-10
        assert scenario.controls.interference is True
        assert scenario.room.first_order_resolution_m == 0.2

    @pytest.mark.parametrize("kwargs", [
        {"max_reflection_order": 3},
        {"time_bin_s": 0.0},
        {"second_order_resolution_m": -0.5},
    ])
    def test_invalid_override(self, kwargs):
        with pytest.raises(ConfigurationError):
            apply_overrides(paper_default_scenario(), **kwargs)


class TestReceivers:
    def test_wfov_single_detector(self):
        scenario = apply_overrides(paper_default_scenario(), receiver_kind=ReceiverKind.WFOV)
        detectors = receiver_detectors(scenario.receivers[0], scenario.transmitters)
        assert len(detectors) == 1
        assert detectors[0].fov_deg == 90.0
        assert detectors[0].normal == Vec3(x=0.0, y=0.0, z=1.0)

    def test_adr_branch_aimed_at_each_adt(self):
        scenario = paper_default_scenario()
        receiver = scenario.receivers[1]
        detectors = receiver_detectors(receiver, scenario.transmitters)
        assert len(detectors) == 4
        for detector, tx in zip(detectors, scenario.transmitters):
            expected = tx.position.to_array() - receiver.position.to_array()
            expected /= np.linalg.norm(expected)
            assert np.allclose(detector.normal.to_array(), expected, atol=1e-12)
            assert detector.fov_deg == 5.0
            assert detector.area_m2 == receiver.calibration.area_m2

    def test_explicit_branch_normals(self):
        receiver = Receiver(
            name="R", position=Vec3(x=1, y=1, z=2), kind=ReceiverKind.ADR,
            branch_normals=[Vec3(x=0, y=0, z=2), Vec3(x=1, y=0, z=1)],
        )
        detectors = receiver_detectors(receiver, paper_default_scenario().transmitters)
        assert len(detectors) == 2
        assert detectors[0].normal == Vec3(x=0.0, y=0.0, z=1.0)
        assert math.isclose(np.linalg.norm(detectors[1].normal.to_array()), 1.0)

    def test_background_power(self):
        receiver = paper_default_scenario().receivers[0]
        expected = 1.0 * 2e-5 * math.sin(math.radians(5.0)) ** 2
        assert receiver.background_power_w == pytest.approx(expected, rel=1e-12)
        assert receiver.background_photocurrent_a == pytest.approx(0.4 * expected, rel=1e-12)


class TestTargets:
    def test_paper_targets_serve_distinct_receivers(self):
        targets = resolve_targets(paper_default_scenario())
        assert len(targets) == 16
        for t in range(4):
            assert sorted(targets[(t, b)] for b in range(4)) == [0, 1, 2, 3]

    def test_closest_angle_matching(self):
        targets = resolve_targets(paper_default_scenario())
        assert targets[(0, 0)] == 0
        assert targets[(1, 1)] == 1
        assert targets[(1, 0)] == 2
        assert targets[(2, 2)] == 2
        assert targets[(3, 3)] == 3
        assert [targets[(0, b)] for b in range(4)] == [0, 3, 1, 2]
        assert [targets[(3, b)] for b in range(4)] == [1, 2, 0, 3]

    def test_explicit_target_wins(self):
        data = paper_default_scenario().model_dump(mode="json")
        data["transmitters"][1]["branches"][0]["target_receiver"] = 1
        targets = resolve_targets(Scenario.model_validate(data))
        assert targets[(1, 0)] == 1
        assert targets[(1, 1)] != 1
