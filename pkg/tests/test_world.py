import json

import numpy as np
import pytest

from octofrontier.sim.world import (
    ScenarioError, ScenarioWorld, SensorModel, bundled_scenarios, load_scenario, scenario_from_dict, simulate_scan,
)

from conftest import small_room


def world(obstacles=(), solid=False, bounds=((-20, -20, -5), (20, 20, 5))):
    return ScenarioWorld(np.array(bounds[0], float), np.array(bounds[1], float),
                         np.array(obstacles, float).reshape(-1, 2, 3), np.zeros(3), 0.0, solid)


class TestSensor:
    def test_beam_count(self):
        s = SensorModel(vertical_beams=16, azimuth_step=1.0)
        assert s.directions().shape == (16 * 360, 3)
        np.testing.assert_allclose(np.linalg.norm(s.directions(), axis=1), 1.0)

    def test_single_beam_is_horizontal(self):
        d = SensorModel(vertical_beams=1, azimuth_step=90).directions()
        np.testing.assert_allclose(d[:, 2], 0.0, atol=1e-15)
        np.testing.assert_allclose(d[0], [1, 0, 0], atol=1e-15)

    @pytest.mark.parametrize("kw", [dict(max_range=0), dict(vertical_beams=0), dict(azimuth_step=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SensorModel(**kw)


class TestScan:
    def test_empty_open_world(self):
        scan = simulate_scan(world(), [0, 0, 0], SensorModel(max_range=10))
        assert len(scan.points) == 0

    def test_solid_bounds_return(self):
        scan = simulate_scan(world(solid=True), [0, 0, 0], SensorModel(max_range=100, vertical_beams=1,
                                                                       azimuth_step=90))
        np.testing.assert_allclose(np.abs(scan.points).max(axis=1), 20.0)

    def test_wall_five_meters_ahead(self):
        w = world([[[5, -10, -5], [6, 10, 5]]])
        scan = simulate_scan(w, [0, 0, 0], SensorModel(max_range=20, vertical_beams=1, azimuth_step=90))
        assert len(scan.points) == 1
        np.testing.assert_allclose(scan.points[0], [5.0, 0.0, 0.0], atol=1e-12)

    def test_out_of_range(self):
        w = world([[[5, -10, -5], [6, 10, 5]]])
        scan = simulate_scan(w, [0, 0, 0], SensorModel(max_range=4.9, vertical_beams=1, azimuth_step=90))
        assert len(scan.points) == 0

    def test_occlusion(self):
        w = world([[[8, -1, -1], [9, 1, 1]], [[5, -1, -1], [6, 1, 1]]])
        scan = simulate_scan(w, [0, 0, 0], SensorModel(max_range=20, vertical_beams=1, azimuth_step=90))
        np.testing.assert_allclose(scan.points, [[5.0, 0.0, 0.0]], atol=1e-12)

    def test_points_within_range_and_deterministic(self, rng):
        boxes = []
        for _ in range(10):
            lo = rng.uniform(-15, 12, 3)
            lo[2] = -5
            if np.all(np.abs(lo[:2]) < 3):
                continue
            boxes.append([lo, lo + rng.uniform(1, 3, 3)])
        w = world(boxes, solid=True)
        s = SensorModel(max_range=12)
        a = simulate_scan(w, [0, 0, 0], s, 0.3)
        b = simulate_scan(w, [0, 0, 0], s, 0.3)
        np.testing.assert_array_equal(a.points, b.points)
        assert np.all(np.linalg.norm(a.points, axis=1) <= 12 + 1e-9)


class TestWorldGeometry:
    def test_collides(self):
        w = world([[[0, 0, 0], [1, 1, 1]]], bounds=((-5, -5, -5), (5, 5, 5)))
        assert w.collides([[0.5, 0.5, 0.5], [2, 2, 2], [1.0, 0.5, 0.5], [6, 0, 0]]).tolist() == [
            True, False, False, True]

    def test_start_validation(self):
        with pytest.raises(ScenarioError):
            ScenarioWorld(np.zeros(3), np.ones(3), np.array([[[0, 0, 0], [1, 1, 1]]], float), np.full(3, 0.5))
        with pytest.raises(ScenarioError):
            ScenarioWorld(np.zeros(3), np.ones(3), np.empty((0, 2, 3)), np.full(3, 2.0))

    def test_reachable_flood_fill(self):
        # a sealed 2 m room inside a 6 m world
        walls = [[[1, 1, 0], [5, 1.5, 3]], [[1, 4.5, 0], [5, 5, 3]], [[1, 1, 0], [1.5, 5, 3]], [[4.5, 1, 0], [5, 5, 3]]]
        w = ScenarioWorld(np.zeros(3), np.array([6, 6, 3.0]), np.array(walls, float), np.array([3, 3, 1.5]))
        reach = w.reachable_voxels((12, 12, 6), 0.5)
        assert reach.sum() == 6 * 6 * 6


class TestScenarioFiles:
    def test_round_trip_dict(self):
        sc = scenario_from_dict(small_room(), "room")
        assert sc.planner.r_exp == 1.0
        assert sc.gain_cube_side == 4.0
        assert sc.seed == 3

    def test_gain_cube_defaults_to_range(self):
        data = small_room()
        del data["planner"]["gain_cube_side"]
        assert scenario_from_dict(data).gain_cube_side == 8

    @pytest.mark.parametrize("mutate", [
        lambda d: d.pop("bounds"),
        lambda d: d["planner"].update(d_exp=0),
        lambda d: d["planner"].update(bandwidth=-1),
        lambda d: d["sensor"].update(colour="red"),
        lambda d: d.update(start=[100, 0, 0]),
        lambda d: d.update(obstacles=[[[0, 0, 0], [2, 2, 2]]], start=[1, 1, 1]),
        lambda d: d["planner"].update(r_max=1e-6),
    ])
    def test_invalid(self, mutate):
        data = small_room()
        mutate(data)
        with pytest.raises(ScenarioError):
            scenario_from_dict(data)

    def test_overrides(self):
        sc = scenario_from_dict(small_room()).with_overrides(seed=9, lam=0.5, d_exp=14, bandwidth=None)
        assert (sc.seed, sc.planner.lam, sc.planner.d_exp, sc.planner.bandwidth) == (9, 0.5, 14, 2.0)
        with pytest.raises(ScenarioError):
            sc.with_overrides(d_exp=20)

    def test_bundled(self):
        assert {"house.json", "house_small.json", "large.json"} <= set(bundled_scenarios())
        house = load_scenario("house.json")
        assert house.planner.r_max == 0.25 and house.planner.r_exp == 1.0
        np.testing.assert_allclose(house.world.bounds_max - house.world.bounds_min, [30, 40, 5])
        large = load_scenario("large.json")
        assert large.planner.r_max == 0.5 and large.planner.r_exp == 2.0
        np.testing.assert_allclose(large.world.bounds_max - large.world.bounds_min, [130, 160, 5])

    def test_load_errors(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_scenario(tmp_path / "nope.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ScenarioError):
            load_scenario(bad)
        ok = tmp_path / "ok.json"
        ok.write_text(json.dumps(small_room()))
        assert load_scenario(ok).name == "ok"
