import json
from dataclasses import replace

import numpy as np
import pytest

from softpress.errors import ConfigError
from softpress.estimator import NoiseConfig
from softpress.frameio import Manifest
from softpress.harness import (TEST_OBJECTS, ControlClock, EstimatorConfig, Scenario,
                               TrialReport, densify, grasp_workspace, parse_objects,
                               polyline_distance, record_contact_sequence, reports_to_csv,
                               reports_to_json, run_all, run_force_trial, run_force_trials,
                               run_grasp_suite, run_grasp_trial, run_square_path, square_corners,
                               success_counts, trial_seed)
from softpress.sim import DriftModel

SC = Scenario()
VALID_REASONS = {"TorqueLimit", "Dropped", "Timeout", "ContactLost"}


class TestPlumbing:
    def test_trial_seeds(self):
        assert trial_seed(0, "force", 1, 2) == trial_seed(0, "force", 1, 2)
        seeds = {trial_seed(0, "force", 1, i) for i in range(100)}
        assert len(seeds) == 100
        assert trial_seed(0, "force", 1) != trial_seed(0, "grasp", 1)

    def test_control_clock_spreads_steps(self):
        clock = ControlClock(100.0, 12.0)
        index, counts = 0, []
        for tick in range(12):
            n = clock.steps_until(tick, index)
            counts.append(n)
            index += n
        assert index == 100 and set(counts) <= {8, 9}

    def test_report_validation(self):
        with pytest.raises(ValueError):
            TrialReport("x", 0, 0, "Failure")
        with pytest.raises(ValueError):
            TrialReport("x", 0, 0, "Success", "Timeout")
        with pytest.raises(ValueError):
            TrialReport("x", 0, 0, "Maybe")

    def test_report_serialisation_is_sorted(self):
        a = TrialReport("b", 1, 5, "Success", duration=1.0)
        b = TrialReport("a", 0, 6, "Failure", "Timeout", duration=2.0)
        payload = json.loads(reports_to_json([a, b]))
        assert [t["scenario_id"] for t in payload["trials"]] == ["a", "b"]
        rows = reports_to_csv([a, b]).splitlines()
        assert rows[1].startswith("a,0,6,Failure,Timeout,2.0")
        assert reports_to_json([a, b]) == reports_to_json([b, a])

    def test_scenario_round_trip(self):
        sc = Scenario(seed=4, objects=TEST_OBJECTS[:2])
        again = Scenario.from_dict(json.loads(json.dumps(sc.to_dict())))
        assert again.to_dict() == sc.to_dict()

    def test_scenario_rejects_unknown_setting(self):
        with pytest.raises(ConfigError):
            Scenario.from_dict({"controllers": {"nope": 1}})
        with pytest.raises(ConfigError):
            EstimatorConfig("psychic")

    def test_parse_objects(self):
        assert parse_objects([{"name": "a", "dims": [1, 2, 3]}]) == (("a", (1.0, 2.0, 3.0)),)
        with pytest.raises(ConfigError):
            parse_objects([{"name": "a", "dims": [1, 2]}])

    def test_polyline_distance(self):
        corners = square_corners((0.0, 0.0), 1.0)
        d = polyline_distance([(0.5, 0.0), (0.5, 0.5), (2.0, 0.0), (0.5, -0.25)], corners)
        np.testing.assert_allclose(d, [0.0, 0.5, 1.0, 0.25])

    def test_densify_keeps_corners(self):
        pts = densify(square_corners((0.0, 0.0), 0.08), 0.01)
        assert len(pts) == 33
        for c in square_corners((0.0, 0.0), 0.08):
            assert any(np.allclose(c, p) for p in pts)


class TestForceTrials:
    def test_zero_target_never_touches(self):
        r = run_force_trial(SC, 0.0, EstimatorConfig(), seed=1)
        assert r.success and r.achieved_force == 0.0

    def test_oracle_bang_bang_bound(self):
        per_step = 2 * SC.gripper.tip_force(SC.force_target.step_size)
        bound = SC.force_target.deadband + per_step
        for r in run_force_trials(SC, levels=(5,), trials_per_level=5):
            assert r.success
            assert abs(r.achieved_force - 5.0) <= bound

    def test_start_height_randomised(self):
        rs = run_force_trials(SC, levels=(1,), trials_per_level=4)
        assert len({r.settle_time for r in rs}) > 1

    def test_default_count(self):
        rs = run_force_trials(SC, trials_per_level=1)
        assert [r.target_force for r in rs] == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]

    def test_noisy_biased_low(self):
        rs = run_force_trials(SC, levels=(2,), trials_per_level=10,
                              estimator=EstimatorConfig("noisy"))
        assert np.mean([r.achieved_force for r in rs]) < 2.0

    def test_terminates_within_timeout(self):
        sc = replace(SC, force_timeout=2.0)
        r = run_force_trial(sc, 4.0, EstimatorConfig(), seed=3)
        assert r.reason == "Timeout" and r.duration <= 2.0 + 1 / 12 + 1e-9


class TestSquarePath:
    def test_zero_drift_open_loop_is_near_exact(self):
        r = run_square_path(SC, "open", drift=DriftModel(0.0, 0.0))
        assert r.success
        # only the friction lag at the corners remains
        assert r.tracking_rms_m < 1e-3
        assert r.tracking_max_m <= SC.gripper.slip_limit(SC.path_contact_force)

    def test_closed_beats_open(self):
        seed = trial_seed(0, "path", 0)
        o = run_square_path(SC, "open", seed=seed)
        c = run_square_path(SC, "closed", seed=seed)
        assert c.tracking_rms_m < o.tracking_rms_m
        assert c.final_error_px <= SC.stop_radius

    def test_lost_contact_fails(self):
        r = run_square_path(replace(SC, path_contact_force=0.0), "closed")
        assert r.outcome == "Failure" and r.reason == "ContactLost"

    def test_bad_mode(self):
        with pytest.raises(ConfigError):
            run_square_path(SC, "sideways")


class TestGrasp:
    def test_washer_oracle(self):
        rs = run_grasp_suite(SC, objects=TEST_OBJECTS[:1], trials_per_object=10)
        assert sum(r.success for r in rs) >= 9

    def test_unreachable_centroid_times_out(self):
        r = run_grasp_trial(SC, "washer", (10.0, 10.0, 1.0), pose=(0.005, 0.005, 0.0), seed=2)
        assert r.reason == "Timeout"

    def test_overestimation_disturbs_contact(self):
        noisy = EstimatorConfig("noisy", NoiseConfig(gain_bias=2.0))
        rs = run_grasp_suite(SC, objects=TEST_OBJECTS[:2], trials_per_object=3,
                             estimator=noisy)
        failures = [r for r in rs if not r.success]
        assert failures
        assert {r.reason for r in failures} <= VALID_REASONS
        # failures happen while the gripper is trying to hold surface contact
        assert {r.phase for r in failures} <= {"ContactForce", "ServoToCentroid"}

    def test_workspace_keeps_tips_on_sensor(self):
        for yaw in np.linspace(0, np.pi, 7):
            x0, y0, x1, y1 = grasp_workspace(SC, yaw)
            assert x0 < x1 and y0 < y1

    def test_success_counts(self):
        rs = [TrialReport("grasp/a", 0, 0, "Success", object_name="a"),
              TrialReport("grasp/a", 1, 0, "Failure", "Dropped", object_name="a")]
        assert success_counts(rs) == {"a": (1, 2)}


class TestArtifacts:
    def test_record_contact_sequence(self, tmp_path):
        r = record_contact_sequence(SC, tmp_path, target=1.0)
        assert r.success
        gt = Manifest.load(tmp_path / "gt" / "manifest.json")
        est = Manifest.load(tmp_path / "est" / "manifest.json")
        assert len(gt) == len(est) > 0
        assert gt.timestamps == est.timestamps
        assert (tmp_path / "trace.csv").read_text().startswith("time,")

    def test_run_all_small_is_deterministic(self, tmp_path):
        a = run_all(trials=1, out_dir=tmp_path)
        b = run_all(trials=1)
        assert a == b
        meta = json.loads(a["reports.json"])["meta"]
        assert meta["estimators"]["noisy"]["noise"]["quantize"]["n_bins"] == 9
        assert sorted(p.name for p in tmp_path.iterdir()) == sorted(a)
