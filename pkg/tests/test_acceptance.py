"""End-to-end acceptance checks.

Each test prints a single ``[PASS]`` / ``[FAIL]`` line with the measured
values, then asserts. Run ``pytest tests/test_acceptance.py -v`` or execute
this file directly for just the summary lines.
"""

import math
import sys
import time

import numpy as np
import pytest

from softpress.geometry import (SensorSpec, estimate_homography, synthetic_camera,
                                warp_pressure)
from softpress.harness import (TEST_OBJECTS, EstimatorConfig, Scenario, run_all,
                               run_force_trials, run_grasp_suite, run_square_paths)
from softpress.metrics import contact_iou, mae, temporal_accuracy, volumetric_iou
from softpress.pressure import BinSchema, Frame, PressureImage, dequantize, quantize, total_force
from softpress.sim import (Command, DriftModel, GripperModel, GripperState, WorldState,
                           lateral_forces, render_pressure, step)

SPEC = SensorSpec()
THRESHOLD = 1000.0
_capsys_holder = {}


@pytest.fixture(autouse=True)
def _expose_capsys(capsys):
    _capsys_holder["c"] = capsys
    yield
    _capsys_holder.pop("c", None)


def verdict(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {detail}"
    cap = _capsys_holder.get("c")
    if cap is None:
        print(line)
    else:
        with cap.disabled():
            print("\n" + line)
    assert ok, line


# brute-force references: plain loops, no numpy reductions ---------------------

def bf_contact_iou(g, e):
    inter = union = 0
    for row_g, row_e in zip(g.tolist(), e.tolist()):
        for a, b in zip(row_g, row_e):
            ca, cb = a > THRESHOLD, b > THRESHOLD
            inter += ca and cb
            union += ca or cb
    return 1.0 if union == 0 else inter / union


def bf_volumetric_iou(g, e):
    lo = hi = 0.0
    for row_g, row_e in zip(g.tolist(), e.tolist()):
        for a, b in zip(row_g, row_e):
            lo += a if a < b else b
            hi += a if a > b else b
    return 1.0 if hi == 0.0 else lo / hi


def bf_mae(g, e):
    total, n = 0.0, 0
    for row_g, row_e in zip(g.tolist(), e.tolist()):
        for a, b in zip(row_g, row_e):
            total += abs(a - b)
            n += 1
    return total / n


def bf_temporal_accuracy(gs, es):
    def touching(img):
        return any(v > THRESHOLD for row in img.tolist() for v in row)
    return sum(touching(g) == touching(e) for g, e in zip(gs, es)) / len(gs)


def random_pair(rng):
    shape = tuple(rng.integers(1, 65, 2))
    kind = rng.integers(0, 10)
    if kind == 0:
        return np.zeros(shape), np.zeros(shape)
    density = rng.uniform(0.05, 1.0)
    g = rng.uniform(0, 8000, shape) * (rng.uniform(size=shape) < density)
    if kind == 1:
        e = g.copy()
    else:
        e = g * rng.uniform(0.5, 1.5, shape) + rng.uniform(0, 2000, shape) * (
            rng.uniform(size=shape) < 0.2)
        e *= rng.uniform(size=shape) < rng.uniform(0.5, 1.0)
    # exercise the strict threshold comparison
    g[rng.uniform(size=shape) < 0.02] = THRESHOLD
    return g, e


def close(a, b):
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=0.0)


def test_criterion_01_metrics_oracle():
    rng = np.random.default_rng(20260101)
    pairs = [random_pair(rng) for _ in range(1000)]
    t0 = time.perf_counter()
    lib = [(contact_iou(g, e), volumetric_iou(g, e), mae(g, e)) for g, e in pairs]
    lib_ta = temporal_accuracy([g for g, _ in pairs], [e for _, e in pairs])
    elapsed = time.perf_counter() - t0
    worst = 0
    for (g, e), (ci, vi, m) in zip(pairs, lib):
        ref = (bf_contact_iou(g, e), bf_volumetric_iou(g, e), bf_mae(g, e))
        worst += sum(not close(a, b) for a, b in zip((ci, vi, m), ref))
    ref_ta = bf_temporal_accuracy([g for g, _ in pairs], [e for _, e in pairs])
    ok = worst == 0 and close(lib_ta, ref_ta) and elapsed < 10.0
    verdict(1, ok, f"1000 pairs, {worst} mismatches, temporal {lib_ta:.3f} vs {ref_ta:.3f}, "
                   f"library time {elapsed:.2f} s")


def test_criterion_02_volumetric_hand_case():
    v = volumetric_iou([[2, 0], [0, 0]], [[1, 0], [0, 1]])
    verdict(2, v == 1 / 3, f"volumetric_iou = {v!r}")


def random_camera(rng):
    """Sensor-to-image map with random perspective, scale and rotation."""
    base = synthetic_camera(SPEC, (180, 300), margin=rng.uniform(0.0, 0.1),
                            keystone=rng.uniform(-0.2, 0.2)).h
    a = rng.uniform(-0.2, 0.2)
    rot = np.array([[math.cos(a), -math.sin(a), 0.0], [math.sin(a), math.cos(a), 0.0],
                    [0.0, 0.0, 1.0]])
    shift = np.array([[1.0, 0.0, rng.uniform(-20, 20)], [0.0, 1.0, rng.uniform(-20, 20)],
                      [rng.normal(0, 2e-4), rng.normal(0, 2e-4), 1.0]])
    return shift @ rot @ base


def project(h, pts):
    p = np.c_[pts, np.ones(len(pts))] @ h.T
    return p[:, :2] / p[:, 2:]


def test_criterion_03_homography_fidelity():
    rng = np.random.default_rng(7)
    worst_px = 0.0
    for _ in range(100):
        truth = random_camera(rng)
        src = np.c_[rng.uniform(0, SPEC.active_w, 12), rng.uniform(0, SPEC.active_h, 12)]
        h = estimate_homography(src, project(truth, src))
        probe = np.c_[rng.uniform(0, SPEC.active_w, 200), rng.uniform(0, SPEC.active_h, 200)]
        worst_px = max(worst_px, float(np.abs(h(probe) - project(truth, probe)).max()))

    rr, cc = np.mgrid[0:SPEC.rows, 0:SPEC.cols]
    worst_frac = 0.0
    for _ in range(10):
        data = np.zeros(SPEC.shape)
        for _ in range(3):
            # blobs fade out before the sensor edge, where the outer half taxel
            # has no neighbour to interpolate against and reads 0 by convention
            s = rng.uniform(6, 15)
            pad = 3 * s + 2
            r0, c0 = rng.uniform(pad, SPEC.rows - pad), rng.uniform(pad, SPEC.cols - pad)
            data += rng.uniform(2e3, 3e4) * np.exp(-((rr - r0) ** 2 + (cc - c0) ** 2) / (2 * s * s))
        cam = synthetic_camera(SPEC, (180, 300), keystone=rng.uniform(0.0, 0.15))
        p = PressureImage(data, Frame.SENSOR, SPEC.pitch_x, SPEC.pitch_y)
        back = warp_pressure(warp_pressure(p, cam, (180, 300)), cam.inverse(), SPEC.shape,
                             (SPEC.pitch_x, SPEC.pitch_y))
        worst_frac = max(worst_frac, float(np.abs(back.data - data).max() / data.max()))
    ok = worst_px < 1e-6 and worst_frac <= 0.02
    verdict(3, ok, f"max reprojection {worst_px:.2e} px over 100 maps, "
                   f"warp round trip {100 * worst_frac:.2f}% of peak")


def random_contact_world(rng):
    model = GripperModel()
    g = GripperState(base_xy=(rng.uniform(0.06, 0.17), rng.uniform(0.03, 0.10)),
                     lift_z=-rng.uniform(2e-4, 4e-3), aperture=rng.uniform(0.3, 1.0),
                     tip_height_offset=(0.0, float(rng.choice([0.0, rng.uniform(0, 3e-3)]))))
    return WorldState(gripper=g, model=model, drift=DriftModel(0.0, 0.0))


def test_criterion_04_force_integration():
    uniform = PressureImage(np.full(SPEC.shape, 1000.0), Frame.SENSOR, SPEC.pitch_x, SPEC.pitch_y)
    f_uniform = total_force(uniform)
    rng = np.random.default_rng(11)
    cam = synthetic_camera(SPEC)
    back = cam.inverse()
    worst = 0.0
    for _ in range(100):
        p = render_pressure(step(random_contact_world(rng), Command(), 0.01), SPEC)
        f_sensor = total_force(p)
        f_image = total_force(warp_pressure(p, cam, (180, 300)), back)
        worst = max(worst, abs(f_image - f_sensor) / f_sensor)
    ok = abs(f_uniform - 29.90) <= 1e-9 and worst <= 0.03
    verdict(4, ok, f"uniform field {f_uniform:.12f} N, warped force worst error "
                   f"{100 * worst:.2f}% over 100 scenes")


def test_criterion_05_lateral_deflection_datum():
    model = GripperModel()
    direct = model.lateral_deflection(5.0)
    # and through the stepper: a tip held by friction under a 5 N lateral load
    w = WorldState(gripper=GripperState(base_xy=(0.115, 0.065),
                                        lift_z=-model.depth_for_force(9.0),
                                        tip_height_offset=(0.0, 0.05)),
                   model=model, drift=DriftModel(0.0, 0.0))
    for _ in range(41):
        w = step(w, Command(d_base_xy=(0.001, 0.0)), 0.01)
    loaded = math.hypot(*w.gripper.tip_deflection[0])
    ok = (abs(direct - 0.040) <= 1e-6 and abs(lateral_forces(w)[0] - 5.0) <= 1e-9
          and abs(loaded - 0.040) <= 1e-6)
    verdict(5, ok, f"deflection at 5 N: model {direct:.9f} m, simulated {loaded:.9f} m")


def sign_test_p(below, n):
    """One-sided binomial p-value for at least ``below`` of ``n`` under p = 1/2."""
    return sum(math.comb(n, k) for k in range(below, n + 1)) / 2**n


def test_criterion_06_force_servo():
    sc = Scenario()
    assert sc.sensor.rate == 100.0 and EstimatorConfig().rate == 12
    oracle = run_force_trials(sc, levels=(1, 2, 3, 4, 5), trials_per_level=10)
    bad = [r for r in oracle
           if not (r.success and abs(r.achieved_force - r.target_force) <= 0.5
                   and r.settle_time <= 10.0)]
    worst_err = max(abs(r.achieved_force - r.target_force) for r in oracle)
    worst_t = max(r.settle_time or math.inf for r in oracle)
    parts, noisy_ok = [], True
    for level in (1, 2):
        rs = run_force_trials(sc, levels=(level,), trials_per_level=10,
                              estimator=EstimatorConfig("noisy"))
        forces = [r.achieved_force for r in rs]
        below = sum(f < level for f in forces)
        p = sign_test_p(below, len(forces))
        noisy_ok &= np.mean(forces) < level and p <= 0.05
        parts.append(f"{level} N mean {np.mean(forces):.3f} ({below}/10 below, p={p:.3f})")
    ok = not bad and noisy_ok
    verdict(6, ok, f"oracle {50 - len(bad)}/50 within 0.5 N (worst {worst_err:.3f} N, "
                   f"slowest {worst_t:.2f} s); noisy " + ", ".join(parts))


def test_criterion_07_square_path():
    sc = Scenario()
    reports = run_square_paths(sc, seeds=10)
    open_rms = [r.tracking_rms_m for r in reports if r.scenario_id == "path/open"]
    closed = [r for r in reports if r.scenario_id == "path/closed"]
    closed_rms = [r.tracking_rms_m for r in closed]
    ratio = float(np.mean(closed_rms) / np.mean(open_rms))
    finals = [r.final_error_px for r in closed]
    ok = (all(r.success for r in closed) and ratio < 0.5
          and all(f is not None and f <= sc.stop_radius for f in finals))
    verdict(7, ok, f"closed/open RMS {1e3 * np.mean(closed_rms):.2f}/"
                   f"{1e3 * np.mean(open_rms):.2f} mm = {ratio:.3f}, "
                   f"final corner error max {max(f or math.inf for f in finals):.2f} px")


def test_criterion_08_grasp_suite():
    reports = run_grasp_suite(Scenario(), TEST_OBJECTS, trials_per_object=10)
    wins = sum(r.success for r in reports)
    reasons = {r.reason for r in reports if not r.success}
    ok = (len(reports) == 110 and wins / len(reports) >= 0.9
          and reasons <= {"TorqueLimit", "Dropped", "Timeout", "ContactLost"})
    verdict(8, ok, f"{wins}/{len(reports)} grasps ({100 * wins / len(reports):.1f}%), "
                   f"failure reasons {sorted(reasons) or 'none'}")


def test_criterion_09_determinism(tmp_path):
    a = run_all(master_seed=0, out_dir=tmp_path / "a")
    b = run_all(master_seed=0, out_dir=tmp_path / "b")
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in a)
    ok = a == b and same
    verdict(9, ok, f"{len(a)} report files byte-identical across two full runs: {same}")


def test_criterion_10_quantizer():
    schema = BinSchema()
    rng = np.random.default_rng(3)
    values = rng.uniform(0, 2 * schema.p_max, 10_000)
    values[:10] = [0.0, schema.p_min, schema.p_max, 2 * schema.p_max, *schema.edges[1:7]]
    bins = quantize(values, schema)
    once = dequantize(bins[None, :], schema).data
    twice = dequantize(quantize(once, schema), schema).data
    idem = np.array_equal(once, twice) and np.array_equal(quantize(once, schema), bins[None, :])
    zero = int(quantize(np.zeros(3), schema).max()) == 0
    ok = idem and zero
    verdict(10, ok, f"idempotent on 10000 values: {idem}, 0 Pa to zero bin: {zero}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
