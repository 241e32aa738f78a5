"""Scenario runner for the force, square-path and grasp experiments.

Every trial is a deterministic function of its configuration and seed. The
simulator advances at the sensor rate while estimators and controllers run
on a slower control clock; commands issued at a control tick are spread
evenly over the simulation steps up to the next tick.
"""

from __future__ import annotations

import csv
import io
import json
import math
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .control import (FailureReason, ForceTarget, GraspConfig, GraspInputs, GraspPhase,
                      GraspState, IbvsConfig, MaximaMode, force_command, grasp_step,
                      ibvs_command, ibvs_error)
from .errors import ConfigError, ContactLost, NoContact, TorqueLimit
from .estimator import DEFAULT_RATE, NoiseConfig, NoisyEstimator, OracleEstimator
from .frameio import write_sequence
from .geometry import Homography, SensorSpec, synthetic_camera
from .pressure import Frame, center_of_pressure, total_force
from .sim import (Command, DriftModel, GripperModel, GripperState, SceneObject, TraceLog,
                  WorldState, attempt_close, render_pressure, step, tip_positions)

REPORT_SCHEMA = "softpress.trials/1"

TEST_OBJECTS = (
    ("washer", (10.0, 10.0, 1.0)),
    ("small_green_pill", (10.0, 6.0, 6.0)),
    ("large_pill", (21.0, 8.0, 8.0)),
    ("microsd_card", (15.0, 11.0, 1.0)),
    ("cable_segment", (82.0, 4.0, 4.0)),
    ("penny", (19.0, 19.0, 1.5)),
    ("bottle_cap", (30.0, 30.0, 13.0)),
    ("aa_battery", (50.0, 14.0, 14.0)),
    ("binder_clip", (25.0, 24.0, 19.0)),
    ("screw", (32.0, 9.0, 9.0)),
    ("tape_roll", (36.0, 36.0, 13.0)),
)


def trial_seed(master: int, experiment: str, *index: int) -> int:
    """Independent 32-bit seed for one trial of an experiment."""
    seq = np.random.SeedSequence([int(master) & 0xFFFFFFFF, zlib.crc32(experiment.encode()),
                                  *[int(i) for i in index]])
    return int(seq.generate_state(1)[0])


@dataclass(frozen=True)
class EstimatorConfig:
    kind: str = "oracle"
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    rate: float = DEFAULT_RATE

    def __post_init__(self):
        if self.kind not in ("oracle", "noisy"):
            raise ConfigError(f"unknown estimator kind {self.kind!r}")

    def build(self, scenario: "Scenario", seed: int):
        if self.kind == "oracle":
            return OracleEstimator(scenario.sensor, scenario.camera, scenario.image_shape,
                                   self.rate)
        return NoisyEstimator(scenario.sensor, scenario.camera, scenario.image_shape,
                              replace(self.noise, seed=seed), self.rate)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "rate": self.rate}
        if self.kind == "noisy":
            d["noise"] = self.noise.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorConfig":
        noise = NoiseConfig.from_dict(d["noise"]) if "noise" in d else NoiseConfig()
        return cls(d.get("kind", "oracle"), noise, float(d.get("rate", DEFAULT_RATE)))


@dataclass(frozen=True)
class Scenario:
    sensor: SensorSpec = field(default_factory=SensorSpec)
    gripper: GripperModel = field(default_factory=GripperModel)
    drift: DriftModel = field(default_factory=DriftModel)
    image_shape: tuple = (180, 300)
    camera: Homography | None = None
    seed: int = 0
    force_target: ForceTarget = field(default_factory=lambda: ForceTarget(2.0))
    settle_ticks: int = 3
    force_timeout: float = 15.0
    path_side: float = 0.08
    path_speed: float = 0.01           # m/s, open-loop traverse speed
    path_spacing: float = 0.01         # m between closed-loop waypoints
    path_contact_force: float = 1.5    # N on the single contacting tip
    path_timeout: float = 120.0
    ibvs_gain: float = 3.0
    stop_radius: float = 3.0
    min_separation: float = 15.0
    grasp_force: float = 2.0
    grasp_timeout: float = 60.0
    lift_height: float = 0.05
    hold_time: float = 5.0
    objects: tuple = ()

    def __post_init__(self):
        if self.camera is None:
            object.__setattr__(self, "camera", synthetic_camera(self.sensor, self.image_shape))
        self.camera.expect(Frame.SENSOR, Frame.IMAGE)
        object.__setattr__(self, "image_shape", tuple(int(v) for v in self.image_shape))

    @property
    def dt(self) -> float:
        return 1.0 / self.sensor.rate

    @property
    def image_to_sensor(self) -> Homography:
        return self.camera.inverse()

    def jacobian_at(self, point) -> np.ndarray:
        return self.camera.jacobian(point)

    def to_dict(self) -> dict:
        return {
            "sensor": self.sensor.to_dict(),
            "gripper": asdict(self.gripper),
            "drift": asdict(self.drift),
            "image_shape": list(self.image_shape),
            "camera": self.camera.to_dict("sensor_to_image"),
            "seed": self.seed,
            "controllers": {
                "force": asdict(self.force_target), "settle_ticks": self.settle_ticks,
                "force_timeout": self.force_timeout, "path_side": self.path_side,
                "path_speed": self.path_speed, "path_spacing": self.path_spacing,
                "path_contact_force": self.path_contact_force,
                "path_timeout": self.path_timeout, "ibvs_gain": self.ibvs_gain,
                "stop_radius": self.stop_radius, "min_separation": self.min_separation,
                "grasp_force": self.grasp_force, "grasp_timeout": self.grasp_timeout,
                "lift_height": self.lift_height, "hold_time": self.hold_time,
            },
            "objects": [{"name": n, "dims": list(d)} for n, d in self.objects],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        kw = {}
        if "sensor" in d:
            kw["sensor"] = SensorSpec(**d["sensor"])
        if "gripper" in d:
            kw["gripper"] = GripperModel(**d["gripper"])
        if "drift" in d:
            kw["drift"] = DriftModel(**d["drift"])
        if "image_shape" in d:
            kw["image_shape"] = tuple(d["image_shape"])
        if "camera" in d:
            kw["camera"] = Homography.from_dict(d["camera"])
        if "seed" in d:
            kw["seed"] = int(d["seed"])
        ctl = dict(d.get("controllers", {}))
        if "force" in ctl:
            kw["force_target"] = ForceTarget(**ctl.pop("force"))
        known = {f for f in cls.__dataclass_fields__}
        for key, value in ctl.items():
            if key not in known:
                raise ConfigError(f"unknown controller setting {key!r}")
            kw[key] = value
        if "objects" in d:
            kw["objects"] = parse_objects(d["objects"])
        return cls(**kw)


def parse_objects(entries) -> tuple:
    out = []
    for e in entries:
        dims = tuple(float(v) for v in e["dims"])
        if len(dims) != 3 or min(dims) <= 0:
            raise ConfigError(f"object {e.get('name')!r} needs three positive dims in mm")
        out.append((str(e["name"]), dims))
    return tuple(out)


def load_scenario(path) -> Scenario:
    return Scenario.from_dict(json.loads(Path(path).read_text()))


@dataclass
class TrialReport:
    scenario_id: str
    trial: int
    seed: int
    outcome: str
    reason: str | None = None
    duration: float = 0.0
    target_force: float | None = None
    achieved_force: float | None = None
    estimated_force: float | None = None
    settle_time: float | None = None
    tracking_rms_m: float | None = None
    tracking_rms_px: float | None = None
    tracking_max_m: float | None = None
    final_error_px: float | None = None
    object_name: str | None = None
    phase: str | None = None
    artifacts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.outcome not in ("Success", "Failure"):
            raise ValueError(f"outcome must be Success or Failure, got {self.outcome!r}")
        if (self.outcome == "Failure") != (self.reason is not None):
            raise ValueError("a failure needs a reason and a success must not have one")

    @property
    def success(self) -> bool:
        return self.outcome == "Success"

    def to_dict(self) -> dict:
        return asdict(self)


REPORT_FIELDS = [f for f in TrialReport.__dataclass_fields__ if f != "artifacts"]


def reports_to_json(reports, meta=None) -> str:
    ordered = sorted(reports, key=lambda r: (r.scenario_id, r.trial))
    payload = {"schema": REPORT_SCHEMA, "meta": meta or {},
               "trials": [r.to_dict() for r in ordered]}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_FIELDS)
    for r in sorted(reports, key=lambda r: (r.scenario_id, r.trial)):
        d = r.to_dict()
        writer.writerow(["" if d[k] is None else (repr(d[k]) if isinstance(d[k], float) else d[k])
                         for k in REPORT_FIELDS])
    return buf.getvalue()


class ControlClock:
    """Maps control ticks onto whole simulation steps."""

    def __init__(self, sim_rate: float, control_rate: float):
        self.ratio = sim_rate / control_rate

    def steps_until(self, tick: int, step_index: int) -> int:
        end = math.ceil((tick + 1) * self.ratio - 1e-9)
        return max(end - step_index, 1)


def _advance(world, command, n_sub, dt, on_step=None):
    """Run ``n_sub`` simulation steps sharing ``command``; returns (world, torque_ok)."""
    part = command.scaled(1.0 / n_sub)
    for _ in range(n_sub):
        try:
            world = step(world, part, dt)
        except TorqueLimit:
            return world, False
        if on_step is not None:
            on_step(world)
    return world, True


def settled_force(scenario: Scenario, world: WorldState) -> float:
    """Ground-truth force as measured by the sensor array."""
    return total_force(render_pressure(world, scenario.sensor))


# force regulation ---------------------------------------------------------

def run_force_trial(scenario: Scenario, target: float, estimator: EstimatorConfig, seed: int,
                    trial: int = 0, scenario_id: str | None = None, trace: TraceLog | None = None,
                    on_tick=None) -> TrialReport:
    """Lower onto the plane from 3-5 cm and regulate force until settled.

    ``on_tick(world, estimate)`` is called at every control tick.
    """
    rng = np.random.default_rng(seed)
    spec = scenario.sensor
    start_height = rng.uniform(0.03, 0.05)
    centre = (spec.active_w / 2 + rng.uniform(-0.02, 0.02),
              spec.active_h / 2 + rng.uniform(-0.01, 0.01))
    world = WorldState(gripper=GripperState(base_xy=centre, lift_z=start_height),
                       model=scenario.gripper, drift=replace(scenario.drift, seed=seed))
    est = estimator.build(scenario, seed)
    area = scenario.image_to_sensor.pixel_area_map(scenario.image_shape)
    ctl = replace(scenario.force_target, target=float(target))
    clock = ControlClock(spec.rate, est.rate)
    sid = scenario_id or f"force/{target:g}N"
    in_band = 0
    torque_ok = True
    recent = []
    tick = 0
    while True:
        t = world.time
        if not torque_ok:
            return TrialReport(sid, trial, seed, "Failure", FailureReason.TORQUE_LIMIT.value, t,
                               target_force=float(target),
                               achieved_force=settled_force(scenario, world))
        frame = est(world)
        if on_tick is not None:
            on_tick(world, frame)
        f_hat = total_force(frame.pressure, area)
        dz = force_command(frame, area, ctl)
        in_band = in_band + 1 if dz == 0.0 else 0
        if in_band >= scenario.settle_ticks:
            return TrialReport(sid, trial, seed, "Success", None, t, target_force=float(target),
                               achieved_force=settled_force(scenario, world),
                               estimated_force=f_hat, settle_time=t)
        recent.append(settled_force(scenario, world))
        if t >= scenario.force_timeout:
            # a limit cycle never settles; report its mean over the last second
            window = recent[-max(1, round(est.rate)):]
            return TrialReport(sid, trial, seed, "Failure", FailureReason.TIMEOUT.value, t,
                               target_force=float(target),
                               achieved_force=float(np.mean(window)), estimated_force=f_hat)
        cmd = Command(d_lift_z=dz)
        world, torque_ok = _advance(
            world, cmd, clock.steps_until(tick, world.step_index), scenario.dt,
            None if trace is None else (lambda w: trace.record(w, cmd)))
        tick += 1


def run_force_trials(scenario: Scenario, levels=(0, 1, 2, 3, 4, 5), trials_per_level: int = 10,
                     estimator: EstimatorConfig | None = None, master_seed: int | None = None,
                     tag: str = "force") -> list[TrialReport]:
    estimator = estimator or EstimatorConfig()
    master = scenario.seed if master_seed is None else master_seed
    reports = []
    for level in levels:
        for i in range(trials_per_level):
            seed = trial_seed(master, tag, int(round(level * 1000)), i)
            reports.append(run_force_trial(scenario, level, estimator, seed, i,
                                           f"{tag}/{level:g}N"))
    return reports


# square path --------------------------------------------------------------

def square_corners(origin, side):
    x, y = origin
    return [(x, y), (x + side, y), (x + side, y + side), (x, y + side), (x, y)]


def densify(corners, spacing):
    """Waypoints every ``spacing`` meters along the polyline, corners included."""
    pts = [tuple(corners[0])]
    for a, b in zip(corners[:-1], corners[1:]):
        length = math.dist(a, b)
        n = max(1, math.ceil(length / spacing - 1e-9))
        for k in range(1, n + 1):
            f = k / n
            pts.append((a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])))
    return pts


def polyline_distance(points, corners) -> np.ndarray:
    """Distance from each point to the closest location on the polyline."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    c = np.asarray(corners, dtype=float)
    best = np.full(len(p), np.inf)
    for a, b in zip(c[:-1], c[1:]):
        ab = b - a
        denom = float(ab @ ab)
        f = np.zeros(len(p)) if denom == 0 else np.clip((p - a) @ ab / denom, 0.0, 1.0)
        proj = a + f[:, None] * ab
        best = np.minimum(best, np.linalg.norm(p - proj, axis=1))
    return best


def path_start(scenario: Scenario) -> tuple:
    """First corner of the reference square, centred on the sensor."""
    spec = scenario.sensor
    return (0.5 * (spec.active_w - scenario.path_side), 0.5 * (spec.active_h - scenario.path_side))


def _path_world(scenario: Scenario, seed: int, drift: DriftModel) -> tuple[WorldState, tuple]:
    model = scenario.gripper
    depth = model.depth_for_force(scenario.path_contact_force)
    start = path_start(scenario)
    half = model.finger_separation_open / 2
    # tip 0 carries the load; tip 1 is held clear of the surface
    gripper = GripperState(base_xy=(start[0] + half, start[1]), lift_z=-depth,
                           tip_height_offset=(0.0, 0.03))
    world = WorldState(gripper=gripper, model=model, drift=replace(drift, seed=seed))
    world = step(world, Command(), scenario.dt)
    return world, start


def run_square_path(scenario: Scenario, mode: str = "closed", estimator: EstimatorConfig | None = None,
                    seed: int = 0, trial: int = 0, drift: DriftModel | None = None,
                    jacobian=None, path_log: list | None = None) -> TrialReport:
    """Trace a square with one fingertip in contact, open- or closed-loop."""
    if mode not in ("open", "closed"):
        raise ConfigError(f"path mode must be 'open' or 'closed', got {mode!r}")
    estimator = estimator or EstimatorConfig()
    drift = scenario.drift if drift is None else drift
    world, start = _path_world(scenario, seed, drift)
    spec, dt = scenario.sensor, scenario.dt
    corners = square_corners(start, scenario.path_side)
    cop = []

    def sample(w):
        p = render_pressure(w, spec)
        try:
            cop.append((w.time, *center_of_pressure(p)))
        except NoContact:
            pass

    sample(world)
    sid = f"path/{mode}"
    reason = None
    final_error = None
    t0 = world.time
    if mode == "open":
        step_len = scenario.path_speed * dt
        for a, b in zip(corners[:-1], corners[1:]):
            n = max(1, round(math.dist(a, b) / step_len))
            cmd = Command(d_base_xy=(b[0] - a[0], b[1] - a[1]))
            world, ok = _advance(world, cmd, n, dt, sample)
            if not ok:
                reason = FailureReason.TORQUE_LIMIT.value
                break
    else:
        est = estimator.build(scenario, seed)
        clock = ControlClock(spec.rate, est.rate)
        waypoints_px = scenario.camera(np.array(densify(corners, scenario.path_spacing)))
        J = scenario.jacobian_at(start) if jacobian is None else np.asarray(jacobian, float)
        cfg = IbvsConfig(gain=scenario.ibvs_gain, jacobian=J, stop_radius=scenario.stop_radius,
                         min_separation=scenario.min_separation)
        period = 1.0 / est.rate
        k, tick = 0, 0
        while True:
            if world.time - t0 >= scenario.path_timeout:
                reason = FailureReason.TIMEOUT.value
                break
            frame = est(world)
            try:
                while True:
                    err = ibvs_error(frame, replace(cfg, target=tuple(waypoints_px[k])),
                                     MaximaMode.SINGLE)
                    if math.hypot(*err) > cfg.stop_radius or k == len(waypoints_px) - 1:
                        break
                    k += 1
            except ContactLost:
                reason = FailureReason.CONTACT_LOST.value
                break
            if k == len(waypoints_px) - 1 and math.hypot(*err) <= cfg.stop_radius:
                final_error = float(math.hypot(*err))
                break
            qdot = ibvs_command(err, cfg)
            cmd = Command(d_base_xy=(float(qdot[0]) * period, float(qdot[1]) * period))
            world, ok = _advance(world, cmd, clock.steps_until(tick, world.step_index), dt,
                                 sample)
            if not ok:
                reason = FailureReason.TORQUE_LIMIT.value
                break
            tick += 1

    if path_log is not None:
        path_log.extend(cop)
    stats = {}
    if cop:
        # tracking quality is only defined over ticks with a contact patch
        pts = np.array([(x, y) for _, x, y in cop])
        dev_m = polyline_distance(pts, corners)
        dev_px = polyline_distance(scenario.camera(pts), scenario.camera(np.array(corners)))
        stats = dict(tracking_rms_m=float(np.sqrt(np.mean(dev_m**2))),
                     tracking_rms_px=float(np.sqrt(np.mean(dev_px**2))),
                     tracking_max_m=float(dev_m.max()))
    elif reason is None:
        reason = FailureReason.CONTACT_LOST.value
    return TrialReport(sid, trial, seed, "Failure" if reason else "Success", reason,
                       world.time - t0, final_error_px=final_error, **stats)


def servo_to_point(scenario: Scenario, offset, jacobian=None, estimator: EstimatorConfig | None = None,
                   seed: int = 0, max_ticks: int = 600, drift: DriftModel | None = None) -> list[float]:
    """Servo the loaded fingertip to a point ``offset`` meters away; returns |E| per tick.

    ``jacobian`` overrides the camera-derived one, e.g. to test robustness
    to calibration error. The list ends at the first tick with |E| within
    the stop radius, or after ``max_ticks``.
    """
    estimator = estimator or EstimatorConfig()
    world, start = _path_world(scenario, seed, scenario.drift if drift is None else drift)
    est = estimator.build(scenario, seed)
    clock = ControlClock(scenario.sensor.rate, est.rate)
    target = scenario.camera(np.array([start[0] + offset[0], start[1] + offset[1]]))
    J = scenario.jacobian_at(start) if jacobian is None else np.asarray(jacobian, float)
    cfg = IbvsConfig(gain=scenario.ibvs_gain, jacobian=J, target=tuple(target),
                     stop_radius=scenario.stop_radius, min_separation=scenario.min_separation)
    errors = []
    for tick in range(max_ticks):
        err = ibvs_error(est(world), cfg, MaximaMode.SINGLE)
        errors.append(float(math.hypot(*err)))
        if errors[-1] <= cfg.stop_radius:
            break
        qdot = ibvs_command(err, cfg)
        cmd = Command(d_base_xy=(float(qdot[0]) / est.rate, float(qdot[1]) / est.rate))
        world, ok = _advance(world, cmd, clock.steps_until(tick, world.step_index),
                             scenario.dt)
        if not ok:
            break
    return errors


def run_square_paths(scenario: Scenario, seeds: int = 10, estimator: EstimatorConfig | None = None,
                     master_seed: int | None = None, modes=("open", "closed")) -> list[TrialReport]:
    master = scenario.seed if master_seed is None else master_seed
    reports = []
    for i in range(seeds):
        seed = trial_seed(master, "path", i)
        for mode in modes:
            reports.append(run_square_path(scenario, mode, estimator, seed, i))
    return reports


# grasping -----------------------------------------------------------------

def grasp_workspace(scenario: Scenario, yaw: float, margin: float | None = None):
    """Base positions that keep both open fingertips on the sensor."""
    spec, model = scenario.sensor, scenario.gripper
    margin = model.fingertip_radius / 2 if margin is None else margin
    half = model.finger_separation_open / 2
    hx, hy = half * abs(math.cos(yaw)), half * abs(math.sin(yaw))
    return (margin + hx, margin + hy, spec.active_w - margin - hx, spec.active_h - margin - hy)


def place_object(scenario: Scenario, dims, rng, inset: float = 0.01):
    """Random object pose over the central 60% of each sensor axis, reachable by the gripper."""
    spec = scenario.sensor
    for _ in range(10000):
        theta = rng.uniform(0.0, math.pi)
        x = rng.uniform(0.2 * spec.active_w, 0.8 * spec.active_w)
        y = rng.uniform(0.2 * spec.active_h, 0.8 * spec.active_h)
        x0, y0, x1, y1 = grasp_workspace(scenario, theta + math.pi / 2)
        if x0 + inset <= x <= x1 - inset and y0 + inset <= y <= y1 - inset:
            return x, y, theta
    raise ConfigError("no reachable object pose on this sensor")


def run_grasp_trial(scenario: Scenario, name: str, dims, estimator: EstimatorConfig | None = None,
                    seed: int = 0, trial: int = 0, pose=None, cfg: GraspConfig | None = None,
                    log: list | None = None) -> TrialReport:
    estimator = estimator or EstimatorConfig()
    rng = np.random.default_rng(seed)
    if pose is None:
        pose = place_object(scenario, dims, rng)
    ox, oy, theta = pose
    # close across the object's width
    yaw = theta + math.pi / 2
    workspace = grasp_workspace(scenario, yaw)
    angle = rng.uniform(0.0, 2 * math.pi)
    radius = rng.uniform(0.01, 0.025)
    bx = min(max(ox + radius * math.cos(angle), workspace[0]), workspace[2])
    by = min(max(oy + radius * math.sin(angle), workspace[1]), workspace[3])
    world = WorldState(
        gripper=GripperState(base_xy=(bx, by), lift_z=rng.uniform(0.01, 0.02), yaw=yaw),
        model=scenario.gripper, objects=(SceneObject(name, tuple(dims), (ox, oy, theta)),),
        drift=replace(scenario.drift, seed=seed), workspace=workspace)
    est = estimator.build(scenario, seed)
    clock = ControlClock(scenario.sensor.rate, est.rate)
    centroid_px = tuple(float(v) for v in scenario.camera(np.array([ox, oy])))
    if cfg is None:
        cfg = GraspConfig(
            force=replace(scenario.force_target, target=scenario.grasp_force),
            ibvs=IbvsConfig(gain=scenario.ibvs_gain, jacobian=scenario.jacobian_at((ox, oy)),
                            stop_radius=scenario.stop_radius,
                            min_separation=scenario.min_separation),
            control_period=1.0 / est.rate, settle_ticks=scenario.settle_ticks,
            lift_height=scenario.lift_height, hold_time=scenario.hold_time,
            timeout=scenario.grasp_timeout)
    area = scenario.image_to_sensor.pixel_area_map(scenario.image_shape)
    state = GraspState(start_time=world.time)
    torque_ok = True
    tick = 0
    while True:
        frame = est(world)
        inputs = GraspInputs(world.time, frame, centroid_px, world.objects[0].held, torque_ok,
                             world.gripper.aperture)
        state, cmd = grasp_step(state, inputs, cfg, area)
        if log is not None:
            c = cmd or Command()
            log.append((world.time, state.phase.value, state.last_error,
                        total_force(frame.pressure, area), *c.d_base_xy, c.d_lift_z))
        if cmd is None:
            break
        if cmd.close:
            world = attempt_close(world)
        world, torque_ok = _advance(world, cmd, clock.steps_until(tick, world.step_index),
                                    scenario.dt)
        tick += 1
    reason = None if state.phase is GraspPhase.SUCCESS else state.reason.value
    return TrialReport(f"grasp/{name}", trial, seed, "Success" if reason is None else "Failure",
                       reason, state.entered - state.start_time, object_name=name,
                       phase=(state.failed_in or state.phase).value,
                       final_error_px=state.last_error)


def run_grasp_suite(scenario: Scenario, objects=TEST_OBJECTS, trials_per_object: int = 10,
                    estimator: EstimatorConfig | None = None,
                    master_seed: int | None = None, logs: dict | None = None) -> list[TrialReport]:
    """Grasp every object ``trials_per_object`` times; ``logs`` collects per-tick control rows."""
    master = scenario.seed if master_seed is None else master_seed
    reports = []
    for j, (name, dims) in enumerate(objects):
        for i in range(trials_per_object):
            seed = trial_seed(master, "grasp", j, i)
            log = None if logs is None else logs.setdefault((f"grasp/{name}", i), [])
            reports.append(run_grasp_trial(scenario, name, dims, estimator, seed, i, log=log))
    return reports


CONTROL_LOG_FIELDS = ["scenario_id", "trial", "time", "phase", "error_px", "force_estimate",
                      "cmd_dx", "cmd_dy", "cmd_dz"]


def control_log_csv(logs: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CONTROL_LOG_FIELDS)
    for (sid, trial) in sorted(logs):
        for t, phase, err, f_hat, dx, dy, dz in logs[(sid, trial)]:
            writer.writerow([sid, trial, repr(t), phase, "" if err is None else repr(err),
                             repr(f_hat), repr(dx), repr(dy), repr(dz)])
    return buf.getvalue()


def success_counts(reports) -> dict:
    out = {}
    for r in reports:
        key = r.object_name or r.scenario_id
        ok, total = out.get(key, (0, 0))
        out[key] = (ok + int(r.success), total + 1)
    return out


# full suite ---------------------------------------------------------------

def force_plot_csv(reports) -> str:
    """Target versus achieved ground-truth force, one row per trial."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scenario_id", "trial", "target_force", "achieved_force", "outcome"])
    for r in sorted(reports, key=lambda r: (r.scenario_id, r.trial)):
        writer.writerow([r.scenario_id, r.trial, repr(r.target_force), repr(r.achieved_force),
                         r.outcome])
    return buf.getvalue()


def path_plot_csv(corners, traces: dict) -> str:
    """Reference square followed by each traced path; ``traces`` maps mode to (t, x, y) rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["series", "t", "x", "y"])
    for x, y in corners:
        writer.writerow(["reference", "", repr(float(x)), repr(float(y))])
    for mode in sorted(traces):
        for t, x, y in traces[mode]:
            writer.writerow([mode, repr(float(t)), repr(float(x)), repr(float(y))])
    return buf.getvalue()


def run_all(scenario: Scenario | None = None, master_seed: int = 0, out_dir=None,
            trials: int = 10, noisy: EstimatorConfig | None = None) -> dict:
    """Run every experiment and optionally write reports under ``out_dir``.

    Returns a mapping of file name to contents. The contents depend only on
    the scenario and master seed.
    """
    scenario = scenario or Scenario()
    noisy = noisy or EstimatorConfig("noisy")
    oracle = EstimatorConfig()
    force = (run_force_trials(scenario, trials_per_level=trials, estimator=oracle,
                              master_seed=master_seed, tag="force/oracle")
             + run_force_trials(scenario, trials_per_level=trials, estimator=noisy,
                                master_seed=master_seed, tag="force/noisy"))
    path = run_square_paths(scenario, seeds=trials, estimator=oracle, master_seed=master_seed)
    grasp = run_grasp_suite(scenario, scenario.objects or TEST_OBJECTS, trials, oracle,
                            master_seed)

    traces = {}
    seed0 = trial_seed(master_seed, "path", 0)
    for mode in ("open", "closed"):
        log = []
        run_square_path(scenario, mode, oracle, seed0, 0, path_log=log)
        traces[mode] = log
    start = path_start(scenario)
    meta = {"master_seed": master_seed, "scenario": scenario.to_dict(),
            "estimators": {"oracle": oracle.to_dict(), "noisy": noisy.to_dict()}}
    everything = force + path + grasp
    files = {
        "reports.json": reports_to_json(everything, meta),
        "reports.csv": reports_to_csv(everything),
        "force_plot.csv": force_plot_csv(force),
        "path_plot.csv": path_plot_csv(square_corners(start, scenario.path_side), traces),
        "grasp_summary.json": json.dumps(
            {k: {"success": v[0], "trials": v[1]} for k, v in success_counts(grasp).items()},
            indent=2, sort_keys=True) + "\n",
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)
    return files


def record_contact_sequence(scenario: Scenario, out_dir, target: float | None = None,
                            controller: EstimatorConfig | None = None,
                            recorded: EstimatorConfig | None = None, seed: int | None = None):
    """Run one force trial and save its trace plus ground-truth and estimated frames.

    Ground truth is the oracle estimate; the recorded estimate uses the noisy
    estimator unless ``recorded`` says otherwise. Writes ``trace.csv``,
    ``gt/manifest.json`` and ``est/manifest.json`` and returns the trial report.
    """
    seed = scenario.seed if seed is None else seed
    target = scenario.force_target.target if target is None else target
    controller = controller or EstimatorConfig()
    truth = EstimatorConfig().build(scenario, seed)
    noisy = (recorded or EstimatorConfig("noisy")).build(scenario, seed)
    gt, est = [], []

    def keep(world, frame):
        gt.append(truth(world).pressure)
        est.append(noisy(world).pressure)

    trace = TraceLog()
    report = run_force_trial(scenario, target, controller, seed, 0, "sim/contact", trace, keep)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(trace.to_csv())
    write_sequence(out / "gt", gt)
    write_sequence(out / "est", est)
    return report
