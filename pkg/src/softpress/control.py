"""Force regulation, image-based visual servoing, and the grasp state machine."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContactLost
from .pressure import DEFAULT_CONTACT_THRESHOLD, in_contact, local_maxima, total_force
from .sim import Command


@dataclass(frozen=True)
class ForceTarget:
    target: float
    deadband: float = 0.25     # N
    step_size: float = 0.0005  # m of lift per control tick

    def __post_init__(self):
        if self.target < 0 or self.deadband <= 0 or self.step_size <= 0:
            raise ValueError("need target >= 0, deadband > 0 and step_size > 0")


def force_command(estimate, area, target: ForceTarget) -> float:
    """Bang-bang lift increment: lower below the band, raise above it, else hold."""
    f_hat = total_force(estimate.pressure, area)
    if f_hat < target.target - target.deadband:
        return -target.step_size
    if f_hat > target.target + target.deadband:
        return target.step_size
    return 0.0


class MaximaMode(enum.Enum):
    SINGLE = "Single"
    FINGERTIP_MEAN = "FingertipMean"


@dataclass(frozen=True)
class IbvsConfig:
    gain: float = 1.0                      # 1/s
    jacobian: tuple = ((1.0, 0.0), (0.0, 1.0))   # image px per actuator m
    target: tuple = (0.0, 0.0)             # image px (x = col, y = row)
    stop_radius: float = 3.0               # px
    min_separation: float = 15.0           # px between fingertip maxima
    min_value: float = DEFAULT_CONTACT_THRESHOLD

    def __post_init__(self):
        if self.gain <= 0:
            raise ValueError("IBVS gain must be positive")
        j = np.asarray(self.jacobian, dtype=float)
        if j.shape != (2, 2) or not np.all(np.isfinite(j)):
            raise ValueError("IBVS jacobian must be a finite 2x2 matrix")
        object.__setattr__(self, "jacobian", tuple(map(tuple, j.tolist())))


def effector_position(estimate, cfg: IbvsConfig, mode: MaximaMode) -> np.ndarray:
    peaks = local_maxima(estimate.pressure, cfg.min_value, cfg.min_separation)
    need = 1 if mode is MaximaMode.SINGLE else 2
    if len(peaks) < need:
        raise ContactLost(f"{mode.value} needs {need} pressure maxima, found {len(peaks)}")
    # peaks are (row, col); image coordinates are (x, y) = (col, row)
    pts = np.array([(c, r) for r, c, _ in peaks[:need]], dtype=float)
    return pts.mean(axis=0)


def ibvs_error(estimate, cfg: IbvsConfig, mode: MaximaMode = MaximaMode.SINGLE) -> np.ndarray:
    """Image-space error E = T - M."""
    return np.asarray(cfg.target, dtype=float) - effector_position(estimate, cfg, mode)


def pseudo_inverse(j, rtol: float = 1e-8) -> np.ndarray:
    """Moore-Penrose inverse, zeroing singular values below ``rtol * s_max``."""
    u, s, vt = np.linalg.svd(np.asarray(j, dtype=float))
    if s.size == 0 or s[0] == 0.0:
        return np.zeros_like(np.asarray(j, dtype=float).T)
    inv = np.where(s >= rtol * s[0], 1.0 / np.where(s == 0, 1.0, s), 0.0)
    return (vt.T * inv) @ u.T


def ibvs_command(error, cfg: IbvsConfig) -> np.ndarray:
    """Actuator rates q_dot = gain * pinv(J) @ E."""
    e = np.asarray(error, dtype=float)
    if not np.all(np.isfinite(e)):
        raise ValueError("IBVS error must be finite")
    return cfg.gain * (pseudo_inverse(cfg.jacobian) @ e)


def calibrate_jacobian(m0, m1, m2, dq1, dq2) -> np.ndarray:
    """Estimate J from the image effect of two independent probe motions.

    ``m0`` is the effector position before probing, ``m1`` and ``m2`` after
    actuator displacements ``dq1`` and ``dq2`` respectively.
    """
    dm = np.column_stack([np.subtract(m1, m0), np.subtract(m2, m0)])
    dq = np.column_stack([dq1, dq2]).astype(float)
    if abs(np.linalg.det(dq)) < 1e-15:
        raise ValueError("probe motions must be linearly independent")
    return dm @ np.linalg.inv(dq)


class GraspPhase(enum.Enum):
    APPROACH = "Approach"
    CONTACT_FORCE = "ContactForce"
    SERVO = "ServoToCentroid"
    CLOSE = "Close"
    LIFT = "Lift"
    HOLD = "Hold"
    SUCCESS = "Success"
    FAILURE = "Failure"

    @property
    def terminal(self) -> bool:
        return self in (GraspPhase.SUCCESS, GraspPhase.FAILURE)


class FailureReason(enum.Enum):
    TORQUE_LIMIT = "TorqueLimit"
    DROPPED = "Dropped"
    TIMEOUT = "Timeout"
    CONTACT_LOST = "ContactLost"


@dataclass(frozen=True)
class GraspConfig:
    force: ForceTarget = field(default_factory=lambda: ForceTarget(2.0))
    ibvs: IbvsConfig = field(default_factory=IbvsConfig)
    control_period: float = 1.0 / 12.0
    approach_step: float = 0.0005
    contact_threshold: float = DEFAULT_CONTACT_THRESHOLD
    settle_ticks: int = 3
    lift_height: float = 0.05
    lift_step: float = 0.005
    hold_time: float = 5.0
    timeout: float = 60.0


@dataclass(frozen=True)
class GraspInputs:
    time: float
    estimate: object
    object_centroid_px: tuple
    held: bool = False
    torque_ok: bool = True
    aperture: float = 1.0


@dataclass(frozen=True)
class GraspState:
    phase: GraspPhase = GraspPhase.APPROACH
    reason: FailureReason | None = None
    start_time: float = 0.0
    entered: float = 0.0
    counter: int = 0
    last_error: float | None = None
    failed_in: GraspPhase | None = None

    def enter(self, phase: GraspPhase, time: float, **kw) -> "GraspState":
        return replace(self, phase=phase, entered=time, counter=0, **kw)

    def fail(self, reason: FailureReason, time: float) -> "GraspState":
        return self.enter(GraspPhase.FAILURE, time, reason=reason, failed_in=self.phase)


def grasp_step(state: GraspState, inputs: GraspInputs, cfg: GraspConfig, area):
    """One control tick of the grasp sequence; returns ``(state, command)``.

    ``command`` holds per-tick displacements and is ``None`` once the state is
    terminal. ``area`` is the image-to-sensor homography (or per-pixel area
    map) used to integrate estimated pressure into force.
    """
    t = inputs.time
    if state.phase.terminal:
        return state, None
    if not inputs.torque_ok:
        return state.fail(FailureReason.TORQUE_LIMIT, t), None
    if t - state.start_time >= cfg.timeout:
        return state.fail(FailureReason.TIMEOUT, t), None

    est = inputs.estimate
    phase = state.phase
    if phase is GraspPhase.APPROACH:
        if in_contact(est.pressure, cfg.contact_threshold):
            return state.enter(GraspPhase.CONTACT_FORCE, t), Command()
        return state, Command(d_lift_z=-cfg.approach_step)

    dz = force_command(est, area, cfg.force)
    if phase is GraspPhase.CONTACT_FORCE:
        count = state.counter + 1 if dz == 0.0 else 0
        if count >= cfg.settle_ticks:
            return state.enter(GraspPhase.SERVO, t), Command()
        return replace(state, counter=count), Command(d_lift_z=dz)

    if phase is GraspPhase.SERVO:
        ibvs = replace(cfg.ibvs, target=tuple(inputs.object_centroid_px))
        try:
            err = ibvs_error(est, ibvs, MaximaMode.FINGERTIP_MEAN)
        except ContactLost:
            return state.fail(FailureReason.CONTACT_LOST, t), None
        norm = float(math.hypot(*err))
        if norm <= ibvs.stop_radius:
            return state.enter(GraspPhase.CLOSE, t, last_error=norm), Command(d_lift_z=dz, close=True)
        qdot = ibvs_command(err, ibvs)
        step = (float(qdot[0]) * cfg.control_period, float(qdot[1]) * cfg.control_period)
        return replace(state, last_error=norm), Command(d_base_xy=step, d_lift_z=dz)

    if phase is GraspPhase.CLOSE:
        if inputs.aperture <= 0.0:
            return state.enter(GraspPhase.LIFT, t), Command(d_lift_z=cfg.lift_step)
        return state, Command(d_lift_z=dz)

    if phase is GraspPhase.LIFT:
        n_steps = math.ceil(cfg.lift_height / cfg.lift_step - 1e-9)
        if state.counter + 1 >= n_steps:
            return state.enter(GraspPhase.HOLD, t), Command()
        return replace(state, counter=state.counter + 1), Command(d_lift_z=cfg.lift_step)

    # HOLD
    if not inputs.held:
        return state.fail(FailureReason.DROPPED, t), None
    if t - state.entered >= cfg.hold_time:
        return state.enter(GraspPhase.SUCCESS, t), None
    return state, Command()
