"""Quasi-static simulation of a compliant two-fingertip gripper on a plane.

Each fingertip presses a truncated paraboloid of pressure into the plane,
``p(r) = k * depth * max(0, 1 - (r / r_c)^2)``, and deflects laterally when it
sticks to the surface. Deflection grows with the opposing base motion until
the lateral spring force reaches the friction limit ``mu * F_n``; past that
the tip slides. Lateral motion of the base is corrupted by a seeded drift
model (multiplicative bias plus per-step noise while moving).

All state objects are immutable; :func:`step` returns a new world.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import ConfigError, TorqueLimit
from .geometry import SensorSpec
from .pressure import Frame, PressureImage

_NOISE_BLOCK = 1024


@dataclass(frozen=True)
class GripperModel:
    fingertip_radius: float = 0.012
    finger_separation_open: float = 0.05
    finger_separation_closed: float = 0.002
    normal_stiffness: float = 2e6         # Pa of peak pressure per meter of penetration
    lateral_compliance: float = 0.008     # m/N
    friction_mu: float = 0.6
    max_deflection: float = 0.05
    torque_limit: float = 15.0            # N of total normal force
    close_duration: float = 1.0           # s from open to closed
    capture_radius: float = 0.006

    def __post_init__(self):
        positive = ["fingertip_radius", "finger_separation_open", "normal_stiffness",
                    "lateral_compliance", "friction_mu", "max_deflection", "torque_limit",
                    "close_duration", "capture_radius"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"gripper parameter {name} must be positive")
        if not 0 <= self.finger_separation_closed < self.finger_separation_open:
            raise ConfigError("closed finger separation must be in [0, open separation)")
        if self.lateral_compliance * 5.0 > self.max_deflection:
            raise ConfigError("max_deflection must accommodate a 5 N lateral load")

    def tip_force(self, depth: float) -> float:
        """Normal force (N) of one tip pressed ``depth`` meters into the plane."""
        r = self.fingertip_radius
        return self.normal_stiffness * max(depth, 0.0) * math.pi * r * r / 2.0

    def depth_for_force(self, force: float) -> float:
        r = self.fingertip_radius
        return force / (self.normal_stiffness * math.pi * r * r / 2.0)

    def lateral_deflection(self, lateral_force: float) -> float:
        """Static tip deflection (m) under a lateral load (N)."""
        return min(self.lateral_compliance * abs(lateral_force), self.max_deflection)

    def slip_limit(self, normal_force: float) -> float:
        """Largest deflection the friction cone can hold at this normal load."""
        return min(self.lateral_compliance * self.friction_mu * normal_force,
                   self.max_deflection)

    def separation(self, aperture: float) -> float:
        return (self.finger_separation_closed
                + aperture * (self.finger_separation_open - self.finger_separation_closed))


@dataclass(frozen=True)
class GripperState:
    base_xy: tuple = (0.0, 0.0)
    lift_z: float = 0.05
    aperture: float = 1.0
    yaw: float = 0.0
    tip_deflection: tuple = ((0.0, 0.0), (0.0, 0.0))
    tip_contact: tuple = (False, False)
    tip_height_offset: tuple = (0.0, 0.0)
    closing: bool = False

    def __post_init__(self):
        if not 0.0 <= self.aperture <= 1.0:
            raise ConfigError("aperture must lie in [0, 1]")


@dataclass(frozen=True)
class SceneObject:
    name: str
    footprint: tuple          # L x W x H in mm
    pose: tuple = (0.0, 0.0, 0.0)   # x, y in m; theta in rad (L axis)
    held: bool = False

    def __post_init__(self):
        if len(self.footprint) != 3 or min(self.footprint) <= 0:
            raise ConfigError(f"object {self.name!r} needs three positive dimensions")

    def half_extent_along(self, u) -> float:
        """Half-width (m) of the footprint rectangle projected on unit vector ``u``."""
        length, width = self.footprint[0] / 1000.0, self.footprint[1] / 1000.0
        c, s = math.cos(self.pose[2]), math.sin(self.pose[2])
        along_l = abs(u[0] * c + u[1] * s)
        along_w = abs(-u[0] * s + u[1] * c)
        return 0.5 * (length * along_l + width * along_w)


@dataclass(frozen=True)
class DriftModel:
    bias: float = 0.05        # fractional over-travel of commanded base motion
    noise_std: float = 5e-5   # m per moving step, per axis
    seed: int = 0


@dataclass(frozen=True)
class Command:
    d_base_xy: tuple = (0.0, 0.0)
    d_lift_z: float = 0.0
    d_aperture: float = 0.0
    close: bool = False

    def scaled(self, fraction: float) -> "Command":
        return Command((self.d_base_xy[0] * fraction, self.d_base_xy[1] * fraction),
                       self.d_lift_z * fraction, self.d_aperture * fraction, False)


@dataclass(frozen=True)
class WorldState:
    gripper: GripperState = field(default_factory=GripperState)
    model: GripperModel = field(default_factory=GripperModel)
    objects: tuple = ()
    drift: DriftModel = field(default_factory=DriftModel)
    time: float = 0.0
    step_index: int = 0
    workspace: tuple | None = None    # (xmin, ymin, xmax, ymax) for base_xy
    taxel_noise_std: float = 0.0      # Pa, additive sensor noise in renders


@lru_cache(maxsize=64)
def _noise_block(seed: int, block: int) -> np.ndarray:
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, block])
    out = rng.standard_normal((_NOISE_BLOCK, 2))
    out.setflags(write=False)
    return out


def drift_noise(seed: int, index: int) -> tuple[float, float]:
    """Standard-normal pair for step ``index``; a pure function of its arguments."""
    row = _noise_block(seed, index // _NOISE_BLOCK)[index % _NOISE_BLOCK]
    return float(row[0]), float(row[1])


def tip_positions(gripper: GripperState, model: GripperModel):
    """Undeformed fingertip centers (tip 0 then tip 1)."""
    half = model.separation(gripper.aperture) / 2.0
    ux, uy = math.cos(gripper.yaw), math.sin(gripper.yaw)
    bx, by = gripper.base_xy
    return ((bx - half * ux, by - half * uy), (bx + half * ux, by + half * uy))


def contact_points(gripper: GripperState, model: GripperModel):
    """Fingertip centers including lateral deflection."""
    tips = tip_positions(gripper, model)
    return tuple((t[0] + d[0], t[1] + d[1]) for t, d in zip(tips, gripper.tip_deflection))


def penetrations(gripper: GripperState) -> tuple[float, float]:
    return tuple(max(0.0, -(gripper.lift_z + off)) for off in gripper.tip_height_offset)


def normal_forces(world: WorldState) -> tuple[float, float]:
    return tuple(world.model.tip_force(d) for d in penetrations(world.gripper))


def lateral_forces(world: WorldState) -> tuple[float, float]:
    c = world.model.lateral_compliance
    return tuple(math.hypot(*d) / c for d in world.gripper.tip_deflection)


def _clamp(value, lo, hi):
    return min(max(value, lo), hi)


def step(world: WorldState, command: Command, dt: float) -> WorldState:
    """Advance the world by ``dt`` seconds under ``command``.

    Raises :class:`~softpress.errors.TorqueLimit` when the resulting total
    normal force exceeds the model's limit.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    cmd = (*command.d_base_xy, command.d_lift_z, command.d_aperture)
    if not all(math.isfinite(v) for v in cmd):
        raise ValueError("command must be finite")
    g, model = world.gripper, world.model

    cx, cy = command.d_base_xy
    bx, by = g.base_xy
    if cx != 0.0 or cy != 0.0:
        nx, ny = drift_noise(world.drift.seed, world.step_index)
        k = 1.0 + world.drift.bias
        sd = world.drift.noise_std
        nbx, nby = bx + k * cx + sd * nx, by + k * cy + sd * ny
        if world.workspace is not None:
            x0, y0, x1, y1 = world.workspace
            nbx, nby = _clamp(nbx, x0, x1), _clamp(nby, y0, y1)
    else:
        nbx, nby = bx, by

    if g.closing:
        aperture = max(0.0, g.aperture - dt / model.close_duration)
    else:
        aperture = _clamp(g.aperture + command.d_aperture, 0.0, 1.0)
    lift_z = g.lift_z + command.d_lift_z

    moved = replace(g, base_xy=(nbx, nby), lift_z=lift_z, aperture=aperture)
    old_tips = tip_positions(g, model)
    new_tips = tip_positions(moved, model)
    forces = tuple(model.tip_force(d) for d in penetrations(moved))
    total = forces[0] + forces[1]
    if total > model.torque_limit:
        raise TorqueLimit(total, model.torque_limit)

    deflections, contacts = [], []
    for k in range(2):
        if forces[k] <= 0.0:
            deflections.append((0.0, 0.0))
            contacts.append(False)
            continue
        # the contact patch stays put while the undeformed tip moves underneath it
        dx = g.tip_deflection[k][0] - (new_tips[k][0] - old_tips[k][0])
        dy = g.tip_deflection[k][1] - (new_tips[k][1] - old_tips[k][1])
        if not g.tip_contact[k]:
            dx = dy = 0.0
        limit = model.slip_limit(forces[k])
        mag = math.hypot(dx, dy)
        if mag > limit:
            dx, dy = dx * limit / mag, dy * limit / mag
        deflections.append((dx, dy))
        contacts.append(True)

    gripper = replace(moved, tip_deflection=tuple(deflections), tip_contact=tuple(contacts))
    objects = world.objects
    if any(o.held for o in objects):
        mx, my = nbx - bx, nby - by
        objects = tuple(replace(o, pose=(o.pose[0] + mx, o.pose[1] + my, o.pose[2]))
                        if o.held else o for o in objects)
    return replace(world, gripper=gripper, objects=objects, time=world.time + dt,
                   step_index=world.step_index + 1)


def render_pressure(world: WorldState, spec: SensorSpec) -> PressureImage:
    """Ground-truth sensor image of the current contact state."""
    out = np.zeros(spec.shape)
    model = world.model
    rc = model.fingertip_radius
    px, py = spec.pitch_x, spec.pitch_y
    depths = penetrations(world.gripper)
    for (cx, cy), depth in zip(contact_points(world.gripper, model), depths):
        if depth <= 0.0:
            continue
        c0 = max(int(math.floor((cx - rc) / px - 0.5)), 0)
        c1 = min(int(math.ceil((cx + rc) / px - 0.5)) + 1, spec.cols)
        r0 = max(int(math.floor((cy - rc) / py - 0.5)), 0)
        r1 = min(int(math.ceil((cy + rc) / py - 0.5)) + 1, spec.rows)
        if c0 >= c1 or r0 >= r1:
            continue
        xs = (np.arange(c0, c1) + 0.5) * px - cx
        ys = (np.arange(r0, r1) + 0.5) * py - cy
        r2 = (ys[:, None] ** 2 + xs[None, :] ** 2) / (rc * rc)
        out[r0:r1, c0:c1] += model.normal_stiffness * depth * np.maximum(0.0, 1.0 - r2)
    if world.taxel_noise_std > 0.0:
        rng = np.random.default_rng([int(world.drift.seed) & 0xFFFFFFFF, world.step_index, 1])
        out = np.maximum(out + rng.normal(0.0, world.taxel_noise_std, out.shape), 0.0)
    return PressureImage(out, Frame.SENSOR, px, py, world.time)


def captures(world: WorldState, obj: SceneObject) -> bool:
    """Whether closing the gripper now would pick up ``obj``.

    Both tips must be in contact, sit on opposite sides of the footprint along
    the line joining them, and have their midpoint within ``capture_radius``
    of the object centroid.
    """
    g, model = world.gripper, world.model
    if not all(g.tip_contact):
        return False
    (ax, ay), (bx, by) = contact_points(g, model)
    span = math.hypot(bx - ax, by - ay)
    if span == 0.0:
        return False
    u = ((bx - ax) / span, (by - ay) / span)
    ox, oy = obj.pose[0], obj.pose[1]
    mid_x, mid_y = (ax + bx) / 2.0, (ay + by) / 2.0
    if math.hypot(mid_x - ox, mid_y - oy) > model.capture_radius:
        return False
    extent = obj.half_extent_along(u)
    s0 = (ax - ox) * u[0] + (ay - oy) * u[1]
    s1 = (bx - ox) * u[0] + (by - oy) * u[1]
    return s0 < -extent and s1 > extent


def attempt_close(world: WorldState) -> WorldState:
    """Start closing the gripper, latching any object it brackets as held."""
    objects = tuple(replace(o, held=True) if (o.held or captures(world, o)) else o
                    for o in world.objects)
    return replace(world, gripper=replace(world.gripper, closing=True), objects=objects)


TRACE_FIELDS = ["time", "cmd_dx", "cmd_dy", "cmd_dz", "base_x", "base_y", "lift_z",
                "aperture", "depth_0", "depth_1", "force_0", "force_1", "defl_0x",
                "defl_0y", "defl_1x", "defl_1y"]


class TraceLog:
    """Per-step state trace, serialized as CSV."""

    def __init__(self):
        self.rows = []

    def record(self, world: WorldState, command: Command):
        g = world.gripper
        d = penetrations(g)
        f = normal_forces(world)
        self.rows.append([world.time, command.d_base_xy[0], command.d_base_xy[1],
                          command.d_lift_z, g.base_xy[0], g.base_xy[1], g.lift_z,
                          g.aperture, d[0], d[1], f[0], f[1], *g.tip_deflection[0],
                          *g.tip_deflection[1]])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_FIELDS)
        for row in self.rows:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()
