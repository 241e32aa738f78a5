"""Image-space pressure estimators.

These stand in for a learned image-to-pressure model. They read the simulated
world (or recorded frames) and emit image-plane pressure images, which is all
the controllers consume.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import FrameMismatch, OutOfRange
from .geometry import Homography, SensorSpec, warp_pressure
from .pressure import BinSchema, Frame, PressureImage, quantize
from .sim import render_pressure

DEFAULT_RATE = 12.0  # Hz


class Source(enum.Enum):
    ORACLE = "Oracle"
    NOISY = "NoisyQuantized"
    REPLAY = "Replay"


@dataclass(frozen=True)
class EstimateFrame:
    pressure: PressureImage
    latency: float = 0.0
    source: Source = Source.ORACLE

    def __post_init__(self):
        if self.pressure.frame is not Frame.IMAGE:
            raise FrameMismatch("estimates must be image-plane pressure images")
        if self.latency < 0:
            raise ValueError("latency must be non-negative")

    @property
    def timestamp(self) -> float:
        return self.pressure.timestamp


@dataclass(frozen=True)
class NoiseConfig:
    """Corruptions applied on top of the oracle estimate, in this order.

    gain_bias
        multiplicative error, output = (1 + gain_bias) * input
    contact_miss_below
        pixels below this pressure (Pa) are dropped, emulating missed light contact
    quantize
        bin schema to pass values through, or None to skip
    spatial_jitter
        std (px) of a per-frame rigid shift, rounded to whole pixels
    """

    quantize: BinSchema | None = field(default_factory=BinSchema)
    contact_miss_below: float = 1000.0
    gain_bias: float = 0.3
    spatial_jitter: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.contact_miss_below < 0 or self.spatial_jitter < 0:
            raise ValueError("noise magnitudes must be non-negative")
        if self.gain_bias <= -1.0:
            raise ValueError("gain_bias must exceed -1")

    @classmethod
    def identity(cls, seed: int = 0) -> "NoiseConfig":
        return cls(quantize=None, contact_miss_below=0.0, gain_bias=0.0, spatial_jitter=0.0,
                   seed=seed)

    def to_dict(self) -> dict:
        return {"quantize": None if self.quantize is None else self.quantize.to_dict(),
                "contact_miss_below": self.contact_miss_below, "gain_bias": self.gain_bias,
                "spatial_jitter": self.spatial_jitter, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseConfig":
        d = dict(d)
        if "quantize" in d:
            q = d["quantize"]
            d["quantize"] = None if q is None else BinSchema(**q)
        return cls(**d)


def oracle_estimate(world, spec: SensorSpec, h: Homography, dst_shape) -> EstimateFrame:
    h.expect(Frame.SENSOR, Frame.IMAGE)
    return EstimateFrame(warp_pressure(render_pressure(world, spec), h, dst_shape), 0.0,
                         Source.ORACLE)


def _shift(data, dr, dc):
    out = np.zeros_like(data)
    rows, cols = data.shape
    if abs(dr) >= rows or abs(dc) >= cols:
        return out
    src_r = slice(max(0, -dr), rows - max(0, dr))
    dst_r = slice(max(0, dr), rows - max(0, -dr))
    src_c = slice(max(0, -dc), cols - max(0, dc))
    dst_c = slice(max(0, dc), cols - max(0, -dc))
    out[dst_r, dst_c] = data[src_r, src_c]
    return out


def corrupt(p: PressureImage, noise: NoiseConfig, time: float) -> PressureImage:
    data = p.data * (1.0 + noise.gain_bias)
    if noise.contact_miss_below > 0:
        data = np.where(data < noise.contact_miss_below, 0.0, data)
    if noise.quantize is not None:
        data = noise.quantize.representatives[quantize(data, noise.quantize)]
    if noise.spatial_jitter > 0:
        rng = np.random.default_rng([int(noise.seed) & 0xFFFFFFFF, int(round(time * 1e6))])
        dr, dc = np.rint(rng.normal(0.0, noise.spatial_jitter, 2)).astype(int)
        if dr or dc:
            data = _shift(data, int(dr), int(dc))
    return p.replace(data=data)


def noisy_estimate(world, spec: SensorSpec, h: Homography, dst_shape,
                   noise: NoiseConfig) -> EstimateFrame:
    clean = oracle_estimate(world, spec, h, dst_shape).pressure
    return EstimateFrame(corrupt(clean, noise, world.time), 0.0, Source.NOISY)


def replay_estimate(manifest, t: float) -> EstimateFrame:
    """Most recent recorded frame at or before ``t`` (zero-order hold)."""
    stamps = manifest.timestamps
    if not stamps:
        raise OutOfRange("manifest has no frames")
    k = bisect.bisect_right(stamps, t) - 1
    if k < 0:
        raise OutOfRange(f"t={t} precedes the first frame at {stamps[0]}")
    return EstimateFrame(manifest.frame(k), 0.0, Source.REPLAY)


class OracleEstimator:
    source = Source.ORACLE

    def __init__(self, spec: SensorSpec, h: Homography, dst_shape, rate: float = DEFAULT_RATE):
        self.spec, self.h, self.dst_shape, self.rate = spec, h, tuple(dst_shape), rate

    def __call__(self, world) -> EstimateFrame:
        return oracle_estimate(world, self.spec, self.h, self.dst_shape)

    def describe(self) -> dict:
        return {"source": self.source.value, "rate": self.rate}


class NoisyEstimator(OracleEstimator):
    source = Source.NOISY

    def __init__(self, spec, h, dst_shape, noise: NoiseConfig | None = None,
                 rate: float = DEFAULT_RATE):
        super().__init__(spec, h, dst_shape, rate)
        self.noise = NoiseConfig() if noise is None else noise

    def __call__(self, world) -> EstimateFrame:
        return noisy_estimate(world, self.spec, self.h, self.dst_shape, self.noise)

    def describe(self) -> dict:
        return {**super().describe(), "noise": self.noise.to_dict()}


class ReplayEstimator:
    source = Source.REPLAY

    def __init__(self, manifest, rate: float = DEFAULT_RATE):
        self.manifest, self.rate = manifest, rate

    def __call__(self, world) -> EstimateFrame:
        return replay_estimate(self.manifest, world.time)

    def describe(self) -> dict:
        return {"source": self.source.value, "rate": self.rate, "frames": len(self.manifest)}
