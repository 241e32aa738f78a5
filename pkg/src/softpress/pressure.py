"""Pressure images and their primitive analyses.

A :class:`PressureImage` is a dense grid of pressure values in pascals. It lives
either on the sensor plane (pixel pitch in meters is known) or in camera image
space (pixel area comes from a homography). Frame coordinates of pixel
``(row, col)`` are

* sensor plane: ``((col + 0.5) * pitch_x, (row + 0.5) * pitch_y)`` meters,
  so the active area spans ``[0, cols * pitch_x] x [0, rows * pitch_y]``;
* image plane: ``(col, row)`` pixels (pixel centers on integers).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import FrameMismatch, NoContact, ShapeMismatch

DEFAULT_CONTACT_THRESHOLD = 1000.0  # Pa


class Frame(enum.Enum):
    SENSOR = "SensorPlane"
    IMAGE = "ImagePlane"

    @property
    def tag(self) -> int:
        return 0 if self is Frame.SENSOR else 1

    @classmethod
    def from_tag(cls, tag: int) -> "Frame":
        if tag == 0:
            return cls.SENSOR
        if tag == 1:
            return cls.IMAGE
        raise ValueError(f"unknown frame tag {tag}")


@dataclass(frozen=True, eq=False)
class PressureImage:
    """Immutable grid of pressures (Pa) with frame and pixel geometry."""

    data: np.ndarray
    frame: Frame = Frame.SENSOR
    pitch_x: float | None = None
    pitch_y: float | None = None
    timestamp: float = 0.0

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"pressure data must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("pressure values must be finite")
        if np.any(data < 0.0):
            raise ValueError("pressure values must be non-negative")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.frame is Frame.SENSOR:
            if self.pitch_x is None or self.pitch_y is None:
                raise ValueError("sensor-plane images need pitch_x and pitch_y")
            if self.pitch_x <= 0 or self.pitch_y <= 0:
                raise ValueError("pixel pitch must be positive")
            object.__setattr__(self, "pitch_x", float(self.pitch_x))
            object.__setattr__(self, "pitch_y", float(self.pitch_y))
        else:
            # image-frame pixel area is only known through a homography
            object.__setattr__(self, "pitch_x", None)
            object.__setattr__(self, "pitch_y", None)
        object.__setattr__(self, "timestamp", float(self.timestamp))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @classmethod
    def zeros(cls, shape, frame=Frame.SENSOR, pitch_x=None, pitch_y=None, timestamp=0.0):
        return cls(np.zeros(shape), frame, pitch_x, pitch_y, timestamp)

    def replace(self, data=None, timestamp=None) -> "PressureImage":
        return PressureImage(
            self.data if data is None else data,
            self.frame,
            self.pitch_x,
            self.pitch_y,
            self.timestamp if timestamp is None else timestamp,
        )

    def index_to_frame(self, rows, cols):
        """Frame coordinates (x, y) of fractional pixel indices."""
        rows = np.asarray(rows, dtype=float)
        cols = np.asarray(cols, dtype=float)
        if self.frame is Frame.SENSOR:
            return (cols + 0.5) * self.pitch_x, (rows + 0.5) * self.pitch_y
        return cols, rows

    def frame_to_index(self, x, y):
        """Fractional pixel indices (row, col) of frame coordinates."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.frame is Frame.SENSOR:
            return y / self.pitch_y - 0.5, x / self.pitch_x - 0.5
        return y, x

    def pixel_centers(self):
        rr, cc = np.mgrid[0 : self.rows, 0 : self.cols]
        return self.index_to_frame(rr, cc)


def as_array(p) -> np.ndarray:
    return p.data if isinstance(p, PressureImage) else np.asarray(p, dtype=float)


def check_same_shape(a, b):
    sa, sb = np.shape(as_array(a)), np.shape(as_array(b))
    if sa != sb:
        raise ShapeMismatch(f"shapes differ: {sa} vs {sb}")


def total_force(p: PressureImage, area=None) -> float:
    """Integrate pressure over area, returning newtons.

    ``area`` may be omitted for sensor-plane images (the taxel pitch is used),
    or given as a scalar / per-pixel array in m^2, or as an image-to-sensor
    :class:`~softpress.geometry.Homography` from which per-pixel areas are
    derived. Image-plane images require a homography or an area array.
    """
    if hasattr(area, "pixel_area_map"):
        if p.frame is not Frame.IMAGE:
            raise FrameMismatch("homography-derived areas apply to image-plane images")
        area = area.pixel_area_map(p.shape)
    elif area is None or np.ndim(area) == 0:
        if p.frame is Frame.IMAGE:
            raise FrameMismatch("image-plane force integration needs homography-derived areas")
        if area is None:
            area = p.pitch_x * p.pitch_y
    else:
        area = np.asarray(area, dtype=float)
        if area.shape != p.shape:
            raise ShapeMismatch(f"area map {area.shape} does not match image {p.shape}")
    return float(np.sum(p.data * area))


def contact_mask(p, threshold: float = DEFAULT_CONTACT_THRESHOLD) -> np.ndarray:
    if threshold <= 0:
        raise ValueError("contact threshold must be positive")
    return as_array(p) > threshold


def in_contact(p, threshold: float = DEFAULT_CONTACT_THRESHOLD) -> bool:
    """True when any pixel exceeds the contact threshold."""
    return bool(np.any(contact_mask(p, threshold)))


@dataclass(frozen=True)
class BinSchema:
    """Zero bin plus log-spaced pressure bins.

    Bin 0 holds everything below ``p_min``; bins ``1 .. n_bins - 1`` split
    ``[p_min, p_max)`` evenly in log space, and the top bin also absorbs
    values at or above ``p_max``.
    """

    n_bins: int = 9
    p_min: float = 1000.0
    p_max: float = 40000.0
    edges: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("need at least one pressure bin besides the zero bin")
        if not 0 < self.p_min < self.p_max:
            raise ValueError("bin schema needs 0 < p_min < p_max")
        edges = np.geomspace(self.p_min, self.p_max, self.n_bins)
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @property
    def representatives(self) -> np.ndarray:
        """Dequantized value of each bin: 0 for bin 0, else geometric mean of its edges."""
        reps = np.zeros(self.n_bins)
        reps[1:] = np.sqrt(self.edges[:-1] * self.edges[1:])
        return reps

    def to_dict(self) -> dict:
        return {"n_bins": self.n_bins, "p_min": self.p_min, "p_max": self.p_max}


def quantize(p, schema: BinSchema) -> np.ndarray:
    values = as_array(p)
    bins = np.searchsorted(schema.edges, values, side="right")
    return np.minimum(bins, schema.n_bins - 1).astype(np.int64)


def dequantize(bins, schema: BinSchema, frame=Frame.IMAGE, pitch_x=None, pitch_y=None,
               timestamp=0.0) -> PressureImage:
    bins = np.asarray(bins)
    if bins.size and (bins.min() < 0 or bins.max() >= schema.n_bins):
        raise ValueError("bin index out of range")
    return PressureImage(schema.representatives[bins], frame, pitch_x, pitch_y, timestamp)


def local_maxima(p, min_value: float = 0.0, min_separation: float = 1.0):
    """Peaks of a pressure grid as ``(row, col, value)``, strongest first.

    A peak is a pixel no lower than any of its 8 neighbours and strictly above
    ``min_value``.  Candidates are visited by decreasing value, then by
    ``(row, col)``; a candidate closer than ``min_separation`` pixels to an
    already accepted peak is suppressed.
    """
    if min_separation < 1:
        raise ValueError("min_separation must be at least 1 pixel")
    values = as_array(p)
    above = values > min_value
    if not above.any():
        return []
    # work on the bounding box of supra-threshold pixels plus a 1 px border
    rows, cols = np.nonzero(above)
    r0, r1 = max(rows.min() - 1, 0), min(rows.max() + 2, values.shape[0])
    c0, c1 = max(cols.min() - 1, 0), min(cols.max() + 2, values.shape[1])
    window = values[r0:r1, c0:c1]
    neigh = ndimage.maximum_filter(window, size=3, mode="constant", cval=-np.inf)
    cand = (window >= neigh) & above[r0:r1, c0:c1]
    cr, cc = np.nonzero(cand)
    cv = window[cr, cc]
    cr = cr + r0
    cc = cc + c0
    order = np.lexsort((cc, cr, -cv))
    kept = []
    limit = min_separation * min_separation
    for k in order:
        r, c = int(cr[k]), int(cc[k])
        if all((r - kr) ** 2 + (c - kc) ** 2 >= limit for kr, kc, _ in kept):
            kept.append((r, c, float(cv[k])))
    return kept


def center_of_pressure(p: PressureImage) -> tuple[float, float]:
    """Pressure-weighted centroid of pixel centers, in frame coordinates."""
    total = float(p.data.sum())
    if total <= 0.0:
        raise NoContact("center of pressure is undefined for an unloaded image")
    rr = np.arange(p.rows, dtype=float)
    cc = np.arange(p.cols, dtype=float)
    mean_row = float(p.data.sum(axis=1) @ rr) / total
    mean_col = float(p.data.sum(axis=0) @ cc) / total
    x, y = p.index_to_frame(mean_row, mean_col)
    return float(x), float(y)


def contact_bbox(p, threshold: float = 0.0):
    """(row_min, row_max, col_min, col_max) of pixels above threshold, or None."""
    rows, cols = np.nonzero(as_array(p) > threshold)
    if rows.size == 0:
        return None
    return int(rows.min()), int(rows.max()), int(cols.min()), int(cols.max())
