"""Homographies between the sensor plane (meters) and camera images (pixels)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import DegenerateConfiguration, FrameMismatch, OutsidePlane
from .pressure import Frame, PressureImage

_SNAP = 1e-9


@dataclass(frozen=True)
class SensorSpec:
    """Planar taxel array: a rows x cols grid over an active area."""

    rows: int = 105
    cols: int = 185
    active_w: float = 0.23
    active_h: float = 0.13
    rate: float = 100.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("sensor needs at least one taxel per axis")
        if self.active_w <= 0 or self.active_h <= 0 or self.rate <= 0:
            raise ValueError("sensor dimensions and rate must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def pitch_x(self) -> float:
        return self.active_w / self.cols

    @property
    def pitch_y(self) -> float:
        return self.active_h / self.rows

    @property
    def taxel_area(self) -> float:
        return self.pitch_x * self.pitch_y

    def blank(self, timestamp: float = 0.0) -> PressureImage:
        return PressureImage.zeros(self.shape, Frame.SENSOR, self.pitch_x, self.pitch_y, timestamp)

    def to_dict(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "active_w": self.active_w,
                "active_h": self.active_h, "rate": self.rate}


class Homography:
    """A 3x3 projective map tagged with its source and destination frames.

    The matrix is normalized so that ``h[2, 2] == 1`` whenever that entry is
    not vanishingly small.
    """

    __slots__ = ("h", "src_frame", "dst_frame")

    def __init__(self, h, src_frame: Frame = Frame.SENSOR, dst_frame: Frame = Frame.IMAGE):
        h = np.array(h, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(h)):
            raise DegenerateConfiguration("homography has non-finite entries")
        if abs(h[2, 2]) > 1e-12 * np.abs(h).max():
            h = h / h[2, 2]
        else:
            h = h / np.linalg.norm(h)
        if abs(np.linalg.det(h)) <= 1e-12:
            raise DegenerateConfiguration("homography is singular")
        h.setflags(write=False)
        self.h = h
        self.src_frame = Frame(src_frame)
        self.dst_frame = Frame(dst_frame)

    def __repr__(self):
        return f"Homography({self.src_frame.value}->{self.dst_frame.value}, {self.h.tolist()})"

    def __eq__(self, other):
        if not isinstance(other, Homography):
            return NotImplemented
        return (self.src_frame is other.src_frame and self.dst_frame is other.dst_frame
                and np.array_equal(self.h, other.h))

    def __hash__(self):
        return hash((self.src_frame, self.dst_frame, self.h.tobytes()))

    def __call__(self, points) -> np.ndarray:
        """Map points of shape (2,) or (N, 2)."""
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 2)
        w = flat @ self.h[2, :2] + self.h[2, 2]
        x = (flat @ self.h[0, :2] + self.h[0, 2]) / w
        y = (flat @ self.h[1, :2] + self.h[1, 2]) / w
        return np.stack([x, y], axis=-1).reshape(pts.shape)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.h), self.dst_frame, self.src_frame)

    def compose(self, other: "Homography") -> "Homography":
        """The map ``self(other(p))``; ``other`` must end where ``self`` starts."""
        if other.dst_frame is not self.src_frame:
            raise FrameMismatch(
                f"cannot compose {other.src_frame.value}->{other.dst_frame.value} "
                f"with {self.src_frame.value}->{self.dst_frame.value}")
        return Homography(self.h @ other.h, other.src_frame, self.dst_frame)

    def jacobian(self, point) -> np.ndarray:
        """2x2 derivative of the map at a source point."""
        x, y = np.asarray(point, dtype=float)
        h = self.h
        w = h[2, 0] * x + h[2, 1] * y + h[2, 2]
        u = (h[0, 0] * x + h[0, 1] * y + h[0, 2]) / w
        v = (h[1, 0] * x + h[1, 1] * y + h[1, 2]) / w
        return np.array([
            [h[0, 0] - u * h[2, 0], h[0, 1] - u * h[2, 1]],
            [h[1, 0] - v * h[2, 0], h[1, 1] - v * h[2, 1]],
        ]) / w

    def expect(self, src: Frame, dst: Frame):
        if self.src_frame is not src or self.dst_frame is not dst:
            raise FrameMismatch(
                f"expected {src.value}->{dst.value} homography, "
                f"got {self.src_frame.value}->{self.dst_frame.value}")

    def pixel_area_map(self, shape) -> np.ndarray:
        return pixel_area_map(self, shape)

    def to_dict(self, name: str) -> dict:
        return {"name": name, "src_frame": self.src_frame.value,
                "dst_frame": self.dst_frame.value, "h": self.h.ravel().tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Homography":
        if len(d["h"]) != 9:
            raise ValueError("homography entry needs 9 numbers")
        return cls(d["h"], Frame(d["src_frame"]), Frame(d["dst_frame"]))


def _hartley(pts):
    centroid = pts.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(pts - centroid, axis=1))
    if mean_dist < 1e-15 * max(1.0, np.abs(centroid).max()):
        raise DegenerateConfiguration("points are coincident")
    s = np.sqrt(2.0) / mean_dist
    return np.array([[s, 0.0, -s * centroid[0]],
                     [0.0, s, -s * centroid[1]],
                     [0.0, 0.0, 1.0]])


def estimate_homography(src, dst, src_frame: Frame = Frame.SENSOR,
                        dst_frame: Frame = Frame.IMAGE) -> Homography:
    """Normalized DLT fit of ``dst ~ H src`` from N >= 4 point pairs."""
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    if src.shape != dst.shape:
        raise ValueError("src and dst must hold the same number of points")
    n = len(src)
    if n < 4:
        raise DegenerateConfiguration(f"need at least 4 correspondences, got {n}")
    t_src = _hartley(src)
    t_dst = _hartley(dst)
    a = (np.c_[src, np.ones(n)] @ t_src.T)
    b = (np.c_[dst, np.ones(n)] @ t_dst.T)
    x, y = a[:, 0], a[:, 1]
    u, v = b[:, 0], b[:, 1]
    zeros, ones = np.zeros(n), np.ones(n)
    rows_x = np.stack([x, y, ones, zeros, zeros, zeros, -u * x, -u * y, -u], axis=1)
    rows_y = np.stack([zeros, zeros, zeros, x, y, ones, -v * x, -v * y, -v], axis=1)
    A = np.empty((2 * n, 9))
    A[0::2] = rows_x
    A[1::2] = rows_y
    _, s, vt = np.linalg.svd(A)
    # a unique solution needs a one-dimensional null space
    if s[7] <= 1e-9 * s[0]:
        raise DegenerateConfiguration("correspondences are rank-deficient")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ hn @ t_src
    return Homography(h, src_frame, dst_frame)


def pixel_area(h: Homography, pixel) -> float:
    """Sensor-plane area (m^2) covered by one image pixel at ``(row, col)``."""
    h.expect(Frame.IMAGE, Frame.SENSOR)
    row, col = pixel
    m = h.h
    w = m[2, 0] * col + m[2, 1] * row + m[2, 2]
    if w <= 0:
        raise OutsidePlane(f"pixel {pixel} back-projects behind the sensor plane")
    return float(abs(np.linalg.det(m)) / w**3)


def pixel_area_map(h: Homography, shape) -> np.ndarray:
    """Per-pixel sensor-plane area for an image of ``shape`` (rows, cols)."""
    return _pixel_area_map(h.h.tobytes(), h.src_frame, h.dst_frame, tuple(shape)).copy()


@lru_cache(maxsize=16)
def _pixel_area_map(hbytes, src_frame, dst_frame, shape):
    h = Homography(np.frombuffer(hbytes).reshape(3, 3), src_frame, dst_frame)
    h.expect(Frame.IMAGE, Frame.SENSOR)
    m = h.h
    rr, cc = np.mgrid[0 : shape[0], 0 : shape[1]].astype(float)
    w = m[2, 0] * cc + m[2, 1] * rr + m[2, 2]
    if np.any(w <= 0):
        raise OutsidePlane("part of the image back-projects behind the sensor plane")
    out = abs(np.linalg.det(m)) / w**3
    out.setflags(write=False)
    return out


def _snap(idx):
    near = np.rint(idx)
    return np.where(np.abs(idx - near) < _SNAP, near, idx)


@lru_cache(maxsize=16)
def _sampling_matrix(hbytes, src_shape, src_frame, src_pitch, dst_shape, dst_frame, dst_pitch):
    """Sparse bilinear resampling operator from src pixels to dst pixels."""
    hinv = np.linalg.inv(np.frombuffer(hbytes).reshape(3, 3))
    dst_proto = PressureImage.zeros((1, 1), dst_frame, *dst_pitch)
    src_proto = PressureImage.zeros((1, 1), src_frame, *src_pitch)
    rr, cc = np.mgrid[0 : dst_shape[0], 0 : dst_shape[1]]
    x, y = dst_proto.index_to_frame(rr.ravel(), cc.ravel())
    w = hinv[2, 0] * x + hinv[2, 1] * y + hinv[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = (hinv[0, 0] * x + hinv[0, 1] * y + hinv[0, 2]) / w
        sy = (hinv[1, 0] * x + hinv[1, 1] * y + hinv[1, 2]) / w
    sr, sc = src_proto.frame_to_index(sx, sy)
    sr, sc = _snap(sr), _snap(sc)
    nr, nc = src_shape
    # outside the physical extent of the source grid reads as zero pressure
    valid = ((w > 0) & np.isfinite(sr) & np.isfinite(sc)
             & (sr >= -0.5) & (sr <= nr - 0.5) & (sc >= -0.5) & (sc <= nc - 0.5))
    dst_idx = np.nonzero(valid)[0]
    sr = np.clip(sr[valid], 0.0, nr - 1)
    sc = np.clip(sc[valid], 0.0, nc - 1)
    r0 = np.minimum(np.floor(sr).astype(np.int64), nr - 1)
    c0 = np.minimum(np.floor(sc).astype(np.int64), nc - 1)
    fr = sr - r0
    fc = sc - c0
    r1 = np.minimum(r0 + 1, nr - 1)
    c1 = np.minimum(c0 + 1, nc - 1)
    rows = np.concatenate([dst_idx] * 4)
    cols = np.concatenate([r0 * nc + c0, r0 * nc + c1, r1 * nc + c0, r1 * nc + c1])
    wts = np.concatenate([(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc])
    keep = wts != 0.0
    n_dst = dst_shape[0] * dst_shape[1]
    return sparse.csr_matrix((wts[keep], (rows[keep], cols[keep])), shape=(n_dst, nr * nc))


def warp_pressure(src: PressureImage, h: Homography, dst_shape, dst_pitch=None) -> PressureImage:
    """Resample a pressure image through ``h`` by inverse mapping.

    Pressure is intensive: values are interpolated bilinearly, never rescaled
    by area. Destination pixels whose preimage falls outside the source grid
    read 0 Pa. ``dst_pitch`` (meters) is required when the destination is the
    sensor plane.
    """
    if h.src_frame is not src.frame:
        raise FrameMismatch(
            f"homography starts in {h.src_frame.value} but image is in {src.frame.value}")
    dst_shape = (int(dst_shape[0]), int(dst_shape[1]))
    if h.dst_frame is Frame.SENSOR:
        if dst_pitch is None:
            raise ValueError("dst_pitch is required for sensor-plane output")
        dst_pitch = (float(dst_pitch[0]), float(dst_pitch[1]))
    else:
        dst_pitch = (None, None)
    if not src.data.any():
        return PressureImage.zeros(dst_shape, h.dst_frame, *dst_pitch, src.timestamp)
    op = _sampling_matrix(h.h.tobytes(), src.shape, src.frame, (src.pitch_x, src.pitch_y),
                          dst_shape, h.dst_frame, dst_pitch)
    out = (op @ src.data.ravel()).reshape(dst_shape)
    np.maximum(out, 0.0, out=out)
    return PressureImage(out, h.dst_frame, *dst_pitch, src.timestamp)


def taxel_grid_homography(spec: SensorSpec) -> Homography:
    """Sensor-to-image map that sends each taxel center to the same pixel index."""
    return Homography([[1.0 / spec.pitch_x, 0.0, -0.5],
                       [0.0, 1.0 / spec.pitch_y, -0.5],
                       [0.0, 0.0, 1.0]], Frame.SENSOR, Frame.IMAGE)


def synthetic_camera(spec: SensorSpec, dst_shape=(180, 300), margin: float = 0.04,
                     keystone: float = 0.08) -> Homography:
    """Sensor-to-image homography for a camera looking obliquely at the sensor.

    The sensor fills the image minus ``margin`` (fraction of each side); the
    far edge is narrowed by ``keystone`` to give mild perspective.
    """
    rows, cols = dst_shape
    mx, my = margin * (cols - 1), margin * (rows - 1)
    inset = keystone * (cols - 1 - 2 * mx) / 2
    src = [(0.0, 0.0), (spec.active_w, 0.0), (spec.active_w, spec.active_h), (0.0, spec.active_h)]
    dst = [(mx + inset, my), (cols - 1 - mx - inset, my),
           (cols - 1 - mx, rows - 1 - my), (mx, rows - 1 - my)]
    return estimate_homography(src, dst, Frame.SENSOR, Frame.IMAGE)


def load_calibration(path) -> dict[str, Homography]:
    payload = json.loads(Path(path).read_text())
    entries = payload["homographies"] if isinstance(payload, dict) else payload
    return {e["name"]: Homography.from_dict(e) for e in entries}


def save_calibration(path, homographies: dict[str, Homography]):
    entries = [h.to_dict(name) for name, h in homographies.items()]
    Path(path).write_text(json.dumps({"homographies": entries}, indent=2) + "\n")
