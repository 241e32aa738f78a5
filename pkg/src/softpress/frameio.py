"""Binary pressure frame files and JSON sequence manifests.

Frame layout (little-endian, 32-byte header then payload)::

    0   4s   magic "PRSF"
    4   u16  version (1)
    6   u16  rows
    8   u16  cols
    10  u8   frame tag (0 sensor plane, 1 image plane)
    11  5x   reserved, zero
    16  f32  pitch_x, meters (0 for image-plane frames)
    20  f32  pitch_y, meters
    24  f64  timestamp, seconds
    32  f32[rows * cols] pressure in Pa, row-major
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .pressure import Frame, PressureImage

MAGIC = b"PRSF"
VERSION = 1
HEADER = struct.Struct("<4sHHHB5xffd")
MANIFEST_VERSION = 1

assert HEADER.size == 32


def encode_frame(p: PressureImage) -> bytes:
    if p.rows > 0xFFFF or p.cols > 0xFFFF:
        raise ValueError("frame dimensions exceed u16")
    pitch_x = p.pitch_x if p.frame is Frame.SENSOR else 0.0
    pitch_y = p.pitch_y if p.frame is Frame.SENSOR else 0.0
    header = HEADER.pack(MAGIC, VERSION, p.rows, p.cols, p.frame.tag,
                         pitch_x, pitch_y, p.timestamp)
    return header + p.data.astype("<f4").tobytes()


def decode_frame(buf: bytes) -> PressureImage:
    if len(buf) < HEADER.size:
        raise ValueError("truncated pressure frame header")
    magic, version, rows, cols, tag, pitch_x, pitch_y, timestamp = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported frame version {version}")
    expected = HEADER.size + 4 * rows * cols
    if len(buf) != expected:
        raise ValueError(f"frame payload is {len(buf)} bytes, expected {expected}")
    data = np.frombuffer(buf, dtype="<f4", offset=HEADER.size).reshape(rows, cols)
    frame = Frame.from_tag(tag)
    if frame is Frame.SENSOR:
        return PressureImage(data, frame, pitch_x, pitch_y, timestamp)
    return PressureImage(data, frame, None, None, timestamp)


def write_frame(path, p: PressureImage):
    Path(path).write_bytes(encode_frame(p))


def read_frame(path) -> PressureImage:
    return decode_frame(Path(path).read_bytes())


class Manifest:
    """Ordered list of frame files with timestamps, stored as JSON.

    File paths inside the manifest are relative to the manifest's directory.
    """

    def __init__(self, entries, root="."):
        self.entries = sorted(((float(t), str(f)) for t, f in entries), key=lambda e: e[0])
        self.root = Path(root)
        self._cache = {}

    def __len__(self):
        return len(self.entries)

    @property
    def timestamps(self) -> list[float]:
        return [t for t, _ in self.entries]

    def frame(self, index: int) -> PressureImage:
        if index not in self._cache:
            self._cache[index] = read_frame(self.root / self.entries[index][1])
        return self._cache[index]

    def frames(self) -> list[PressureImage]:
        return [self.frame(i) for i in range(len(self))]

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        payload = json.loads(path.read_text())
        if payload.get("version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {payload.get('version')}")
        entries = [(e["timestamp"], e["file"]) for e in payload["frames"]]
        return cls(entries, path.parent)

    def save(self, path):
        path = Path(path)
        payload = {"version": MANIFEST_VERSION,
                   "frames": [{"file": f, "timestamp": t} for t, f in self.entries]}
        path.write_text(json.dumps(payload, indent=2) + "\n")


def write_sequence(directory, frames, prefix="frame") -> Manifest:
    """Write frames as numbered files plus ``manifest.json`` in ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, p in enumerate(frames):
        name = f"{prefix}_{i:05d}.prsf"
        write_frame(directory / name, p)
        entries.append((p.timestamp, name))
    manifest = Manifest(entries, directory)
    manifest.save(directory / "manifest.json")
    return manifest
