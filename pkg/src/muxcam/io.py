"""File formats for scenes, measurements, schedules and diagnostics.

Volume container (``.vol``), used for scenes, measurement matrices and
recovered frame stacks::

    bytes 0..7    magic  b"MUXVOL1\\0"
    bytes 8..19   rows, cols, frame count  (3 x uint32, little endian)
    bytes 20..    float32 samples, little endian, frame-major then
                  row-major within a frame

Measurement sidecar: ``<volume path>.json`` holding acquisition metadata
(timestamps, noise sigma, simulation seed, schedule reference).

Schedule container (``.sched``)::

    bytes 0..7    magic  b"MUXSCHD1"
    bytes 8..11   format version (uint32, = 1)
    bytes 12..23  order, count  (2 x uint32)
    bytes 24..31  permutation seed (uint64)
    bytes 32..35  mean-track period (uint32, 0 = disabled)
    then          permutation, order x uint32
    then          count rows of ceil(order / 8) bytes, each a pattern
                  packed MSB-first (numpy packbits convention)

A schedule is saved together with a human-readable ``<path>.manifest``
key/value text file.  All integers are little endian.

Portable graymaps are binary ``P5`` at 8 or 16 bits (16-bit samples are
big endian per the format); intensities map linearly to [0, 1].
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .codes import PatternSchedule
from .simulator import MeasurementSet, SceneVideo

__all__ = [
    "save_volume",
    "load_volume",
    "save_measurements",
    "load_measurements",
    "save_schedule",
    "load_schedule",
    "write_pgm",
    "read_pgm",
    "load_scene",
    "save_scene",
    "write_diagnostics_csv",
]

VOLUME_MAGIC = b"MUXVOL1\x00"
SCHEDULE_MAGIC = b"MUXSCHD1"
SCHEDULE_VERSION = 1


# --------------------------------------------------------------------------
# raw float volume container
# --------------------------------------------------------------------------

def save_volume(path: str | Path, frames: np.ndarray) -> None:
    """Write a (frames, rows, cols) array as a float32 volume container."""
    v = np.asarray(frames, dtype=np.float32)
    if v.ndim == 2:
        v = v[None]
    if v.ndim != 3:
        raise ValueError(f"expected a 2D or 3D array, got shape {frames.shape}")
    with open(path, "wb") as fh:
        fh.write(VOLUME_MAGIC)
        fh.write(struct.pack("<III", v.shape[1], v.shape[2], v.shape[0]))
        fh.write(np.ascontiguousarray(v, dtype="<f4").tobytes())


def load_volume(path: str | Path) -> np.ndarray:
    """Read a volume container back as a (frames, rows, cols) float array."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != VOLUME_MAGIC:
            raise ValueError(f"{path}: not a volume container (magic {magic!r})")
        rows, cols, count = struct.unpack("<III", fh.read(12))
        data = fh.read(4 * rows * cols * count)
    if len(data) != 4 * rows * cols * count:
        raise ValueError(f"{path}: truncated volume data")
    return np.frombuffer(data, dtype="<f4").reshape(count, rows, cols).astype(float)


# --------------------------------------------------------------------------
# measurements with metadata sidecar
# --------------------------------------------------------------------------

def save_measurements(path: str | Path, mset: MeasurementSet, seed: int = 0) -> None:
    """Write measurements as a one-frame volume plus a JSON sidecar."""
    path = Path(path)
    save_volume(path, mset.Y[None])
    meta = {
        "timestamps": [float(t) for t in mset.timestamps],
        "noise_sigma": float(mset.noise_sigma),
        "seed": int(seed),
        "schedule_ref": mset.schedule_ref,
    }
    with open(path.with_name(path.name + ".json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_measurements(path: str | Path) -> tuple[MeasurementSet, dict]:
    """Read measurements and their sidecar; returns (set, metadata dict)."""
    path = Path(path)
    stack = load_volume(path)
    if stack.shape[0] != 1:
        raise ValueError(f"{path}: measurement container must hold exactly one frame")
    with open(path.with_name(path.name + ".json")) as fh:
        meta = json.load(fh)
    mset = MeasurementSet(
        Y=stack[0],
        timestamps=np.asarray(meta["timestamps"], dtype=float),
        noise_sigma=float(meta["noise_sigma"]),
        schedule_ref=meta.get("schedule_ref", ""),
    )
    return mset, meta


# --------------------------------------------------------------------------
# pattern schedules
# --------------------------------------------------------------------------

def save_schedule(path: str | Path, schedule: PatternSchedule) -> None:
    """Write the binary schedule container and its textual manifest."""
    path = Path(path)
    period = schedule.mean_track_period or 0
    with open(path, "wb") as fh:
        fh.write(SCHEDULE_MAGIC)
        fh.write(struct.pack("<IIIQI", SCHEDULE_VERSION, schedule.order, schedule.count,
                             schedule.seed, period))
        fh.write(schedule.permutation.astype("<u4").tobytes())
        fh.write(np.packbits(schedule.patterns, axis=1).tobytes())
    manifest = path.with_name(path.name + ".manifest")
    with open(manifest, "w") as fh:
        fh.write(f"order = {schedule.order}\n")
        fh.write(f"count = {schedule.count}\n")
        fh.write(f"seed = {schedule.seed}\n")
        fh.write(f"mean_track_period = {period}\n")
        fh.write(f"ref = {schedule.ref}\n")


def load_schedule(path: str | Path) -> PatternSchedule:
    """Read a schedule container written by :func:`save_schedule`."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != SCHEDULE_MAGIC:
            raise ValueError(f"{path}: not a schedule container (magic {magic!r})")
        version, order, count, seed, period = struct.unpack("<IIIQI", fh.read(24))
        if version != SCHEDULE_VERSION:
            raise ValueError(f"{path}: unsupported schedule version {version}")
        perm = np.frombuffer(fh.read(4 * order), dtype="<u4").astype(np.int64)
        row_bytes = (order + 7) // 8
        packed = np.frombuffer(fh.read(row_bytes * count), dtype=np.uint8)
    if packed.size != row_bytes * count:
        raise ValueError(f"{path}: truncated schedule data")
    patterns = np.unpackbits(packed.reshape(count, row_bytes), axis=1)[:, :order]
    track = frozenset(range(0, count, period)) if period else frozenset()
    signed = (2 * patterns.astype(np.int16) - 1).astype(np.int8)
    return PatternSchedule(
        patterns=patterns,
        signed_source=signed,
        mean_track_indices=track,
        permutation=perm,
        seed=seed,
        mean_track_period=period or None,
    )


# --------------------------------------------------------------------------
# portable graymaps
# --------------------------------------------------------------------------

def write_pgm(path: str | Path, image: np.ndarray, bit_depth: int = 16) -> None:
    """Write a [0, 1] image as a binary P5 graymap (values are clipped)."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {img.shape}")
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    maxval = (1 << bit_depth) - 1
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    data = q.astype(">u2" if bit_depth == 16 else np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode())
        fh.write(data.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary P5 graymap into a float image in [0, 1]."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(b"P5"):
        raise ValueError(f"{path}: only binary (P5) graymaps are supported")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(raw) and not raw[end:end + 1].isspace():
            end += 1
        fields.append(int(raw[pos:end]))
        pos = end
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if maxval < 1 or maxval > 65535:
        raise ValueError(f"{path}: invalid maxval {maxval}")
    dtype = ">u2" if maxval > 255 else np.uint8
    count = width * height
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    return data.reshape(height, width).astype(float) / maxval


# --------------------------------------------------------------------------
# scene loading
# --------------------------------------------------------------------------

def load_scene(source: str | Path | list, frame_rate: float = 1.0) -> SceneVideo:
    """Load a scene from a volume container, a graymap, or a graymap list.

    A directory is read as the sorted set of ``*.pgm`` files it contains.
    The frame rate is not stored in either format and must be supplied.
    """
    if isinstance(source, (list, tuple)):
        frames = np.stack([read_pgm(p) for p in source])
        return SceneVideo(frames=frames, frame_rate=frame_rate)
    source = Path(source)
    if source.is_dir():
        paths = sorted(source.glob("*.pgm"))
        if not paths:
            raise ValueError(f"{source}: no .pgm files found")
        return load_scene(paths, frame_rate)
    if source.suffix == ".pgm":
        return SceneVideo(frames=read_pgm(source)[None], frame_rate=frame_rate)
    return SceneVideo(frames=load_volume(source), frame_rate=frame_rate)


def save_scene(path: str | Path, scene: SceneVideo) -> None:
    """Write a scene's frames as a volume container."""
    save_volume(path, scene.frames)


# --------------------------------------------------------------------------
# solver diagnostics
# --------------------------------------------------------------------------

def write_diagnostics_csv(path: str | Path, history: list, block: int | str = 0) -> None:
    """Write per-iteration (residual, TV) solver history as CSV."""
    with open(path, "w") as fh:
        fh.write("block,iteration,residual,tv\n")
        for iteration, residual, tv in history:
            fh.write(f"{block},{iteration},{residual!r},{tv!r}\n")
