"""Forward acquisition model for line-sensor and single-pixel cameras.

At slot t the DMD shows a binary pattern while the scene frame active at
that instant (zero-order hold of the ground-truth video) is focused on it.
A line sensor integrates each DMD row, so a rank-one column code ``phi``
yields the coded line integrals ``y_t = X_t @ phi_t``; a single photo-
detector integrates the whole DMD, yielding the scalar ``<X_t, P_t>``.
Both models add i.i.d. zero-mean Gaussian noise (signal-independent, the
regime in which Hadamard multiplexing is the right code choice).

Acquisition timestamps follow the sensor's burst structure when a
:class:`~muxcam.optics.CameraConfig` with burst timing is supplied:
``burst_frames`` exposures spaced ``frame_period`` apart, then a
``cooldown`` pause, repeating.  Without burst timing the pattern cadence
is the readout-limited frame rate ``min(dmd_rate, adc_rate / pixels)``;
with no configuration at all the schedule is spread uniformly over the
scene's duration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codes import PatternSchedule
from .optics import CameraConfig

__all__ = [
    "SceneVideo",
    "MeasurementSet",
    "MeasurementBlock",
    "measurement_times",
    "simulate_lisens",
    "simulate_spc",
    "group_frames",
]


@dataclass
class SceneVideo:
    """Ground-truth image sequence, the signal being sensed.

    ``frames`` is (n_frames, rows, cols) with normalized radiance in
    [0, 1]; a single 2D array is promoted to a one-frame video.  ``rows``
    is the line-sensor axis, ``cols`` the multiplexed axis.
    """

    frames: np.ndarray
    frame_rate: float = 1.0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        if frames.ndim == 2:
            frames = frames[None]
        if frames.ndim != 3 or frames.shape[0] < 1:
            raise ValueError("frames must be a non-empty (n_frames, rows, cols) stack")
        if not np.isfinite(frames).all():
            raise ValueError("scene intensities must be finite")
        if frames.min() < 0.0 or frames.max() > 1.0:
            raise ValueError("scene intensities must lie in [0, 1]")
        if self.frame_rate <= 0:
            raise ValueError(f"frame_rate must be positive, got {self.frame_rate}")
        self.frames = frames

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def rows(self) -> int:
        return self.frames.shape[1]

    @property
    def cols(self) -> int:
        return self.frames.shape[2]

    @property
    def duration(self) -> float:
        return self.n_frames / self.frame_rate

    def frame_index_at(self, t: np.ndarray) -> np.ndarray:
        """Zero-order-hold frame index for acquisition times ``t`` (seconds)."""
        idx = np.floor(np.asarray(t, dtype=float) * self.frame_rate).astype(int)
        return np.clip(idx, 0, self.n_frames - 1)


@dataclass
class MeasurementSet:
    """Sensor outputs with their acquisition metadata.

    ``Y`` stacks one measurement vector per column (shape (sensor_rows, T);
    a single-pixel camera has one row).  ``schedule_ref`` binds the set to
    the schedule that produced it.
    """

    Y: np.ndarray
    timestamps: np.ndarray
    noise_sigma: float = 0.0
    schedule_ref: str = ""

    def __post_init__(self):
        y = np.asarray(self.Y, dtype=float)
        t = np.asarray(self.timestamps, dtype=float)
        if y.ndim != 2:
            raise ValueError("Y must be 2D (sensor_rows, measurements)")
        if t.ndim != 1 or t.shape[0] != y.shape[1]:
            raise ValueError("timestamps must be 1D with one entry per measurement column")
        if t.size > 1 and not (np.diff(t) > 0).all():
            raise ValueError("timestamps must be strictly increasing")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        self.Y = y
        self.timestamps = t

    @property
    def count(self) -> int:
        return self.Y.shape[1]


def measurement_times(
    count: int,
    timing: CameraConfig | None = None,
    span: float | None = None,
) -> np.ndarray:
    """Acquisition timestamps for ``count`` consecutive patterns.

    With burst timing, slot k of burst b starts at
    ``b * (burst_frames * frame_period + cooldown) + k * frame_period``.
    Without it, slots tick at the readout-limited frame rate, or are spread
    uniformly over ``span`` seconds when no configuration is given.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if timing is not None and timing.has_burst_timing:
        k = np.arange(count)
        burst = k // timing.burst_frames
        within = k % timing.burst_frames
        cycle = timing.burst_frames * timing.frame_period + timing.cooldown
        return burst * cycle + within * timing.frame_period
    if timing is not None:
        fps = min(timing.dmd_rate, timing.adc_rate / timing.pixels)
        return np.arange(count) / fps
    if span is None or span <= 0:
        raise ValueError("a positive span is required when no camera timing is given")
    return np.arange(count) * (span / count)


def _hold_frames(scene: SceneVideo, times: np.ndarray) -> np.ndarray:
    return scene.frame_index_at(times)


def simulate_lisens(
    scene: SceneVideo,
    schedule: PatternSchedule,
    noise_sigma: float = 0.0,
    seed: int = 0,
    timing: CameraConfig | None = None,
) -> MeasurementSet:
    """Line-sensor acquisition: ``y_t = X_t @ phi_t + e_t``.

    Each column code integrates the scene rows it selects; the frame
    ``X_t`` is the ground-truth frame active at the slot's timestamp.
    Output is deterministic given ``seed``.
    """
    if schedule.order != scene.cols:
        raise ValueError(
            f"pattern length {schedule.order} does not match scene columns {scene.cols}"
        )
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be non-negative, got {noise_sigma}")
    times = measurement_times(schedule.count, timing, span=scene.duration)
    frame_idx = _hold_frames(scene, times)
    codes = schedule.patterns.astype(float)

    y = np.empty((scene.rows, schedule.count))
    for fi in np.unique(frame_idx):
        sel = frame_idx == fi
        y[:, sel] = scene.frames[fi] @ codes[sel].T
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, noise_sigma, size=y.shape)
    return MeasurementSet(Y=y, timestamps=times, noise_sigma=noise_sigma, schedule_ref=schedule.ref)


def simulate_spc(
    scene: SceneVideo,
    patterns: np.ndarray,
    noise_sigma: float = 0.0,
    seed: int = 0,
    timing: CameraConfig | None = None,
    schedule_ref: str = "",
) -> MeasurementSet:
    """Single-pixel acquisition: one scalar ``<X_t, P_t> + e_t`` per pattern.

    ``patterns`` is a (count, rows, cols) stack of full 2D binary DMD
    patterns (see :func:`muxcam.codes.full_frame_patterns`); noise and
    timing semantics match :func:`simulate_lisens`.
    """
    p = np.asarray(patterns)
    if p.ndim != 3 or p.shape[0] < 1:
        raise ValueError("patterns must be a non-empty (count, rows, cols) stack")
    if p.shape[1:] != (scene.rows, scene.cols):
        raise ValueError(
            f"pattern shape {p.shape[1:]} does not match scene frames "
            f"({scene.rows}, {scene.cols})"
        )
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be non-negative, got {noise_sigma}")
    times = measurement_times(p.shape[0], timing, span=scene.duration)
    frame_idx = _hold_frames(scene, times)
    pf = p.astype(float)

    y = np.empty(p.shape[0])
    for fi in np.unique(frame_idx):
        sel = frame_idx == fi
        y[sel] = np.tensordot(pf[sel], scene.frames[fi], axes=([1, 2], [0, 1]))
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, noise_sigma, size=y.shape)
    return MeasurementSet(
        Y=y[None, :], timestamps=times, noise_sigma=noise_sigma, schedule_ref=schedule_ref
    )


@dataclass
class MeasurementBlock:
    """A contiguous run of measurements paired with its pattern columns.

    ``patterns`` and ``signed`` hold the codes as columns ((order, size)
    matrices); ``is_track`` flags mean-tracking columns so recovery can
    exclude or use them.
    """

    Y: np.ndarray
    timestamps: np.ndarray
    patterns: np.ndarray
    signed: np.ndarray
    is_track: np.ndarray
    start: int
    stop: int

    @property
    def size(self) -> int:
        return self.Y.shape[1]

    def without_tracking(self) -> tuple[np.ndarray, np.ndarray]:
        """(measurements, signed pattern columns) with tracking slots dropped."""
        keep = ~self.is_track
        return self.Y[:, keep], self.signed[:, keep]


def group_frames(
    measurements: MeasurementSet,
    schedule: PatternSchedule,
    q: int,
) -> list[MeasurementBlock]:
    """Partition T measurement columns into Q contiguous recovery blocks.

    Block sizes are ``ceil(T/Q)`` for the first ``T mod Q`` blocks and
    ``floor(T/Q)`` after, so earlier blocks absorb the remainder.  Each
    block k backs one recovered video frame.
    """
    t_total = measurements.count
    if not 1 <= q <= t_total:
        raise ValueError(f"q must be in [1, {t_total}], got {q}")
    if t_total != schedule.count:
        raise ValueError(
            f"measurement window ({t_total} columns) does not match "
            f"schedule length ({schedule.count})"
        )
    if measurements.schedule_ref and measurements.schedule_ref != schedule.ref:
        raise ValueError(
            f"measurements are bound to schedule {measurements.schedule_ref!r}, "
            f"not {schedule.ref!r}"
        )
    base, rem = divmod(t_total, q)
    track = schedule.track_mask
    blocks = []
    start = 0
    for k in range(q):
        stop = start + base + (1 if k < rem else 0)
        blocks.append(
            MeasurementBlock(
                Y=measurements.Y[:, start:stop],
                timestamps=measurements.timestamps[start:stop],
                patterns=schedule.patterns[start:stop].T,
                signed=schedule.signed_source[start:stop].T.astype(np.int8),
                is_track=track[start:stop],
                start=start,
                stop=stop,
            )
        )
        start = stop
    return blocks
