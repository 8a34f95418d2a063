"""Binary measurement-pattern schedules for DMD-based multiplexing cameras.

A camera of this family displays, at each time slot, a rank-one binary
pattern on the DMD: every column of the mirror array shows the same
length-N code vector, so a line sensor whose pixels integrate DMD rows
measures one coded linear combination of the scene columns per slot.

The code vectors are rows of a column-permuted Hadamard matrix.  Mirrors
are on/off devices, so the +/-1 Hadamard entries are displayed after
mapping -1 -> 0.  To undo that mapping in post-processing, an all-ones
pattern is inserted periodically; its measurement tracks the scene's mean
intensity and lets the +/-1 measurements be recovered through

    X @ c01 = (X @ 1 + X @ s) / 2        for c01 = (1 + s) / 2,

i.e. ``y_signed = 2 * y_binary - y_allones``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import struct
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .simulator import MeasurementSet

__all__ = [
    "PatternSchedule",
    "hadamard",
    "build_schedule",
    "demean",
    "full_frame_patterns",
]

MAX_SEED = 2**64 - 1  # seeds are stored as u64 in the schedule container


def hadamard(order: int) -> np.ndarray:
    """Sylvester Hadamard matrix of a power-of-two order.

    Returns an ``order x order`` integer matrix H with entries in {-1, +1},
    all-ones first row and column, and ``H @ H.T == order * I``.
    """
    if order < 1 or order & (order - 1):
        raise ValueError(f"Hadamard order must be a positive power of two, got {order}")
    h = np.ones((1, 1), dtype=np.int64)
    while h.shape[0] < order:
        h = np.block([[h, h], [h, -h]])
    return h


@dataclass(frozen=True)
class PatternSchedule:
    """Time-ordered DMD column codes with mean-tracking bookkeeping.

    Attributes
    ----------
    patterns : (count, order) uint8 array
        0/1 code vectors; row t is displayed at slot t.
    signed_source : (count, order) int8 array
        The +/-1 values behind each pattern (all +1 at tracking slots,
        consistent with the all-ones binary pattern).
    mean_track_indices : frozenset of int
        Slots displaying the all-ones mean-tracking pattern.
    permutation : (order,) int array
        Column permutation applied to the base Hadamard matrix.
    seed : int
        Seed that generated the permutation.
    mean_track_period : int or None
        Tracking cadence (slots t == 0 mod period); None when disabled.
    """

    patterns: np.ndarray
    signed_source: np.ndarray
    mean_track_indices: frozenset
    permutation: np.ndarray
    seed: int
    mean_track_period: int | None = None

    def __post_init__(self):
        patterns = np.ascontiguousarray(self.patterns, dtype=np.uint8)
        signed = np.ascontiguousarray(self.signed_source, dtype=np.int8)
        perm = np.ascontiguousarray(self.permutation, dtype=np.int64)
        object.__setattr__(self, "patterns", patterns)
        object.__setattr__(self, "signed_source", signed)
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "mean_track_indices", frozenset(int(i) for i in self.mean_track_indices))

        if patterns.ndim != 2 or patterns.shape != signed.shape:
            raise ValueError("patterns and signed_source must be 2D arrays of identical shape")
        count, order = patterns.shape
        if order < 1 or order & (order - 1):
            raise ValueError(f"pattern length must be a power of two, got {order}")
        if not set(np.unique(patterns)) <= {0, 1}:
            raise ValueError("patterns must be binary")
        if not set(np.unique(signed)) <= {-1, 1}:
            raise ValueError("signed_source entries must be -1 or +1")
        if (patterns != (signed + 1) // 2).any():
            raise ValueError("patterns must equal the 0/1 mapping of signed_source")
        bad = [t for t in self.mean_track_indices if not 0 <= t < count]
        if bad:
            raise ValueError(f"mean-track indices out of range: {bad}")
        track = sorted(self.mean_track_indices)
        if track and not patterns[track].all():
            raise ValueError("mean-tracking patterns must be all-ones")
        if not np.array_equal(np.sort(perm), np.arange(order)):
            raise ValueError("permutation must be a bijection on {0,...,order-1}")
        if not 0 <= self.seed <= MAX_SEED:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")

        # schedules are immutable once constructed
        for arr in (patterns, signed, perm):
            arr.setflags(write=False)

    @property
    def count(self) -> int:
        return self.patterns.shape[0]

    @property
    def order(self) -> int:
        return self.patterns.shape[1]

    @property
    def track_mask(self) -> np.ndarray:
        """Boolean mask over slots, True at mean-tracking slots."""
        mask = np.zeros(self.count, dtype=bool)
        if self.mean_track_indices:
            mask[sorted(self.mean_track_indices)] = True
        return mask

    @property
    def ref(self) -> str:
        """Stable content hash used to bind measurement sets to this schedule."""
        h = hashlib.sha256()
        h.update(b"MUXSCHD1")
        period = self.mean_track_period or 0
        h.update(struct.pack("<IIQI", self.order, self.count, self.seed, period))
        h.update(self.permutation.astype("<u4").tobytes())
        h.update(np.packbits(self.patterns, axis=1).tobytes())
        return h.hexdigest()[:16]


def build_schedule(
    order: int,
    count: int,
    seed: int,
    mean_track_period: int | None = None,
) -> PatternSchedule:
    """Build a schedule of column-permuted Hadamard rows in 0/1 form.

    Non-tracking slots cycle through the rows of ``hadamard(order)`` with a
    uniformly random column permutation drawn from ``seed``, repeating
    cyclically once all rows are used.  When ``mean_track_period`` is set,
    slots ``t == 0 (mod period)`` carry the all-ones pattern instead and the
    Hadamard rows are displaced to later slots (not overwritten), so every
    scheduled row still appears.

    Deterministic: identical arguments yield identical schedules.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if mean_track_period is not None and mean_track_period < 2:
        raise ValueError(f"mean_track_period must be >= 2 (or None), got {mean_track_period}")
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    h = hadamard(order)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(order)
    h_perm = h[:, perm]

    track = np.zeros(count, dtype=bool)
    if mean_track_period is not None:
        track[::mean_track_period] = True

    signed = np.ones((count, order), dtype=np.int8)
    n_data = count - int(track.sum())
    rows = np.arange(n_data) % order
    signed[~track] = h_perm[rows].astype(np.int8)
    patterns = ((signed + 1) // 2).astype(np.uint8)

    return PatternSchedule(
        patterns=patterns,
        signed_source=signed,
        mean_track_indices=frozenset(np.flatnonzero(track).tolist()),
        permutation=perm,
        seed=seed,
        mean_track_period=mean_track_period,
    )


def demean(
    measurements: "MeasurementSet",
    schedule: PatternSchedule,
    mean: float | np.ndarray | None = None,
) -> "MeasurementSet":
    """Convert 0/1-coded measurements to their +/-1-coded equivalents.

    The all-ones measurement ``m_t = X_t @ 1`` is estimated at every slot by
    piecewise-linear interpolation (in time) between the mean-tracking
    samples, held constant before the first and after the last one; then
    every column is mapped through ``y_signed = 2 * y - m_t``.  At tracking
    slots the interpolant passes through the sample, so those columns are
    returned unchanged (the all-ones code is its own +/-1 image).

    ``mean`` supplies a fallback when the schedule carries no tracking slot:
    a scalar, a per-sensor-row vector, or a full (rows, count) array.
    """
    y = measurements.Y
    if y.shape[1] != schedule.count:
        raise ValueError(
            f"measurement window ({y.shape[1]} columns) does not match "
            f"schedule length ({schedule.count})"
        )
    if measurements.schedule_ref and measurements.schedule_ref != schedule.ref:
        raise ValueError(
            f"measurements are bound to schedule {measurements.schedule_ref!r}, "
            f"not {schedule.ref!r}"
        )

    if mean is None:
        track = sorted(schedule.mean_track_indices)
        if not track:
            raise ValueError("schedule has no mean-tracking slots and no fallback mean was given")
        t_all = measurements.timestamps
        t_track = t_all[track]
        m = np.empty_like(y, dtype=float)
        for i in range(y.shape[0]):
            m[i] = np.interp(t_all, t_track, y[i, track])
    else:
        m = np.asarray(mean, dtype=float)
        if m.ndim == 0:
            m = np.full_like(y, float(m), dtype=float)
        elif m.ndim == 1:
            if m.shape[0] != y.shape[0]:
                raise ValueError(f"per-row mean has length {m.shape[0]}, expected {y.shape[0]}")
            m = np.repeat(m[:, None], y.shape[1], axis=1)
        elif m.shape != y.shape:
            raise ValueError(f"mean array shape {m.shape} does not match measurements {y.shape}")

    return dataclasses.replace(measurements, Y=2.0 * y - m)


def full_frame_patterns(
    schedule: PatternSchedule,
    shape: tuple[int, int],
    signed: bool = False,
) -> np.ndarray:
    """Reshape each length-N code vector into a full 2D DMD pattern.

    Used for single-pixel acquisition, where the DMD shows arbitrary 2D
    patterns instead of rank-one column codes.  ``shape`` is (rows, cols)
    with ``rows * cols == schedule.order``; vectors are unpacked row-major.
    """
    rows, cols = shape
    if rows * cols != schedule.order:
        raise ValueError(f"shape {shape} is incompatible with pattern length {schedule.order}")
    source = schedule.signed_source if signed else schedule.patterns
    return source.reshape(schedule.count, rows, cols)
