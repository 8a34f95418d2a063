"""Quantitative evaluation of acquisition runs.

Two figures of merit characterize an operating point: the under-sampling
ratio (image dimensionality over measurement count) and the
reconstruction SNR in dB relative to a reference image.  The reference is
either the pristine scene (available in simulation) or, as on real
hardware, the Nyquist-rate reconstruction; each report record states
which one was used.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

__all__ = [
    "under_sampling",
    "rsnr",
    "ExperimentRecord",
    "ExperimentReport",
    "REPORT_COLUMNS",
]


def under_sampling(n1: int, n2: int, m: int) -> float:
    """Ratio of image dimensionality ``n1 * n2`` to measurement count ``m``."""
    if n1 < 1 or n2 < 1 or m < 1:
        raise ValueError("dimensions and measurement count must be positive")
    return (n1 * n2) / m


def rsnr(x_ref: np.ndarray, x_hat: np.ndarray) -> float:
    """Reconstruction SNR in dB: ``-20 log10(||ref - hat|| / ||ref||)``.

    Exact reconstruction returns ``inf``; an all-zero reference is an
    error because the ratio is undefined.
    """
    ref = np.asarray(x_ref, dtype=float)
    hat = np.asarray(x_hat, dtype=float)
    if ref.shape != hat.shape:
        raise ValueError(f"shape mismatch: reference {ref.shape}, estimate {hat.shape}")
    ref_norm = float(np.linalg.norm(ref.ravel()))
    if ref_norm == 0.0:
        raise ValueError("reference signal is identically zero")
    err_norm = float(np.linalg.norm((ref - hat).ravel()))
    if err_norm == 0.0:
        return math.inf
    return -20.0 * math.log10(err_norm / ref_norm)


REPORT_COLUMNS = [
    "scene_id",
    "camera",
    "frame",
    "duration_s",
    "under_sampling",
    "rsnr_db",
    "reference",
    "iterations",
    "residual",
    "tv",
    "converged",
    "feasible",
]


@dataclass
class ExperimentRecord:
    """One recovered frame's metrics row (column order is frozen for diffs)."""

    scene_id: str
    camera: str
    frame: int
    duration_s: float
    under_sampling: float
    rsnr_db: float
    reference: str
    iterations: int
    residual: float
    tv: float
    converged: bool
    feasible: bool

    def as_row(self) -> list[str]:
        row = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                row.append("true" if v else "false")
            elif isinstance(v, float):
                row.append("inf" if math.isinf(v) else repr(v))
            else:
                row.append(str(v))
        return row


class ExperimentReport:
    """Accumulates per-frame records and writes the stable-schema CSV."""

    def __init__(self, records: list[ExperimentRecord] | None = None):
        self.records: list[ExperimentRecord] = list(records or [])

    def add(self, record: ExperimentRecord) -> None:
        self.records.append(record)

    @property
    def all_ok(self) -> bool:
        return all(r.converged and r.feasible for r in self.records)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            for rec in self.records:
                writer.writerow(rec.as_row())

    @classmethod
    def read_csv(cls, path: str | Path) -> "ExperimentReport":
        report = cls()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != REPORT_COLUMNS:
                raise ValueError(f"unexpected report columns: {reader.fieldnames}")
            for row in reader:
                report.add(ExperimentRecord(
                    scene_id=row["scene_id"],
                    camera=row["camera"],
                    frame=int(row["frame"]),
                    duration_s=float(row["duration_s"]),
                    under_sampling=float(row["under_sampling"]),
                    rsnr_db=float(row["rsnr_db"]),
                    reference=row["reference"],
                    iterations=int(row["iterations"]),
                    residual=float(row["residual"]),
                    tv=float(row["tv"]),
                    converged=row["converged"] == "true",
                    feasible=row["feasible"] == "true",
                ))
        return report
