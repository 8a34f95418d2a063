"""Camera design-space analysis and first-order optical layout.

A multiplexing camera acquires one coded frame per DMD pattern, so its
measurement rate is capped twice: the DMD cannot switch patterns faster
than its mirror rate, and the sensor cannot read F pixels faster than its
ADC allows.  The achievable rate is

    pixels * min(dmd_rate, adc_rate / pixels)   measurements per second,

flat in ``pixels`` beyond ``adc_rate / dmd_rate``.  The smallest sensor
that reaches the plateau is therefore the cheapest design with full-frame
throughput, which is the architectural argument for a line sensor.

The layout helpers cover the relay + cylindrical-lens train that images
the DMD onto a 1D sensor: the relay magnifies DMD width to sensor width,
and the cylindrical lens re-images the relay aperture onto the sensor
height so each sensor pixel integrates a full DMD column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CameraConfig",
    "CylindricalDesign",
    "OpticalDesign",
    "measurement_rate",
    "min_pixels",
    "burst_rate",
    "design_cylindrical",
    "relay_magnification",
    "rate_curve",
]


@dataclass(frozen=True)
class CameraConfig:
    """Sensor/DMD resolutions and rates of one camera configuration.

    ``burst_frames``, ``frame_period`` and ``cooldown`` describe buffered
    readout (a burst of frames followed by a transfer pause) and are
    optional as a group.
    """

    pixels: int
    dmd_rate: float
    adc_rate: float
    dmd_cols: int
    dmd_rows: int
    burst_frames: int | None = None
    frame_period: float | None = None
    cooldown: float | None = None

    def __post_init__(self):
        if self.pixels < 1:
            raise ValueError(f"pixels must be >= 1, got {self.pixels}")
        if self.dmd_rate <= 0 or self.adc_rate <= 0:
            raise ValueError("dmd_rate and adc_rate must be positive")
        if self.dmd_cols < 1 or self.dmd_rows < 1:
            raise ValueError("DMD resolution must be positive")
        timing = (self.burst_frames, self.frame_period, self.cooldown)
        if any(v is not None for v in timing):
            if any(v is None for v in timing):
                raise ValueError("burst_frames, frame_period and cooldown must be set together")
            if self.burst_frames < 1:
                raise ValueError(f"burst_frames must be >= 1, got {self.burst_frames}")
            if self.frame_period <= 0:
                raise ValueError(f"frame_period must be positive, got {self.frame_period}")
            if self.cooldown < 0:
                raise ValueError(f"cooldown must be non-negative, got {self.cooldown}")

    @property
    def has_burst_timing(self) -> bool:
        return self.burst_frames is not None


def measurement_rate(config: CameraConfig) -> float:
    """Measurements per second: ``pixels * min(dmd_rate, adc_rate / pixels)``."""
    return config.pixels * min(config.dmd_rate, config.adc_rate / config.pixels)


def min_pixels(config: CameraConfig) -> int:
    """Smallest sensor pixel count that attains the peak measurement rate.

    The plateau starts at ``adc_rate / dmd_rate``; pixels are discrete, so
    the ceiling of the ratio is returned.
    """
    return math.ceil(config.adc_rate / config.dmd_rate)


def burst_rate(config: CameraConfig) -> tuple[float, float]:
    """Sustained (frames/s, measurements/s) under buffered burst readout.

    A burst of ``burst_frames`` exposures at ``frame_period`` each is
    followed by a ``cooldown`` pause, so the sustained frame rate is
    ``burst_frames / (burst_frames * frame_period + cooldown)``.
    """
    if not config.has_burst_timing:
        raise ValueError("burst timing fields are not set on this configuration")
    cycle = config.burst_frames * config.frame_period + config.cooldown
    fps = config.burst_frames / cycle
    return fps, config.pixels * fps


def relay_magnification(dmd_width: float, sensor_width: float) -> float:
    """Relay magnification mapping DMD width onto sensor width."""
    if dmd_width <= 0 or sensor_width <= 0:
        raise ValueError("widths must be positive")
    return sensor_width / dmd_width


@dataclass(frozen=True)
class CylindricalDesign:
    """Cylindrical-lens choice and placement for a given relay.

    ``focal_exact`` solves the three placement constraints exactly;
    ``focal_approx`` is the thin-aperture shortcut ``2 f_r h / d``, accurate
    when the sensor height is much smaller than the relay diameter.
    Distances are measured from the cylindrical lens.
    """

    focal_exact: float
    focal_approx: float
    to_sensor: float
    to_relay: float


def design_cylindrical(
    relay_focal: float,
    relay_diameter: float,
    sensor_height: float,
) -> CylindricalDesign:
    """Place a cylindrical lens so the relay aperture images onto the sensor.

    The lens sits between relay and sensor subject to three constraints:
    the distances sum to the relay's image distance (``u + v = 2 f_r``), the
    thin-lens equation holds (``1/u + 1/v = 1/f_c``), and the aperture is
    magnified onto the sensor height (``u / v = h / d``).  All lengths share
    one unit (mm in the demos).
    """
    if relay_focal <= 0 or relay_diameter <= 0 or sensor_height <= 0:
        raise ValueError("all lengths must be positive")
    total = relay_diameter + sensor_height
    to_sensor = 2.0 * relay_focal * sensor_height / total
    to_relay = 2.0 * relay_focal * relay_diameter / total
    focal_exact = 2.0 * relay_focal * (sensor_height / total) * (relay_diameter / total)
    focal_approx = 2.0 * relay_focal * sensor_height / relay_diameter
    return CylindricalDesign(
        focal_exact=focal_exact,
        focal_approx=focal_approx,
        to_sensor=to_sensor,
        to_relay=to_relay,
    )


@dataclass(frozen=True)
class OpticalDesign:
    """Physical layout of the DMD-to-line-sensor optical train.

    Construction validates the three cylindrical-lens placement constraints
    to 1e-9 relative, so instances always describe a consistent layout;
    use :meth:`from_relay` to derive the consistent placement from the
    relay parameters alone.
    """

    dmd_width: float
    dmd_height: float
    sensor_width: float
    sensor_height: float
    relay_focal: float
    relay_diameter: float
    cyl_focal: float
    cyl_to_sensor: float
    cyl_to_relay: float

    _RTOL = 1e-9

    def __post_init__(self):
        lengths = (
            self.dmd_width, self.dmd_height, self.sensor_width, self.sensor_height,
            self.relay_focal, self.relay_diameter, self.cyl_focal,
            self.cyl_to_sensor, self.cyl_to_relay,
        )
        if any(v <= 0 for v in lengths):
            raise ValueError("all lengths must be strictly positive")
        u, v = self.cyl_to_sensor, self.cyl_to_relay
        checks = {
            "u + v = 2 f_r": (u + v, 2.0 * self.relay_focal),
            "1/u + 1/v = 1/f_c": (1.0 / u + 1.0 / v, 1.0 / self.cyl_focal),
            "u / v = h_sensor / d_relay": (u / v, self.sensor_height / self.relay_diameter),
        }
        for name, (lhs, rhs) in checks.items():
            if abs(lhs - rhs) > self._RTOL * abs(rhs):
                raise ValueError(f"placement constraint violated ({name}): {lhs} != {rhs}")

    @classmethod
    def from_relay(
        cls,
        dmd_width: float,
        dmd_height: float,
        sensor_width: float,
        sensor_height: float,
        relay_focal: float,
        relay_diameter: float,
    ) -> "OpticalDesign":
        cyl = design_cylindrical(relay_focal, relay_diameter, sensor_height)
        return cls(
            dmd_width=dmd_width,
            dmd_height=dmd_height,
            sensor_width=sensor_width,
            sensor_height=sensor_height,
            relay_focal=relay_focal,
            relay_diameter=relay_diameter,
            cyl_focal=cyl.focal_exact,
            cyl_to_sensor=cyl.to_sensor,
            cyl_to_relay=cyl.to_relay,
        )

    @property
    def relay_mag(self) -> float:
        return relay_magnification(self.dmd_width, self.sensor_width)


def rate_curve(config: CameraConfig, pixel_counts: np.ndarray) -> np.ndarray:
    """Measurement rate over a sweep of sensor pixel counts.

    Returns an array of (pixels, measurements/s) rows for plotting the
    rate-vs-resolution tradeoff of a fixed DMD/ADC pair.
    """
    counts = np.asarray(pixel_counts, dtype=float)
    if counts.ndim != 1 or counts.size == 0 or (counts < 1).any():
        raise ValueError("pixel_counts must be a non-empty 1D array of counts >= 1")
    rates = counts * np.minimum(config.dmd_rate, config.adc_rate / counts)
    return np.column_stack([counts, rates])
