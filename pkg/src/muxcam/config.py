"""Experiment configuration: flat key-value files with include-able presets.

Format: one ``key = value`` pair per line, ``#`` starts a comment, blank
lines ignored.  Two directives splice other content in place, later
assignments overriding earlier ones:

    include = other.cfg        relative to the including file
    preset = prototype-lisens  camera preset (built-in, or a .cfg file of
                               camera.* keys in $MUXCAM_PRESET_DIR)

Recognized keys (defaults in parentheses):

    scene                      scene path: .vol container, .pgm, or directory
    scene.frame_rate           ground-truth frame rate, Hz (1.0)
    camera                     lisens | spc
    camera.pixels, camera.dmd_rate, camera.adc_rate,
    camera.dmd_cols, camera.dmd_rows,
    camera.burst_frames, camera.frame_period, camera.cooldown
    schedule.order             pattern length (scene-derived when absent)
    schedule.seed              column permutation seed (0)
    schedule.track_period      all-ones cadence, 0 disables (100)
    capture.frame_duration     seconds of capture per recovered frame
    capture.frames             recovered frame count Q
    noise.sigma                measurement noise deviation (0.0)
    seed                       simulation seed (0)
    out                        output directory
    recovery.method            auto | pinv | tv (auto)
    recovery.epsilon           auto | non-negative number (auto)
    recovery.max_iterations    (2000)
    recovery.tolerance         (1e-6)
    recovery.spatial_weight, recovery.temporal_weight   (1.0, 1.0)
    recovery.include_tracking  on | off (off)
    recovery.median_filter     on | off (off)
    metrics.reference          scene | none (scene)
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .optics import CameraConfig
from .recovery import RecoveryParams

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PRESETS",
    "PRESET_DIR_ENV",
    "parse_config_file",
    "build_experiment_config",
    "load_experiment_config",
]

PRESET_DIR_ENV = "MUXCAM_PRESET_DIR"

# Lab-prototype presets: a 1024-pixel line sensor behind a 1024x768 DMD at
# 20 kHz with buffered readout (100 frames of 500 us, then a 60 ms pause),
# and the single-photodetector build on the same DMD.
PRESETS: dict[str, dict[str, str]] = {
    "prototype-lisens": {
        "camera.pixels": "1024",
        "camera.dmd_rate": "20e3",
        "camera.adc_rate": "2.048e6",
        "camera.dmd_cols": "1024",
        "camera.dmd_rows": "768",
        "camera.burst_frames": "100",
        "camera.frame_period": "500e-6",
        "camera.cooldown": "60e-3",
    },
    "prototype-spc": {
        "camera.pixels": "1",
        "camera.dmd_rate": "20e3",
        "camera.adc_rate": "1e6",
        "camera.dmd_cols": "1024",
        "camera.dmd_rows": "768",
    },
}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def _parse_lines(text: str, origin: Path | None) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            where = f"{origin}:{lineno}" if origin else f"line {lineno}"
            raise ConfigError(f"{where}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "include":
            base = origin.parent if origin else Path(".")
            values.update(parse_config_file(base / value))
        elif key == "preset":
            values.update(resolve_preset(value))
            values["preset"] = value
        else:
            values[key] = value
    return values


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Parse a config file (with includes and presets) into a flat dict."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return _parse_lines(text, path)


def resolve_preset(name: str) -> dict[str, str]:
    """Camera keys of a named preset (built-in or from the preset directory)."""
    preset_dir = os.environ.get(PRESET_DIR_ENV)
    if preset_dir:
        candidate = Path(preset_dir) / f"{name}.cfg"
        if candidate.is_file():
            return parse_config_file(candidate)
    if name in PRESETS:
        return dict(PRESETS[name])
    known = ", ".join(sorted(PRESETS))
    raise ConfigError(f"unknown preset {name!r} (built-in presets: {known})")


def _get(values: dict, key: str, default=None, required: bool = False):
    if key in values:
        return values[key]
    if required:
        raise ConfigError(f"missing required config key {key!r}")
    return default


def _as_float(values: dict, key: str, default=None, required: bool = False):
    raw = _get(values, key, default=None, required=required)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r} must be a number, got {raw!r}") from exc


def _as_int(values: dict, key: str, default=None, required: bool = False):
    raw = _get(values, key, default=None, required=required)
    if raw is None:
        return default
    try:
        return int(float(raw))
    except ValueError as exc:
        raise ConfigError(f"config key {key!r} must be an integer, got {raw!r}") from exc


def _as_flag(values: dict, key: str, default: bool) -> bool:
    raw = _get(values, key)
    if raw is None:
        return default
    lowered = str(raw).strip().lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"config key {key!r} must be on/off, got {raw!r}")


@dataclass
class ExperimentConfig:
    """Fully resolved experiment settings (see module docstring for keys)."""

    scene: Path
    scene_frame_rate: float
    camera_model: str
    camera: CameraConfig
    order: int | None
    schedule_seed: int
    track_period: int | None
    frame_duration: float | None
    frames: int | None
    noise_sigma: float
    seed: int
    out: Path
    method: str = "auto"
    epsilon: float | None = None  # None: noise-matched default
    recovery: RecoveryParams = field(default_factory=RecoveryParams)
    include_tracking: bool = False
    median_filter: bool = False
    reference: str = "scene"
    preset: str = ""


def build_experiment_config(values: dict[str, str]) -> ExperimentConfig:
    """Validate a flat key dict and resolve it into an ExperimentConfig."""
    unknown_model_msg = "config key 'camera' must be lisens or spc"
    camera_model = _get(values, "camera", required=True).strip().lower()
    if camera_model not in ("lisens", "spc"):
        raise ConfigError(unknown_model_msg + f", got {values['camera']!r}")

    try:
        camera = CameraConfig(
            pixels=_as_int(values, "camera.pixels", required=True),
            dmd_rate=_as_float(values, "camera.dmd_rate", required=True),
            adc_rate=_as_float(values, "camera.adc_rate", required=True),
            dmd_cols=_as_int(values, "camera.dmd_cols", required=True),
            dmd_rows=_as_int(values, "camera.dmd_rows", required=True),
            burst_frames=_as_int(values, "camera.burst_frames"),
            frame_period=_as_float(values, "camera.frame_period"),
            cooldown=_as_float(values, "camera.cooldown"),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid camera configuration: {exc}") from exc

    frame_duration = _as_float(values, "capture.frame_duration")
    frames = _as_int(values, "capture.frames")
    if frame_duration is None and frames is None:
        raise ConfigError("set capture.frame_duration and/or capture.frames")
    if frame_duration is not None and frame_duration <= 0:
        raise ConfigError(f"capture.frame_duration must be positive, got {frame_duration}")
    if frames is not None and frames < 1:
        raise ConfigError(f"capture.frames must be >= 1, got {frames}")

    noise_sigma = _as_float(values, "noise.sigma", default=0.0)
    if noise_sigma < 0:
        raise ConfigError(f"noise.sigma must be non-negative, got {noise_sigma}")

    track_period = _as_int(values, "schedule.track_period", default=100)
    if track_period == 0:
        track_period = None

    method = _get(values, "recovery.method", default="auto").strip().lower()
    if method not in ("auto", "pinv", "tv"):
        raise ConfigError(f"recovery.method must be auto, pinv or tv, got {method!r}")

    eps_raw = _get(values, "recovery.epsilon", default="auto")
    if str(eps_raw).strip().lower() == "auto":
        epsilon = None
    else:
        epsilon = _as_float({"recovery.epsilon": eps_raw}, "recovery.epsilon")
        if epsilon < 0:
            raise ConfigError(f"recovery.epsilon must be non-negative, got {epsilon}")

    try:
        recovery = RecoveryParams(
            epsilon=0.0 if epsilon is None else epsilon,
            max_iterations=_as_int(values, "recovery.max_iterations", default=2000),
            tolerance=_as_float(values, "recovery.tolerance", default=1e-6),
            tv_weights=(
                _as_float(values, "recovery.spatial_weight", default=1.0),
                _as_float(values, "recovery.temporal_weight", default=1.0),
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid recovery parameters: {exc}") from exc

    reference = _get(values, "metrics.reference", default="scene").strip().lower()
    if reference not in ("scene", "none"):
        raise ConfigError(f"metrics.reference must be scene or none, got {reference!r}")

    return ExperimentConfig(
        scene=Path(_get(values, "scene", required=True)),
        scene_frame_rate=_as_float(values, "scene.frame_rate", default=1.0),
        camera_model=camera_model,
        camera=camera,
        order=_as_int(values, "schedule.order"),
        schedule_seed=_as_int(values, "schedule.seed", default=0),
        track_period=track_period,
        frame_duration=frame_duration,
        frames=frames,
        noise_sigma=noise_sigma,
        seed=_as_int(values, "seed", default=0),
        out=Path(_get(values, "out", required=True)),
        method=method,
        epsilon=epsilon,
        recovery=recovery,
        include_tracking=_as_flag(values, "recovery.include_tracking", default=False),
        median_filter=_as_flag(values, "recovery.median_filter", default=False),
        reference=reference,
        preset=_get(values, "preset", default=""),
    )


def load_experiment_config(
    path: str | Path,
    seed: int | None = None,
    out: str | Path | None = None,
    preset: str | None = None,
) -> ExperimentConfig:
    """Parse and resolve a config file, applying command-line overrides."""
    values = parse_config_file(path)
    if preset is not None:
        values.update(resolve_preset(preset))
        values["preset"] = preset
    if seed is not None:
        values["seed"] = str(seed)
    if out is not None:
        values["out"] = str(out)
    return build_experiment_config(values)
