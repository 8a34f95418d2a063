"""Experiment orchestration: schedule, simulate, demodulate, recover, report.

The pipeline is split into three stages that communicate only through
files in the experiment's output directory, so running them separately
(CLI subcommands ``simulate``, ``recover``, ``report``) is byte-identical
to one ``run`` invocation, which simply chains the stage functions.

Artifacts written under ``config.out``:

    schedule.sched (+ .manifest)   pattern schedule container
    measurements.vol (+ .json)     raw binary-coded measurements + metadata
    recovered.vol                  recovered frames (float container)
    filtered.vol                   median-filtered frames (when enabled)
    frame_XXX.pgm                  16-bit graymaps of the final frames
    diagnostics.csv                per-iteration solver history
    recovery.json                  per-frame solver summary and block times
    report.csv                     metric records (stable schema)
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as mio
from .codes import build_schedule, demean, full_frame_patterns
from .config import ConfigError, ExperimentConfig
from .metrics import ExperimentRecord, ExperimentReport, under_sampling
from .optics import burst_rate, measurement_rate
from .recovery import (
    median3,
    noise_epsilon,
    recover_pinv,
    recover_tv2d,
    recover_tv2d_spc,
    recover_tv3d,
    tv_isotropic,
)
from .simulator import SceneVideo, group_frames, simulate_lisens, simulate_spc

__all__ = [
    "AcquisitionPlan",
    "resolve_plan",
    "stage_simulate",
    "stage_recover",
    "stage_report",
    "run_experiment",
    "write_design_outputs",
]

# demeaning maps y to 2*y - m with m interpolated from tracking samples;
# with a single tracking sample the demeaned noise deviation is sqrt(5) sigma
DEMEANED_NOISE_FACTOR = math.sqrt(5.0)


@dataclass(frozen=True)
class AcquisitionPlan:
    """Resolved capture geometry shared by all pipeline stages."""

    order: int
    count: int
    frames: int
    frame_duration: float
    pattern_rate: float
    meas_rate: float


def load_scene_for(config: ExperimentConfig) -> SceneVideo:
    try:
        return mio.load_scene(config.scene, frame_rate=config.scene_frame_rate)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load scene {config.scene}: {exc}") from exc


def resolve_plan(config: ExperimentConfig, scene: SceneVideo) -> AcquisitionPlan:
    """Derive pattern length, count and frame grouping from the config.

    The capture duration per recovered frame and the frame count are
    mutually derivable through the camera's rate model: burst timing when
    present, the ideal readout-limited rate otherwise.
    """
    if config.camera_model == "lisens":
        order = config.order or scene.cols
        if order != scene.cols:
            raise ConfigError(
                f"schedule.order {order} does not match the scene width {scene.cols}"
            )
        if config.camera.pixels != scene.rows:
            raise ConfigError(
                f"camera has {config.camera.pixels} pixels but the scene has "
                f"{scene.rows} rows; a line-sensor pixel maps to one scene row"
            )
    else:
        order = config.order or scene.rows * scene.cols
        if order != scene.rows * scene.cols:
            raise ConfigError(
                f"schedule.order {order} does not match the scene size "
                f"{scene.rows}x{scene.cols}"
            )
    if order < 1 or order & (order - 1):
        raise ConfigError(f"pattern length must be a power of two, got {order}")

    if config.camera.has_burst_timing:
        fps, meas = burst_rate(config.camera)
    else:
        meas = measurement_rate(config.camera)
        fps = meas / config.camera.pixels

    tau = config.frame_duration
    q = config.frames
    if tau is None:
        tau = scene.duration / q
    if q is None:
        q = 1 if scene.n_frames == 1 else max(1, round(scene.duration / tau))

    count = round(q * tau * fps)
    if count < q:
        raise ConfigError(
            f"capture of {q} x {tau} s yields only {count} patterns at "
            f"{fps:.1f} patterns/s; not enough for {q} frames"
        )
    if config.track_period is None:
        raise ConfigError(
            "demodulation needs mean-tracking slots; set schedule.track_period"
        )
    return AcquisitionPlan(
        order=order, count=count, frames=q, frame_duration=tau,
        pattern_rate=fps, meas_rate=meas,
    )


def _paths(out: Path) -> dict[str, Path]:
    return {
        "schedule": out / "schedule.sched",
        "measurements": out / "measurements.vol",
        "recovered": out / "recovered.vol",
        "filtered": out / "filtered.vol",
        "diagnostics": out / "diagnostics.csv",
        "summary": out / "recovery.json",
        "report": out / "report.csv",
    }


def stage_simulate(config: ExperimentConfig) -> Path:
    """Build the schedule, acquire measurements, write both to disk."""
    scene = load_scene_for(config)
    plan = resolve_plan(config, scene)
    paths = _paths(config.out)
    config.out.mkdir(parents=True, exist_ok=True)

    schedule = build_schedule(
        plan.order, plan.count, seed=config.schedule_seed,
        mean_track_period=config.track_period,
    )
    mio.save_schedule(paths["schedule"], schedule)

    if config.camera_model == "lisens":
        mset = simulate_lisens(
            scene, schedule, noise_sigma=config.noise_sigma,
            seed=config.seed, timing=config.camera,
        )
    else:
        patterns = full_frame_patterns(schedule, (scene.rows, scene.cols))
        mset = simulate_spc(
            scene, patterns, noise_sigma=config.noise_sigma,
            seed=config.seed, timing=config.camera, schedule_ref=schedule.ref,
        )
    mio.save_measurements(paths["measurements"], mset, seed=config.seed)
    return paths["measurements"]


def _frame_summary(k, iterations, residual, tv, converged, feasible):
    return {
        "frame": k,
        "iterations": int(iterations),
        "residual": float(residual),
        "tv": float(tv),
        "converged": bool(converged),
        "feasible": bool(feasible),
    }


def stage_recover(config: ExperimentConfig) -> Path:
    """Demodulate, group and invert the on-disk measurements."""
    scene = load_scene_for(config)
    plan = resolve_plan(config, scene)
    paths = _paths(config.out)
    schedule = mio.load_schedule(paths["schedule"])
    mset, meta = mio.load_measurements(paths["measurements"])

    demeaned = demean(mset, schedule)
    blocks = group_frames(demeaned, schedule, plan.frames)
    sigma = float(meta["noise_sigma"])
    frame_shape = (scene.rows, scene.cols)

    def data_entries():
        return sum(b.Y[:, ~b.is_track].size for b in blocks)

    method = config.method
    frames = None
    summaries = []
    history = []
    if method in ("auto", "pinv"):
        try:
            rec = []
            for k, blk in enumerate(blocks):
                y_k, phi_k = blk.without_tracking()
                if config.camera_model == "spc":
                    x = recover_pinv(y_k, phi_k).reshape(frame_shape)
                    residual = float(np.linalg.norm(
                        np.tensordot(phi_k.T.reshape(-1, *frame_shape), x,
                                     axes=([1, 2], [0, 1])) - y_k.ravel()
                    ))
                else:
                    x = recover_pinv(y_k, phi_k)
                    residual = float(np.linalg.norm(x @ phi_k - y_k))
                rec.append(x)
                summaries.append(_frame_summary(k, 0, residual, tv_isotropic(x), True, True))
            frames = np.stack(rec)
            method = "pinv"
        except ValueError as exc:
            if config.method == "pinv":
                raise ConfigError(f"pseudoinverse recovery impossible: {exc}") from exc
            method = "tv"
            summaries = []

    if frames is None:
        eps = config.epsilon
        if eps is None:
            eps = noise_epsilon(DEMEANED_NOISE_FACTOR * sigma, data_entries()) if sigma > 0 else 0.0
        params = dataclasses.replace(config.recovery, epsilon=eps)
        if plan.frames == 1:
            y_k, phi_k = blocks[0].without_tracking()
            if config.camera_model == "spc":
                res = recover_tv2d_spc(y_k, phi_k.T.reshape(-1, *frame_shape), params)
            else:
                res = recover_tv2d(y_k, phi_k, params)
            frames = res.image[None]
            summaries.append(_frame_summary(
                0, res.iterations, res.residual, res.tv, res.converged, res.feasible
            ))
            history = [(0, *row) for row in res.history]
        else:
            res = recover_tv3d(
                blocks, params, model=config.camera_model,
                frame_shape=frame_shape if config.camera_model == "spc" else None,
                include_tracking=config.include_tracking,
            )
            frames = res.frames
            for k in range(plan.frames):
                summaries.append(_frame_summary(
                    k, res.iterations, res.block_residuals[k], res.frame_tv[k],
                    res.converged, res.feasible,
                ))
            history = [("all", *row) for row in res.history]
        method = "tv"

    mio.save_volume(paths["recovered"], frames)
    final = frames
    if config.median_filter:
        final = median3(frames)
        mio.save_volume(paths["filtered"], final)
    for k, frame in enumerate(final):
        mio.write_pgm(config.out / f"frame_{k:03d}.pgm", frame, bit_depth=16)

    with open(paths["diagnostics"], "w") as fh:
        fh.write("block,iteration,residual,tv\n")
        for block, iteration, residual, tv in history:
            fh.write(f"{block},{iteration},{residual!r},{tv!r}\n")

    block_times = [
        [float(b.timestamps[0]), float(b.timestamps[-1])] for b in blocks
    ]
    block_measurements = [
        int(b.Y.size if config.camera_model == "lisens" else b.Y.shape[1])
        for b in blocks
    ]
    summary = {
        "method": method,
        "camera": config.camera_model,
        "noise_sigma": sigma,
        "epsilon": None if method == "pinv" else params.epsilon,
        "median_filter": bool(config.median_filter),
        "final_volume": paths["filtered"].name if config.median_filter else paths["recovered"].name,
        "frame_duration": plan.frame_duration,
        "block_times": block_times,
        "block_measurements": block_measurements,
        "frames": summaries,
    }
    with open(paths["summary"], "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return paths["recovered"]


def stage_report(config: ExperimentConfig) -> ExperimentReport:
    """Compute metric records for the recovered frames and write the CSV."""
    scene = load_scene_for(config)
    paths = _paths(config.out)
    with open(paths["summary"]) as fh:
        summary = json.load(fh)
    final = mio.load_volume(config.out / summary["final_volume"])

    report = ExperimentReport()
    scene_id = Path(config.scene).stem
    for info in summary["frames"]:
        k = info["frame"]
        t0, t1 = summary["block_times"][k]
        if config.reference == "scene":
            ref = scene.frames[scene.frame_index_at(0.5 * (t0 + t1))]
            from .metrics import rsnr as _rsnr
            value = _rsnr(ref, final[k])
        else:
            value = float("nan")
        ratio = under_sampling(scene.rows, scene.cols, summary["block_measurements"][k])
        report.add(ExperimentRecord(
            scene_id=scene_id,
            camera=summary["camera"],
            frame=k,
            duration_s=summary["frame_duration"],
            under_sampling=ratio,
            rsnr_db=value,
            reference=config.reference,
            iterations=info["iterations"],
            residual=info["residual"],
            tv=info["tv"],
            converged=info["converged"],
            feasible=info["feasible"],
        ))
    report.write_csv(paths["report"])
    return report


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Full deterministic pipeline; equivalent to the three stages in order."""
    stage_simulate(config)
    stage_recover(config)
    return stage_report(config)


def write_design_outputs(values: dict, out: Path) -> Path:
    """Rate-curve CSV and design report for a camera configuration.

    ``values`` is a flat config dict with camera.* keys and optional
    optics.* keys (relay_focal, relay_diameter, sensor_height, dmd_width,
    sensor_width) for the lens-placement section of the report.
    """
    from .config import _as_float, _as_int  # shared parsing helpers
    from .optics import (
        CameraConfig,
        design_cylindrical,
        min_pixels,
        rate_curve,
        relay_magnification,
    )

    camera = CameraConfig(
        pixels=_as_int(values, "camera.pixels", default=1),
        dmd_rate=_as_float(values, "camera.dmd_rate", required=True),
        adc_rate=_as_float(values, "camera.adc_rate", required=True),
        dmd_cols=_as_int(values, "camera.dmd_cols", default=1024),
        dmd_rows=_as_int(values, "camera.dmd_rows", default=768),
        burst_frames=_as_int(values, "camera.burst_frames"),
        frame_period=_as_float(values, "camera.frame_period"),
        cooldown=_as_float(values, "camera.cooldown"),
    )
    out.mkdir(parents=True, exist_ok=True)

    knee = min_pixels(camera)
    max_pixels = _as_int(values, "design.max_pixels", default=100 * knee)
    points = _as_int(values, "design.points", default=200)
    grid = np.unique(np.concatenate([
        np.logspace(0, np.log10(max_pixels), points).astype(np.int64),
        [knee],
    ]))
    curve = rate_curve(camera, grid)
    curve_path = out / "rate_curve.csv"
    with open(curve_path, "w") as fh:
        fh.write("pixels,measurements_per_s\n")
        for pixels, rate in curve:
            fh.write(f"{int(pixels)},{float(rate)!r}\n")

    lines = [
        "camera design report",
        "====================",
        f"dmd rate:            {camera.dmd_rate!r} Hz",
        f"adc rate:            {camera.adc_rate!r} /s",
        f"min pixels for peak: {knee}",
        f"peak rate:           {camera.adc_rate!r} meas/s",
    ]
    if camera.has_burst_timing:
        fps, meas = burst_rate(camera)
        lines += [
            f"burst frame rate:    {fps!r} frames/s",
            f"burst meas rate:     {meas!r} meas/s (at {camera.pixels} pixels)",
        ]
    relay_focal = _as_float(values, "optics.relay_focal")
    relay_diameter = _as_float(values, "optics.relay_diameter")
    sensor_height = _as_float(values, "optics.sensor_height")
    if None not in (relay_focal, relay_diameter, sensor_height):
        cyl = design_cylindrical(relay_focal, relay_diameter, sensor_height)
        lines += [
            f"cylindrical focal:   {cyl.focal_exact!r} (exact), {cyl.focal_approx!r} (approx)",
            f"cylindrical placing: {cyl.to_sensor!r} to sensor, {cyl.to_relay!r} to relay",
        ]
        dmd_width = _as_float(values, "optics.dmd_width")
        sensor_width = _as_float(values, "optics.sensor_width")
        if None not in (dmd_width, sensor_width):
            lines.append(
                f"relay magnification: {relay_magnification(dmd_width, sensor_width)!r}"
            )
    (out / "design_report.txt").write_text("\n".join(lines) + "\n")
    return curve_path
