"""Rate formulas, burst timing and first-order lens placement."""

import dataclasses

import numpy as np
import pytest

from muxcam import (
    CameraConfig,
    OpticalDesign,
    burst_rate,
    design_cylindrical,
    measurement_rate,
    min_pixels,
    rate_curve,
    relay_magnification,
)


def smc(pixels=1000, dmd_rate=1e4, adc_rate=1e7, **kwargs):
    return CameraConfig(
        pixels=pixels, dmd_rate=dmd_rate, adc_rate=adc_rate,
        dmd_cols=1024, dmd_rows=768, **kwargs
    )


PROTO_BURST = dict(burst_frames=100, frame_period=500e-6, cooldown=60e-3)


class TestMeasurementRate:
    def test_case_study_multi_pixel(self):
        # 10^3 pixels, 10 kHz DMD, 10 MHz ADC: readout-limited at 10^7/s
        assert measurement_rate(smc(pixels=1000)) == 1e7

    def test_case_study_single_pixel(self):
        assert measurement_rate(smc(pixels=1)) == 1e4

    def test_saturates_at_adc_rate(self):
        assert measurement_rate(smc(pixels=10**9)) == pytest.approx(1e7)

    def test_shape_of_rate_curve(self):
        # non-decreasing up to the knee, constant beyond it
        config = smc()
        knee = min_pixels(config)
        grid = np.unique(np.concatenate([
            np.logspace(0, np.log10(knee), 25).astype(int),
            knee * np.array([1, 2, 5, 10, 100]),
        ]))
        curve = rate_curve(config, grid)
        rates = curve[:, 1]
        below = curve[:, 0] <= knee
        assert (np.diff(rates[below]) >= -1e-9).all()
        at_or_above = curve[:, 0] >= knee
        assert np.allclose(rates[at_or_above], config.adc_rate)


class TestMinPixels:
    def test_case_study(self):
        assert min_pixels(smc()) == 1000

    def test_equal_rates(self):
        assert min_pixels(smc(dmd_rate=1e6, adc_rate=1e6)) == 1

    def test_rate_plateau(self):
        config = smc()
        f = min_pixels(config)
        at_knee = measurement_rate(dataclasses.replace(config, pixels=f))
        beyond = measurement_rate(dataclasses.replace(config, pixels=10 * f))
        assert at_knee == beyond

    def test_ceiling(self):
        assert min_pixels(smc(dmd_rate=3.0, adc_rate=10.0)) == 4


class TestBurstRate:
    def test_prototype_timing(self):
        # 100 frames at 500 us then 60 ms pause: 100 / 0.110 s
        config = smc(pixels=1024, dmd_rate=2e4, adc_rate=2.048e6, **PROTO_BURST)
        fps, meas = burst_rate(config)
        assert fps == pytest.approx(100 / 0.110)
        assert meas == pytest.approx(1024 * 100 / 0.110)

    def test_zero_cooldown(self):
        config = smc(burst_frames=10, frame_period=1e-3, cooldown=0.0)
        fps, _ = burst_rate(config)
        assert fps == pytest.approx(1000.0)

    def test_requires_timing_fields(self):
        with pytest.raises(ValueError, match="burst timing"):
            burst_rate(smc())


class TestCylindricalDesign:
    def test_prototype_approximation(self):
        d = design_cylindrical(50.0, 25.0, 1.0)
        assert d.focal_approx == pytest.approx(4.0, abs=0)

    def test_prototype_exact_value(self):
        # 2 * 50 * (1/26) * (25/26)
        d = design_cylindrical(50.0, 25.0, 1.0)
        assert d.focal_exact == pytest.approx(2500.0 / 676.0, rel=1e-12)

    def test_symmetric_case(self):
        d = design_cylindrical(80.0, 10.0, 10.0)
        assert d.to_sensor == pytest.approx(80.0)
        assert d.to_relay == pytest.approx(80.0)
        assert d.focal_exact == pytest.approx(40.0)

    @pytest.mark.parametrize("f_r, d_r, h", [(50, 25, 1), (100, 50, 2), (30, 12, 6), (75, 25, 25)])
    def test_placement_constraints(self, f_r, d_r, h):
        d = design_cylindrical(f_r, d_r, h)
        assert d.to_sensor + d.to_relay == pytest.approx(2 * f_r, rel=1e-9)
        assert 1 / d.to_sensor + 1 / d.to_relay == pytest.approx(1 / d.focal_exact, rel=1e-9)
        assert d.to_sensor / d.to_relay == pytest.approx(h / d_r, rel=1e-9)

    def test_first_order_error_bound(self):
        # |exact - approx| / approx <= r * (2 + r) with r = h / d
        rng = np.random.default_rng(0)
        for _ in range(200):
            f_r = rng.uniform(10, 200)
            d_r = rng.uniform(5, 100)
            h = rng.uniform(0.1, d_r)
            d = design_cylindrical(f_r, d_r, h)
            r = h / d_r
            assert abs(d.focal_exact - d.focal_approx) / d.focal_approx <= r * (2 + r) + 1e-12

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            design_cylindrical(50.0, 0.0, 1.0)


class TestRelayMagnification:
    def test_unit_relay(self):
        assert relay_magnification(14.0, 14.0) == 1.0

    def test_ratio(self):
        assert relay_magnification(2.0, 1.0) == 0.5

    def test_reciprocity(self):
        assert relay_magnification(3.7, 1.9) * relay_magnification(1.9, 3.7) == pytest.approx(1.0)


class TestOpticalDesign:
    def test_from_relay_satisfies_constraints(self):
        d = OpticalDesign.from_relay(
            dmd_width=14.1, dmd_height=10.6, sensor_width=14.3, sensor_height=1.0,
            relay_focal=50.0, relay_diameter=25.0,
        )
        assert d.cyl_to_sensor + d.cyl_to_relay == pytest.approx(100.0, rel=1e-12)

    def test_rejects_inconsistent_placement(self):
        with pytest.raises(ValueError, match="constraint"):
            OpticalDesign(
                dmd_width=14.1, dmd_height=10.6, sensor_width=14.3, sensor_height=1.0,
                relay_focal=50.0, relay_diameter=25.0,
                cyl_focal=12.7, cyl_to_sensor=3.8, cyl_to_relay=96.2,
            )


class TestCameraConfigValidation:
    def test_rejects_zero_pixels(self):
        with pytest.raises(ValueError):
            smc(pixels=0)

    def test_rejects_partial_burst_group(self):
        with pytest.raises(ValueError, match="together"):
            CameraConfig(pixels=8, dmd_rate=1.0, adc_rate=1.0, dmd_cols=8, dmd_rows=8,
                         burst_frames=10)

    def test_rejects_negative_cooldown(self):
        with pytest.raises(ValueError):
            smc(burst_frames=10, frame_period=1e-3, cooldown=-1.0)
