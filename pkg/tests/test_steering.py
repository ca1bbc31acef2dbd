import math

import numpy as np
import pytest

from bsmkit.core import (
    ArrayGeometry,
    Direction,
    FrequencyAxis,
    PLANE_WAVE,
    glasses_array,
    ring_grid,
)
from bsmkit.steering import (
    SourceInsideArray,
    gen_free_field_hrtf,
    gen_plane_wave_steering,
    gen_point_source_steering,
    validate_steering,
)

AXIS = FrequencyAxis(sample_rate=48000, fft_size=64)
ORIGIN_MIC = ArrayGeometry(positions=np.zeros((1, 3)))


def test_green_function_magnitude_at_one_meter():
    V = gen_point_source_steering(ORIGIN_MIC, ring_grid(6), 1.0, AXIS)
    np.testing.assert_allclose(np.abs(V.data), 1.0 / (4.0 * math.pi))
    assert V.source_distance == 1.0


def test_mirror_symmetric_mics_see_identical_entries():
    # source on +x; mics mirrored across the xz-plane are equidistant
    geom = ArrayGeometry(positions=np.array([[0.0, 0.05, 0.01],
                                             [0.0, -0.05, 0.01]]))
    grid = ring_grid(1)   # single direction at phi = 0
    V = gen_point_source_steering(geom, grid, 0.7, AXIS)
    np.testing.assert_allclose(V.data[:, 0, :], V.data[:, 1, :], rtol=1e-12)


def test_zero_frequency_entry_real_positive():
    V = gen_point_source_steering(glasses_array(), ring_grid(8), 0.5, AXIS)
    dc = V.data[0]
    np.testing.assert_allclose(dc.imag, 0.0, atol=1e-15)
    assert np.all(dc.real > 0)


def test_phase_matches_propagation_delay():
    mic = np.array([[0.02, -0.01, 0.03]])
    geom = ArrayGeometry(positions=mic)
    grid = ring_grid(5)
    r_s = 0.9
    V = gen_point_source_steering(geom, grid, r_s, AXIS)
    src = r_s * grid.unit_vectors
    d = np.linalg.norm(src - mic[0], axis=1)
    for fi, f in enumerate(AXIS.frequencies):
        expected = np.exp(-1j * 2 * math.pi * f * d / AXIS.c_sound)
        np.testing.assert_allclose(V.data[fi, 0] * 4 * math.pi * d, expected,
                                   atol=1e-12)


def test_reciprocal_distance_decay():
    near = gen_point_source_steering(ORIGIN_MIC, ring_grid(4), 0.15, AXIS)
    far = gen_point_source_steering(ORIGIN_MIC, ring_grid(4), 0.45, AXIS)
    np.testing.assert_allclose(np.abs(near.data) / np.abs(far.data), 3.0,
                               rtol=1e-12)


def test_source_inside_array_rejected():
    geom = ArrayGeometry(positions=np.array([[0.2, 0.0, 0.0]]))
    with pytest.raises(SourceInsideArray):
        gen_point_source_steering(geom, ring_grid(4), 0.1, AXIS)
    with pytest.raises(ValueError):
        gen_point_source_steering(geom, ring_grid(4), -1.0, AXIS)


class TestPlaneWave:
    def test_origin_mic_is_unity(self):
        V = gen_plane_wave_steering(ORIGIN_MIC, ring_grid(6), AXIS)
        np.testing.assert_allclose(V.data, 1.0)
        assert V.source_distance == PLANE_WAVE

    def test_unit_magnitude_everywhere(self):
        V = gen_plane_wave_steering(glasses_array(), ring_grid(12), AXIS)
        np.testing.assert_allclose(np.abs(V.data), 1.0, rtol=1e-12)

    def test_distance_free(self):
        a = gen_plane_wave_steering(glasses_array(), ring_grid(6), AXIS)
        b = gen_plane_wave_steering(glasses_array(), ring_grid(6), AXIS)
        assert np.array_equal(a.data, b.data)

    def test_far_point_source_converges_to_plane_wave(self):
        # 0.1 m aperture, 1 kHz bin, source at 100 m: after dividing out the
        # head-center reference channel the point-source model must agree
        # with the ideal plane wave to 1% relative.
        axis = FrequencyAxis(sample_rate=48000, fft_size=96)
        f_bin = int(round(1000.0 / (48000 / 96)))
        assert axis.frequencies[f_bin] == 1000.0
        rng = np.random.default_rng(5)
        mics = rng.uniform(-0.05, 0.05, size=(4, 3))
        geom_with_ref = ArrayGeometry(
            positions=np.vstack([mics, np.zeros(3)]))
        grid = ring_grid(12)
        point = gen_point_source_steering(geom_with_ref, grid, 100.0, axis)
        plane = gen_plane_wave_steering(
            ArrayGeometry(positions=mics), grid, axis)
        normalized = point.data[f_bin, :4, :] / point.data[f_bin, 4, :]
        err = np.abs(normalized - plane.data[f_bin]) / np.abs(plane.data[f_bin])
        assert err.max() < 0.01


class TestEarProxy:
    def test_ears_sit_on_y_axis(self):
        # a source at phi=90 deg (on +y, the left side) is nearer the left ear
        grid = ring_grid(4)   # phis 0, 90, 180, 270
        h = gen_free_field_hrtf(grid, 1.0, AXIS, ear_offset=0.09)
        left_mag = np.abs(h.data[0, 0, 1])
        right_mag = np.abs(h.data[0, 1, 1])
        assert left_mag > right_mag

    def test_plane_wave_proxy_unit_magnitude(self):
        h = gen_free_field_hrtf(ring_grid(8), PLANE_WAVE, AXIS)
        np.testing.assert_allclose(np.abs(h.data), 1.0, rtol=1e-12)

    def test_source_at_ear_rejected(self):
        with pytest.raises(SourceInsideArray):
            gen_free_field_hrtf(ring_grid(8), 0.05, AXIS, ear_offset=0.09)


class TestValidateSteering:
    def test_fresh_set_is_clean(self):
        V = gen_point_source_steering(glasses_array(), ring_grid(8), 0.5, AXIS)
        assert validate_steering(V) == []

    def test_nan_injection_named(self):
        V = gen_point_source_steering(glasses_array(), ring_grid(8), 0.5, AXIS)
        V.data[3, 1, 5] = np.nan
        report = validate_steering(V)
        assert len(report) == 1
        assert "[3][1][5]" in report[0]

    def test_direction_count_mismatch(self):
        V = gen_point_source_steering(glasses_array(), ring_grid(8), 0.5, AXIS)
        V.data = V.data[:, :, :6]
        report = validate_steering(V)
        assert any("direction" in line for line in report)
