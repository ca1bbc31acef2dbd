"""Analytic steering generators and steering-set validation.

Free-field transfers only: a point source at finite distance uses the
Green's function ``exp(-i k d) / (4 pi d)``; the ideal far field uses the
unit-magnitude plane-wave phase ``exp(i k u . r)`` with ``u`` pointing from
the array toward the source. Scattering-inclusive steering (e.g. measured or
simulated around a head) must be ingested from dataset files; it is not
generated here.
"""
from __future__ import annotations

import numpy as np

from .core import (
    PLANE_WAVE,
    ArrayGeometry,
    BsmError,
    DirectionGrid,
    FrequencyAxis,
    HrtfSet,
    SteeringSet,
    is_plane_wave,
)

#: Point-to-point distances below this (meters) are rejected as degenerate.
MIN_SOURCE_MIC_DISTANCE = 1e-3


class SourceInsideArray(BsmError):
    """Source placement collides with (or sits inside) the microphone array."""


def _point_source_transfer(positions: np.ndarray, grid: DirectionGrid,
                           r_s: float, freq_axis: FrequencyAxis) -> np.ndarray:
    """Free-field point-source transfer [F][P][Q] to arbitrary points."""
    src = r_s * grid.unit_vectors                          # [Q, 3]
    d = np.linalg.norm(src[None, :, :] - positions[:, None, :], axis=2)  # [P, Q]
    if (d < MIN_SOURCE_MIC_DISTANCE).any():
        p, q = np.argwhere(d < MIN_SOURCE_MIC_DISTANCE)[0]
        raise SourceInsideArray(
            f"source at {r_s} m in direction {q} is {d[p, q]:.2e} m from "
            f"point {p}; minimum is {MIN_SOURCE_MIC_DISTANCE} m")
    k = freq_axis.wavenumbers                              # [F]
    return np.exp(-1j * k[:, None, None] * d) / (4.0 * np.pi * d)


def _plane_wave_transfer(positions: np.ndarray, grid: DirectionGrid,
                         freq_axis: FrequencyAxis) -> np.ndarray:
    """Unit-magnitude plane-wave phase [F][P][Q] at arbitrary points."""
    path = positions @ grid.unit_vectors.T                 # [P, Q], u . r
    k = freq_axis.wavenumbers
    return np.exp(1j * k[:, None, None] * path)


def gen_point_source_steering(geometry: ArrayGeometry, grid: DirectionGrid,
                              r_s: float, freq_axis: FrequencyAxis) -> SteeringSet:
    """Free-field point-source steering set at source distance ``r_s``.

    Parameters
    ----------
    geometry : ArrayGeometry
        Microphone layout; the source must lie strictly outside its radius.
    grid : DirectionGrid
        Source directions (one steering column each).
    r_s : float
        Source distance from the head center, meters.
    freq_axis : FrequencyAxis
        Frequency bins; also supplies the speed of sound.

    Returns
    -------
    SteeringSet
        ``data[f][m][q] = exp(-i k d) / (4 pi d)`` with ``d`` the
        source-to-microphone distance.

    Raises
    ------
    SourceInsideArray
        If ``r_s`` does not clear the array radius or any source-microphone
        distance falls below 1 mm.
    """
    r_s = float(r_s)
    if r_s <= 0.0:
        raise ValueError("source distance must be positive")
    if r_s <= geometry.max_radius:
        raise SourceInsideArray(
            f"source distance {r_s} m must exceed the array radius "
            f"{geometry.max_radius:.4f} m")
    data = _point_source_transfer(geometry.positions, grid, r_s, freq_axis)
    return SteeringSet(geometry, grid, freq_axis, r_s, data)


def gen_plane_wave_steering(geometry: ArrayGeometry, grid: DirectionGrid,
                            freq_axis: FrequencyAxis) -> SteeringSet:
    """Ideal plane-wave steering set (unit magnitude, pure phase).

    The source distance of the returned set is the plane-wave marker; the
    generator itself is distance-free.
    """
    data = _plane_wave_transfer(geometry.positions, grid, freq_axis)
    return SteeringSet(geometry, grid, freq_axis, PLANE_WAVE, data)


def gen_free_field_hrtf(grid: DirectionGrid, source_distance: float | str,
                        freq_axis: FrequencyAxis,
                        ear_offset: float = 0.09) -> HrtfSet:
    """Two-point free-field "ear" proxy HRTF set.

    Models the ears as bare points at (0, +/-ear_offset, 0) — left ear on
    the +y axis — and applies the same free-field transfer as the steering
    generators (point source at ``source_distance``, or plane wave for the
    marker). No head scattering: this is an analytic stand-in for trend
    checks when a measured HRTF set is unavailable.
    """
    ears = np.array([[0.0, ear_offset, 0.0], [0.0, -ear_offset, 0.0]])
    if is_plane_wave(source_distance):
        data = _plane_wave_transfer(ears, grid, freq_axis)
        return HrtfSet(grid, freq_axis, PLANE_WAVE, data)
    r_s = float(source_distance)
    if r_s <= ear_offset:
        raise SourceInsideArray(
            f"source distance {r_s} m must exceed the ear offset {ear_offset} m")
    data = _point_source_transfer(ears, grid, r_s, freq_axis)
    return HrtfSet(grid, freq_axis, r_s, data)


def validate_steering(sset: SteeringSet) -> list[str]:
    """Audit a steering set; returns a list of violations (empty = valid).

    Checks dimension consistency against the bound grid/geometry/axis,
    source-distance validity, and finiteness of every entry. Non-finite
    entries are reported individually as ``data[f][m][q]`` up to a cap.
    """
    violations: list[str] = []
    data = np.asarray(sset.data)
    expected = (sset.freq_axis.n_bins, sset.geometry.n_mics, len(sset.grid))
    if data.ndim != 3:
        violations.append(f"data must be 3-D [F][M][Q], got {data.ndim}-D")
        return violations
    if data.shape != expected:
        names = ("frequency bins", "microphones", "directions")
        for axis, (got, want) in enumerate(zip(data.shape, expected)):
            if got != want:
                violations.append(
                    f"dimension mismatch on {names[axis]}: data has {got}, "
                    f"bound metadata has {want}")
    if not is_plane_wave(sset.source_distance):
        d = sset.source_distance
        if not (isinstance(d, float) and np.isfinite(d) and d > 0):
            violations.append(f"invalid source_distance {d!r}")
    bad = np.argwhere(~np.isfinite(data))
    for f, m, q in bad[:10]:
        violations.append(f"non-finite entry at data[{f}][{m}][{q}]")
    if len(bad) > 10:
        violations.append(f"... {len(bad) - 10} further non-finite entries")
    return violations
