"""Shared domain types: directions, grids, frequency axes, dataset records.

Conventions used throughout the package:

* Directions are (theta, phi) pairs in radians. ``theta`` is inclination
  measured from the +z axis down toward the xy-plane (0 = zenith, pi/2 =
  horizon, pi = nadir); ``phi`` is azimuth from +x toward +y.
* Microphone positions are Cartesian triples in meters, head-centered:
  +x forward, +y toward the left ear, +z up.
* Spectral data lives on the one-sided FFT grid of a :class:`FrequencyAxis`
  and is stored frequency-major: steering ``[F][M][Q]``, HRTF ``[F][2][Q]``,
  filter weights ``[F][2][M]``. Ear channel 0 is left, 1 is right.
* Ideal far-field datasets carry the :data:`PLANE_WAVE` marker in place of a
  numeric source distance so stored metadata never contains infinities.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.spatial import cKDTree

SPEED_OF_SOUND = 343.0
"""Default speed of sound in m/s (overridable per frequency axis)."""

PLANE_WAVE = "planewave"
"""Distinguished source-distance marker for ideal plane-wave datasets."""

LEFT, RIGHT = 0, 1

#: Tolerance (radians) under which two grid directions count as duplicates.
DIRECTION_TOL = 1e-9


class BsmError(Exception):
    """Base class for toolkit-specific failures."""


class IncompatibleDatasets(BsmError):
    """Datasets that must share a grid, frequency axis, or channel count do not."""


def is_plane_wave(source_distance) -> bool:
    """True if ``source_distance`` is the plane-wave marker."""
    return isinstance(source_distance, str) and source_distance == PLANE_WAVE


def _check_source_distance(source_distance) -> float | str:
    if is_plane_wave(source_distance):
        return PLANE_WAVE
    d = float(source_distance)
    if not math.isfinite(d) or d <= 0.0:
        raise ValueError(
            f"source_distance must be a positive finite value in meters or "
            f"{PLANE_WAVE!r}, got {source_distance!r}"
        )
    return d


def normalize_direction(theta: float, phi: float) -> tuple[float, float]:
    """Map an arbitrary angle pair onto theta in [0, pi], phi in [0, 2*pi).

    Crossing a pole flips the azimuth by pi, e.g. (-0.1, 0) becomes
    (0.1, pi). Normalizing twice gives the same result as normalizing once.
    """
    theta = float(theta) % (2.0 * math.pi)
    phi = float(phi)
    if theta > math.pi:
        theta = 2.0 * math.pi - theta
        phi += math.pi
    return theta, phi % (2.0 * math.pi)


def _sph_to_unit(thetas: np.ndarray, phis: np.ndarray) -> np.ndarray:
    """Unit vectors [..., 3] for inclination/azimuth arrays."""
    st = np.sin(thetas)
    return np.stack([st * np.cos(phis), st * np.sin(phis), np.cos(thetas)], axis=-1)


@dataclasses.dataclass(frozen=True)
class Direction:
    """A single direction on the unit sphere.

    Angles are normalized on construction: theta in [0, pi] (inclination
    from +z), phi in [0, 2*pi) (azimuth from +x toward +y).
    """

    theta: float
    phi: float

    def __post_init__(self):
        th, ph = normalize_direction(self.theta, self.phi)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "phi", ph)

    @property
    def unit_vector(self) -> np.ndarray:
        return _sph_to_unit(np.float64(self.theta), np.float64(self.phi))


@dataclasses.dataclass(eq=False)
class DirectionGrid:
    """An ordered set of Q >= 1 directions, unique within 1e-9 rad.

    Parameters
    ----------
    thetas, phis : array_like, shape (Q,)
        Inclination / azimuth in radians; normalized on construction.
    name : str
        Identifier carried into dataset manifests (e.g. ``"lebedev-2702"``).
    """

    thetas: np.ndarray
    phis: np.ndarray
    name: str = ""

    def __post_init__(self):
        th = np.atleast_1d(np.asarray(self.thetas, dtype=np.float64)).copy()
        ph = np.atleast_1d(np.asarray(self.phis, dtype=np.float64)).copy()
        if th.ndim != 1 or th.shape != ph.shape:
            raise ValueError("thetas and phis must be 1-D arrays of equal length")
        if th.size < 1:
            raise ValueError("a direction grid needs at least one direction")
        th %= 2.0 * math.pi
        over = th > math.pi
        th[over] = 2.0 * math.pi - th[over]
        ph[over] += math.pi
        ph %= 2.0 * math.pi
        self.thetas = th
        self.phis = ph
        self._unit = _sph_to_unit(th, ph)
        if th.size > 1:
            # chord length equals angle to first order at this tolerance
            pairs = cKDTree(self._unit).query_pairs(DIRECTION_TOL)
            if pairs:
                i, j = min(pairs)
                raise ValueError(
                    f"grid directions {i} and {j} coincide within "
                    f"{DIRECTION_TOL} rad"
                )

    def __len__(self) -> int:
        return self.thetas.size

    def __getitem__(self, q: int) -> Direction:
        return Direction(float(self.thetas[q]), float(self.phis[q]))

    @property
    def n_directions(self) -> int:
        return self.thetas.size

    @property
    def unit_vectors(self) -> np.ndarray:
        """Cartesian unit vectors, shape (Q, 3)."""
        return self._unit

    def take(self, indices) -> "DirectionGrid":
        """Sub-grid keeping ``indices`` in order."""
        idx = np.asarray(indices, dtype=np.intp)
        return DirectionGrid(self.thetas[idx], self.phis[idx],
                             name=f"{self.name}[subset]" if self.name else "subset")


def ring_grid(n: int, theta: float = math.pi / 2) -> DirectionGrid:
    """Azimuth-regular ring of ``n`` directions at fixed inclination."""
    if n < 1:
        raise ValueError("ring grid needs at least one direction")
    phis = 2.0 * math.pi * np.arange(n) / n
    return DirectionGrid(np.full(n, float(theta)), phis, name=f"ring:{n}")


def grids_equal(a: DirectionGrid, b: DirectionGrid, tol: float = DIRECTION_TOL) -> bool:
    """True if both grids have the same directions in the same order."""
    if len(a) != len(b):
        return False
    # chord distance ~ angle at these tolerances
    chord = np.linalg.norm(a.unit_vectors - b.unit_vectors, axis=1)
    return bool(np.all(chord <= tol))


def angular_distance(a: Direction, b: Direction) -> float:
    """Great-circle angle between two directions, in [0, pi].

    Symmetric, zero iff the directions coincide. Uses the atan2 form, which
    stays accurate for nearly parallel and nearly antipodal pairs.
    """
    u = a.unit_vector
    v = b.unit_vector
    return float(np.arctan2(np.linalg.norm(np.cross(u, v)), np.dot(u, v)))


def nearest_direction(grid: DirectionGrid, target: Direction) -> tuple[int, float]:
    """Index of the grid direction closest to ``target`` plus residual angle.

    Ties are broken by the lowest index.
    """
    dots = grid.unit_vectors @ target.unit_vector
    idx = int(np.argmax(dots))
    return idx, angular_distance(grid[idx], target)


def nearest_directions(grid: DirectionGrid, thetas, phis) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized nearest-neighbor lookup for many targets at once.

    Returns (indices, residual angles); ties break to the lowest index.
    """
    tu = _sph_to_unit(np.asarray(thetas, dtype=float), np.asarray(phis, dtype=float))
    dots = tu @ grid.unit_vectors.T            # [targets, Q]
    idx = np.argmax(dots, axis=1)
    best = grid.unit_vectors[idx]
    cross = np.linalg.norm(np.cross(tu, best), axis=1)
    dot = np.einsum("ij,ij->i", tu, best)
    return idx, np.arctan2(cross, dot)


@dataclasses.dataclass(frozen=True)
class FrequencyAxis:
    """One-sided FFT frequency grid.

    ``frequencies[i] = i * sample_rate / fft_size`` for the fft_size/2 + 1
    non-negative bins; the last bin is Nyquist. ``c_sound`` rides along so
    wavenumbers ``k = 2*pi*f / c`` can be derived without extra context.
    """

    sample_rate: float
    fft_size: int
    c_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.fft_size < 2 or self.fft_size % 2 != 0:
            raise ValueError("fft_size must be a positive even integer")
        if self.c_sound <= 0:
            raise ValueError("c_sound must be positive")
        object.__setattr__(self, "fft_size", int(self.fft_size))

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0

    @property
    def frequencies(self) -> np.ndarray:
        """Bin frequencies in Hz, ascending, shape (n_bins,)."""
        return np.arange(self.n_bins) * (self.sample_rate / self.fft_size)

    @property
    def wavenumbers(self) -> np.ndarray:
        """k = 2*pi*f / c_sound per bin."""
        return 2.0 * math.pi * self.frequencies / self.c_sound


@dataclasses.dataclass(eq=False)
class ArrayGeometry:
    """Microphone positions in meters, head-centered (+x fwd, +y left, +z up)."""

    positions: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=np.float64))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError("positions must have shape (M, 3) with M >= 1")
        if not np.isfinite(pos).all():
            raise ValueError("microphone positions must be finite")
        self.positions = pos
        labels = tuple(self.labels) if self.labels else tuple(
            f"mic{i}" for i in range(pos.shape[0]))
        if len(labels) != pos.shape[0]:
            raise ValueError("labels must match the number of microphones")
        self.labels = labels

    @property
    def n_mics(self) -> int:
        return self.positions.shape[0]

    @property
    def max_radius(self) -> float:
        """Largest microphone distance from the head center."""
        return float(np.linalg.norm(self.positions, axis=1).max())


# Five-microphone glasses frame, coordinates in millimeters.
_GLASSES_MM = (
    ("nose", (101.0, -17.0, -5.0)),
    ("left-mid-temple", (31.0, 77.0, 21.0)),
    ("right-mid-temple", (31.0, -77.0, 21.0)),
    ("left-logo", (86.0, 73.0, 29.0)),
    ("right-logo", (86.0, -73.0, 29.0)),
)


def glasses_array() -> ArrayGeometry:
    """Built-in five-microphone glasses-frame geometry (meters)."""
    labels = tuple(name for name, _ in _GLASSES_MM)
    positions = np.array([xyz for _, xyz in _GLASSES_MM], dtype=np.float64) / 1000.0
    return ArrayGeometry(positions, labels)


@dataclasses.dataclass(eq=False)
class SteeringSet:
    """Acoustic transfer functions from every grid direction to every mic.

    ``data[f][m][q]`` is the complex transfer at frequency bin ``f`` from a
    source in direction ``q`` (at ``source_distance``) to microphone ``m``.
    """

    geometry: ArrayGeometry
    grid: DirectionGrid
    freq_axis: FrequencyAxis
    source_distance: float | str
    data: np.ndarray

    def __post_init__(self):
        self.source_distance = _check_source_distance(self.source_distance)
        data = np.asarray(self.data, dtype=np.complex128)
        expected = (self.freq_axis.n_bins, self.geometry.n_mics, len(self.grid))
        if data.shape != expected:
            raise ValueError(
                f"steering data must have shape [F][M][Q] = {expected}, "
                f"got {data.shape}")
        self.data = data

    @property
    def n_mics(self) -> int:
        return self.geometry.n_mics

    def take_directions(self, indices) -> "SteeringSet":
        """Restrict to a direction subset (e.g. an in-FoV region)."""
        idx = np.asarray(indices, dtype=np.intp)
        return dataclasses.replace(
            self, grid=self.grid.take(idx), data=self.data[:, :, idx])


@dataclasses.dataclass(eq=False)
class HrtfSet:
    """Head-related transfer functions on a direction grid.

    ``data[f][ear][q]`` with ear 0 = left, 1 = right.
    """

    grid: DirectionGrid
    freq_axis: FrequencyAxis
    source_distance: float | str
    data: np.ndarray

    def __post_init__(self):
        self.source_distance = _check_source_distance(self.source_distance)
        data = np.asarray(self.data, dtype=np.complex128)
        expected = (self.freq_axis.n_bins, 2, len(self.grid))
        if data.shape != expected:
            raise ValueError(
                f"HRTF data must have shape [F][2][Q] = {expected}, got {data.shape}")
        self.data = data

    def take_directions(self, indices) -> "HrtfSet":
        idx = np.asarray(indices, dtype=np.intp)
        return dataclasses.replace(
            self, grid=self.grid.take(idx), data=self.data[:, :, idx])


@dataclasses.dataclass(frozen=True)
class NoiseModel:
    """I.i.d. source/sensor-noise powers of the narrowband signal model."""

    sigma_s_sq: float = 1.0
    sigma_n_sq: float = 0.01

    def __post_init__(self):
        if self.sigma_s_sq <= 0:
            raise ValueError("sigma_s_sq must be positive")
        if self.sigma_n_sq < 0:
            raise ValueError("sigma_n_sq must be non-negative")

    @classmethod
    def from_snr_db(cls, snr_db: float, sigma_s_sq: float = 1.0) -> "NoiseModel":
        return cls(sigma_s_sq, sigma_s_sq * 10.0 ** (-snr_db / 10.0))

    def snr_db(self) -> float:
        if self.sigma_n_sq == 0:
            return math.inf
        return 10.0 * math.log10(self.sigma_s_sq / self.sigma_n_sq)

    @property
    def ratio(self) -> float:
        """Regularization ratio sigma_n_sq / sigma_s_sq."""
        return self.sigma_n_sq / self.sigma_s_sq


def ensure_shared_grid(a, b) -> None:
    """Raise IncompatibleDatasets unless a and b share grid and freq axis."""
    if a.freq_axis != b.freq_axis:
        raise IncompatibleDatasets(
            f"frequency axes differ: {a.freq_axis} vs {b.freq_axis}")
    if not grids_equal(a.grid, b.grid):
        raise IncompatibleDatasets("direction grids differ")
