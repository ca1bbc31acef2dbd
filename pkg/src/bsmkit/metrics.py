"""Error measures for designed filters and binaural renderings.

Frequency-domain measures (per bin and ear):

* ``eps_ls``     — normalized regularized complex matching error,
* ``eps_magls``  — normalized magnitude matching error,
* ``eps_mixed``  — alpha(f)-weighted combination of the two,
* ``null_space_projection`` — fraction of HRTF energy invisible to the
  array (projection onto the null space of V^T), in dB.

Perceptual measures:

* ``ild`` / ``ild_error`` — interaural level differences in 32 ERB bands
  between 1.5 and 20 kHz, computed on binaural spectra,
* ``itd`` / ``itd_error`` — interaural time difference from the averaged
  per-bin group delay below 1.5 kHz, computed on binaural time signals.
"""
from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from .core import LEFT, RIGHT, BsmError, FrequencyAxis, NoiseModel
from .design import AlphaSchedule, DEFAULT_SCHEDULE, alpha_weight

# Glasberg & Moore ERB-rate parameters
EAR_Q = 9.26449
MIN_BW = 24.7

ILD_BAND_LO_HZ = 1_500.0
ILD_BAND_HI_HZ = 20_000.0
N_ILD_BANDS = 32
ITD_F_MAX_HZ = 1_500.0
ITD_BIN_FLOOR = 1e-12
NULL_FLOOR_DB = -300.0

# reporting band for frequency-averaged errors (evaluation covers all bins;
# averages quoted in reports and sweeps restrict to this range)
REPORT_F_LO_HZ = 75.0
REPORT_F_HI_HZ = 10_000.0


class ZeroReference(BsmError):
    """A normalized error was requested against an all-zero reference."""


class AllBinsExcluded(BsmError):
    """Every bin below the ITD cutoff fell under the magnitude floor."""


class SilentChannel(UserWarning):
    """An ILD band had zero energy in one ear and was skipped."""


def _check_ear(ear):
    if ear not in (LEFT, RIGHT):
        raise ValueError(f"ear must be 0 (left) or 1 (right), got {ear!r}")


def _data(obj, attr):
    """Unwrap a domain object to its ndarray, passing ndarrays through."""
    return np.asarray(getattr(obj, attr, obj))


def _reference_energy(h: np.ndarray) -> np.ndarray:
    href = np.sum(np.abs(h) ** 2, axis=-1)
    if (href == 0.0).any():
        f = int(np.argmin(href))
        raise ZeroReference(f"all-zero HRTF reference at bin {f}")
    return href


def eps_ls(V, c, h, noise: NoiseModel, ear: int) -> np.ndarray:
    """Normalized complex matching error per frequency bin.

    eps = (sigma_s^2 ||V^T c* - h||^2 + sigma_n^2 ||c*||^2)
          / (sigma_s^2 ||h||^2)

    ``V`` is a SteeringSet (or raw [F][M][Q] array), ``c`` a BsmFilterBank
    (or [F][2][M] array), ``h`` an HrtfSet (or [F][2][Q] array).

    Raises
    ------
    ZeroReference
        If the target is identically zero at some bin.
    """
    _check_ear(ear)
    V = _data(V, "data")
    c = _data(c, "weights")[:, ear, :]
    h = _data(h, "data")[:, ear, :]
    href = _reference_energy(h)
    resid = np.einsum("fmq,fm->fq", V, c.conj()) - h
    num = (noise.sigma_s_sq * np.sum(np.abs(resid) ** 2, axis=1)
           + noise.sigma_n_sq * np.sum(np.abs(c) ** 2, axis=1))
    return num / (noise.sigma_s_sq * href)


def eps_magls(V, c, h, ear: int) -> np.ndarray:
    """Normalized magnitude matching error || |V^T c*| - |h| ||^2 / ||h||^2."""
    _check_ear(ear)
    V = _data(V, "data")
    c = _data(c, "weights")[:, ear, :]
    h = _data(h, "data")[:, ear, :]
    href = _reference_energy(h)
    g = np.einsum("fmq,fm->fq", V, c.conj())
    return np.sum((np.abs(g) - np.abs(h)) ** 2, axis=1) / href


def eps_mixed(eps_ls_val, eps_magls_val, f,
              sched: AlphaSchedule = DEFAULT_SCHEDULE):
    """Blend the two error measures with the design crossfade alpha(f)."""
    a = alpha_weight(f, sched)
    return a * np.asarray(eps_ls_val) + (1.0 - a) * np.asarray(eps_magls_val)


def null_space_projection(V_slice: np.ndarray, h_slice: np.ndarray,
                          threshold_db: float = -20.0) -> float:
    """HRTF energy outside the reproducible row space of V^T, in dB.

    Right-singular directions of ``V_slice`` ([M][Q], one frequency) whose
    singular value reaches ``max(sigma) * 10^(threshold_db/20)`` span what
    the array can reproduce; everything else — weak singular directions
    plus the orthogonal complement — is the effective null space. Returns

        10 log10( ||h - P h||^2 / ||h||^2 )

    with P the orthogonal projector onto the reproducible span, floored at
    -300 dB (an empty null space lands on the floor).
    """
    V_slice = np.asarray(V_slice)
    h = np.asarray(h_slice).reshape(-1)
    if V_slice.ndim != 2 or V_slice.shape[1] != h.shape[0]:
        raise ValueError("V_slice must be [M][Q] with Q matching h_slice")
    href = float(np.sum(np.abs(h) ** 2))
    if href == 0.0:
        raise ZeroReference("all-zero HRTF slice")
    _, s, Vh = np.linalg.svd(V_slice, full_matrices=False)
    keep = s >= s[0] * 10.0 ** (threshold_db / 20.0)
    B = Vh[keep]                       # rows are v_i^H of the retained span
    resid = h - B.conj().T @ (B @ h)
    e_null = float(np.sum(np.abs(resid) ** 2))
    if e_null <= 0.0:
        return NULL_FLOOR_DB
    return max(10.0 * np.log10(e_null / href), NULL_FLOOR_DB)


# --------------------------------------------------------------------------
# ERB filter bank, ILD
# --------------------------------------------------------------------------

def erb_bandwidth(f):
    """Equivalent rectangular bandwidth at frequency f (Glasberg & Moore)."""
    return np.asarray(f) / EAR_Q + MIN_BW


def erb_center_frequencies(lo_hz: float = ILD_BAND_LO_HZ,
                           hi_hz: float = ILD_BAND_HI_HZ,
                           n_bands: int = N_ILD_BANDS) -> np.ndarray:
    """Band centers uniformly spaced on the ERB-rate scale, inclusive ends."""
    c = EAR_Q * MIN_BW
    return np.exp(np.linspace(np.log(lo_hz + c), np.log(hi_hz + c), n_bands)) - c


@dataclasses.dataclass(eq=False)
class ErbFilterBank:
    """Gammatone magnitude responses sampled on a fixed frequency axis.

    ``response[b][f]`` is the squared-magnitude weight of band b at bin f:
    the 4th-order gammatone power response
    ``(1 + ((f - fc) / (1.019 * ERB(fc)))^2)^-2``.
    """

    freq_axis: FrequencyAxis
    centers_hz: np.ndarray
    response: np.ndarray

    @property
    def n_bands(self) -> int:
        return self.centers_hz.shape[0]

    def band_energies(self, spectrum: np.ndarray) -> np.ndarray:
        """Per-band energies sum_f R[b][f] |spectrum[f]|^2."""
        spectrum = np.asarray(spectrum)
        if spectrum.shape != (self.freq_axis.n_bins,):
            raise ValueError(
                f"spectrum must have {self.freq_axis.n_bins} bins, "
                f"got shape {spectrum.shape}")
        return self.response @ (np.abs(spectrum) ** 2)


def make_erb_filterbank(freq_axis: FrequencyAxis,
                        lo_hz: float = ILD_BAND_LO_HZ,
                        hi_hz: float = ILD_BAND_HI_HZ,
                        n_bands: int = N_ILD_BANDS) -> ErbFilterBank:
    """Gammatone power responses for ILD analysis on ``freq_axis``.

    When the Nyquist frequency falls below ``hi_hz``, the top band is
    clamped to Nyquist and a UserWarning notes the reduced coverage.
    """
    if not (0.0 < lo_hz < hi_hz):
        raise ValueError("need 0 < lo_hz < hi_hz")
    if freq_axis.nyquist < hi_hz:
        warnings.warn(
            f"Nyquist {freq_axis.nyquist:g} Hz below the {hi_hz:g} Hz band "
            f"ceiling; clamping", UserWarning, stacklevel=2)
        hi_hz = freq_axis.nyquist
        if lo_hz >= hi_hz:
            raise ValueError("sample rate too low for the requested bands")
    centers = erb_center_frequencies(lo_hz, hi_hz, n_bands)
    f = freq_axis.frequencies[None, :]
    fc = centers[:, None]
    u = (f - fc) / (1.019 * erb_bandwidth(fc))
    return ErbFilterBank(freq_axis=freq_axis, centers_hz=centers,
                         response=(1.0 + u ** 2) ** -2)


def ild(p_l: np.ndarray, p_r: np.ndarray,
        bank: ErbFilterBank) -> tuple[np.ndarray, float]:
    """Interaural level difference per ERB band plus the band average.

    Per band, 10 log10 of the ratio of gammatone-weighted energies of the
    two spectra. The average always divides by the full band count; bands
    with zero energy in either ear are skipped, contribute 0 dB, and raise
    a single :class:`SilentChannel` warning.
    """
    el = bank.band_energies(p_l)
    er = bank.band_energies(p_r)
    silent = (el == 0.0) | (er == 0.0)
    per_band = np.zeros(bank.n_bands)
    live = ~silent
    per_band[live] = 10.0 * np.log10(el[live] / er[live])
    if silent.any():
        warnings.warn(
            f"{int(silent.sum())} of {bank.n_bands} ERB bands silent in one "
            f"ear; their ILD was set to 0 dB", SilentChannel, stacklevel=2)
    return per_band, float(np.sum(per_band) / bank.n_bands)


def ild_error(ref: tuple[np.ndarray, np.ndarray],
              rep: tuple[np.ndarray, np.ndarray],
              bank: ErbFilterBank) -> float:
    """Mean absolute per-band ILD deviation of a reproduction, in dB.

    ``ref`` and ``rep`` are (left, right) spectra pairs; the absolute value
    sits inside the band average, and the divisor is the full band count.
    """
    ild_ref, _ = ild(*ref, bank)
    ild_rep, _ = ild(*rep, bank)
    return float(np.sum(np.abs(ild_rep - ild_ref)) / bank.n_bands)


# --------------------------------------------------------------------------
# ITD
# --------------------------------------------------------------------------

def _group_delay(x: np.ndarray, sample_rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-bin group delay (seconds) and spectrum of a real time signal.

    tau(f) = Re[ DFT{n x(n)} / DFT{x(n)} ] / fs, with n the zero-based
    sample index of the analysis window.
    """
    spec = np.fft.rfft(x)
    num = np.fft.rfft(np.arange(x.shape[0]) * x)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.real(num / spec) / sample_rate
    return tau, spec


def itd(p_l: np.ndarray, p_r: np.ndarray, sample_rate: float,
        f_max: float = ITD_F_MAX_HZ) -> float:
    """Interaural time difference in seconds from two time signals.

    Averages the per-bin group-delay difference (left minus right) over
    bins with 0 < f <= ``f_max``. Both channels share one analysis window
    and the zero-based index convention, so the window's constant delay
    offset cancels in the difference. Bins whose magnitude falls below
    1e-12 of the channel peak in either ear are excluded.

    A signal arriving ``d`` samples earlier at the left ear yields
    ITD = -d / sample_rate.

    Raises
    ------
    AllBinsExcluded
        If the magnitude floor removes every bin below ``f_max``.
    """
    p_l = np.asarray(p_l, dtype=np.float64)
    p_r = np.asarray(p_r, dtype=np.float64)
    if p_l.shape != p_r.shape or p_l.ndim != 1 or p_l.shape[0] < 2:
        raise ValueError("need two equal-length 1-D signals of length >= 2")
    tau_l, spec_l = _group_delay(p_l, sample_rate)
    tau_r, spec_r = _group_delay(p_r, sample_rate)
    freqs = np.fft.rfftfreq(p_l.shape[0], 1.0 / sample_rate)
    band = (freqs > 0.0) & (freqs <= f_max)
    floor_l = ITD_BIN_FLOOR * np.max(np.abs(spec_l))
    floor_r = ITD_BIN_FLOOR * np.max(np.abs(spec_r))
    valid = band & (np.abs(spec_l) >= floor_l) & (np.abs(spec_r) >= floor_r)
    if not valid.any():
        raise AllBinsExcluded(
            f"no usable bins in (0, {f_max:g}] Hz after the magnitude floor")
    return float(np.mean(tau_l[valid] - tau_r[valid]))


def itd_error(ref: tuple[np.ndarray, np.ndarray],
              rep: tuple[np.ndarray, np.ndarray],
              sample_rate: float, f_max: float = ITD_F_MAX_HZ) -> float:
    """Absolute ITD deviation |itd(rep) - itd(ref)| in seconds."""
    return abs(itd(*ref, sample_rate, f_max) - itd(*rep, sample_rate, f_max))


# --------------------------------------------------------------------------
# Report assembly
# --------------------------------------------------------------------------

@dataclasses.dataclass(eq=False)
class DirectionRow:
    """One per-direction metric entry (ILD or ITD, reference vs rendered)."""

    az_deg: float
    el_deg: float
    metric: str               # "ild" (dB) or "itd" (seconds)
    ref: float
    rep: float
    abs_err: float
    region_tag: str = "all"   # {all, in-fov, out-fov}

    def __post_init__(self):
        if self.metric not in ("ild", "itd"):
            raise ValueError(f"metric must be 'ild' or 'itd', got {self.metric!r}")
        if self.region_tag not in ("all", "in-fov", "out-fov"):
            raise ValueError(f"unknown region_tag {self.region_tag!r}")


@dataclasses.dataclass(eq=False)
class MetricsReport:
    """Per-frequency error curves and per-direction ILD/ITD tables.

    Frequency arrays are indexed [F][ear]; ``xi_null`` likewise. The
    ``meta`` mapping carries provenance (filter id, dataset ids, rotation
    angle, region tag) into CSV output manifests.
    """

    frequencies_hz: np.ndarray
    eps_ls: np.ndarray
    eps_magls: np.ndarray
    eps_mix: np.ndarray
    xi_null: np.ndarray
    direction_rows: list[DirectionRow] = dataclasses.field(default_factory=list)
    meta: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        F = np.asarray(self.frequencies_hz).shape[0]
        for name in ("eps_ls", "eps_magls", "eps_mix", "xi_null"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (F, 2):
                raise ValueError(f"{name} must have shape [F][2], got {arr.shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite entries")
            setattr(self, name, arr)

    def band_average(self, values: np.ndarray,
                     f_lo: float = REPORT_F_LO_HZ,
                     f_hi: float = REPORT_F_HI_HZ) -> np.ndarray:
        """Mean of a per-frequency column over the reporting band, per ear."""
        m = (self.frequencies_hz >= f_lo) & (self.frequencies_hz <= f_hi)
        if not m.any():
            raise ValueError("reporting band contains no bins")
        return np.asarray(values)[m].mean(axis=0)
