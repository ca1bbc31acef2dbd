"""Scene simulation: microphone capture, reference and rendered binaural
signals, listener head rotation, and time-domain rendering.

The narrowband signal model per frequency bin is x = V s + n with V the
steering matrix, s the source spectra and n sensor noise. The reference
("ground truth") binaural signal is p = h^T s per ear; the rendered
estimate is p_hat = c^H x.
"""
from __future__ import annotations

import dataclasses
import math
import wave

import numpy as np
from scipy.io import wavfile
from scipy.signal import get_window

from .core import (
    BsmError,
    FrequencyAxis,
    HrtfSet,
    NoiseModel,
    SteeringSet,
    is_plane_wave,
    nearest_directions,
)
from .design import BsmFilterBank


class BadFrameConfig(BsmError):
    """STFT frame/hop/window combination breaks perfect reconstruction."""


@dataclasses.dataclass(frozen=True)
class Source:
    """One active source: where it sits and what it emits.

    ``spectrum`` holds per-bin complex amplitudes for frequency-domain
    simulation; time-domain material goes through :func:`render_time_domain`
    instead.
    """

    direction_index: int
    distance: float | str
    spectrum: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "spectrum", np.asarray(self.spectrum, dtype=np.complex128))
        if self.spectrum.ndim != 1:
            raise ValueError("source spectrum must be 1-D")


@dataclasses.dataclass(frozen=True)
class SourceSet:
    """Active sources of a simulated scene.

    A scene normally has at least one source; the empty set is allowed as
    the degenerate silent scene.
    """

    sources: tuple[Source, ...]

    def __init__(self, sources):
        object.__setattr__(self, "sources", tuple(sources))

    def __len__(self) -> int:
        return len(self.sources)

    def __iter__(self):
        return iter(self.sources)

    def validate_against(self, dataset) -> None:
        """Check indices and distances against a steering or HRTF set."""
        Q = len(dataset.grid)
        F = dataset.freq_axis.n_bins
        for i, src in enumerate(self.sources):
            if not 0 <= src.direction_index < Q:
                raise ValueError(
                    f"source {i}: direction index {src.direction_index} "
                    f"outside grid of {Q} directions")
            if src.spectrum.shape[0] != F:
                raise ValueError(
                    f"source {i}: spectrum has {src.spectrum.shape[0]} bins, "
                    f"dataset has {F}")
            if is_plane_wave(src.distance) != is_plane_wave(dataset.source_distance):
                raise ValueError(
                    f"source {i}: {src.distance!r} does not match the "
                    f"dataset source model {dataset.source_distance!r}")
            if not is_plane_wave(src.distance) and not math.isclose(
                    float(src.distance), float(dataset.source_distance),
                    rel_tol=1e-9):
                raise ValueError(
                    f"source {i}: distance {src.distance} differs from the "
                    f"dataset distance {dataset.source_distance}")


@dataclasses.dataclass(eq=False)
class BinauralSignal:
    """A left/right signal pair, either complex spectra or time samples."""

    left: np.ndarray
    right: np.ndarray
    freq_axis: FrequencyAxis | None = None
    sample_rate: float | None = None

    def __post_init__(self):
        self.left = np.asarray(self.left)
        self.right = np.asarray(self.right)
        if self.left.shape != self.right.shape or self.left.ndim != 1:
            raise ValueError("left/right must be 1-D arrays of equal length")
        if not (np.isfinite(self.left).all() and np.isfinite(self.right).all()):
            raise ValueError("binaural signal contains non-finite samples")
        if (self.freq_axis is None) == (self.sample_rate is None):
            raise ValueError("give exactly one of freq_axis or sample_rate")

    @property
    def is_time_domain(self) -> bool:
        return self.sample_rate is not None

    def as_pair(self) -> tuple[np.ndarray, np.ndarray]:
        return self.left, self.right


def synthesize_mic_signals(V: SteeringSet, sources: SourceSet,
                           noise: NoiseModel, seed) -> np.ndarray:
    """Microphone spectra [F][M] of a scene: x = sum_q v_q s_q + n.

    Sensor noise is i.i.d. circular complex Gaussian with variance
    sigma_n^2 per microphone per bin (0 disables it); the draw is
    deterministic for a given ``seed``.
    """
    sources.validate_against(V)
    F, M, _ = V.data.shape
    x = np.zeros((F, M), dtype=np.complex128)
    for src in sources:
        x += V.data[:, :, src.direction_index] * src.spectrum[:, None]
    if noise.sigma_n_sq > 0.0:
        rng = np.random.default_rng(seed)
        scale = math.sqrt(noise.sigma_n_sq / 2.0)
        x += scale * (rng.standard_normal((F, M))
                      + 1j * rng.standard_normal((F, M)))
    return x


def ground_truth_binaural(h: HrtfSet, sources: SourceSet) -> BinauralSignal:
    """Reference ear spectra p = h^T s (exact linear combination per ear)."""
    sources.validate_against(h)
    F = h.freq_axis.n_bins
    p = np.zeros((F, 2), dtype=np.complex128)
    for src in sources:
        p += h.data[:, :, src.direction_index] * src.spectrum[:, None]
    return BinauralSignal(left=p[:, 0], right=p[:, 1], freq_axis=h.freq_axis)


def apply_filter(c: BsmFilterBank, x: np.ndarray) -> BinauralSignal:
    """Rendered ear spectra p_hat = c^H x per bin and ear."""
    x = np.asarray(x)
    F, M = c.weights.shape[0], c.n_mics
    if x.shape != (F, M):
        raise ValueError(f"mic spectra must have shape ({F}, {M}), got {x.shape}")
    p = np.einsum("fem,fm->fe", c.weights.conj(), x)
    return BinauralSignal(left=p[:, 0], right=p[:, 1], freq_axis=c.freq_axis)


def rotate_hrtf(h: HrtfSet, delta_phi: float) -> tuple[HrtfSet, np.ndarray]:
    """Listener head rotation by ``delta_phi`` radians about the vertical.

    Entry q of the result is the input entry at the grid node nearest to
    (theta_q, phi_q + delta_phi) — azimuths shift, elevations stay. Also
    returns the per-entry angular residual (radians) between the requested
    rotated direction and the node actually used, an audit of how well the
    grid supports the rotation (exactly 0 on azimuth-regular grids when
    delta_phi is a multiple of the grid step).
    """
    idx, residuals = nearest_directions(
        h.grid, h.grid.thetas, h.grid.phis + delta_phi)
    rotated = dataclasses.replace(h, data=h.data[:, :, idx])
    return rotated, residuals


# --------------------------------------------------------------------------
# Time-domain rendering (STFT overlap-add)
# --------------------------------------------------------------------------

#: relative tolerance for the constant-overlap-add envelope check
COLA_RTOL = 1e-8


def _sqrt_hann(n: int) -> np.ndarray:
    return np.sqrt(get_window("hann", n, fftbins=True))


def _fold_constant(frame: int, hop: int) -> float:
    """Validate COLA for the sqrt-Hann pair; return the fold gain.

    The overlapped product of analysis and synthesis windows must sum to a
    constant in steady state (checked to 1e-8 relative); ``frame`` must be
    an integer multiple of ``hop``.
    """
    if not (0 < hop <= frame):
        raise BadFrameConfig(f"hop {hop} must lie in [1, frame {frame}]")
    if frame % hop:
        raise BadFrameConfig(
            f"frame {frame} is not an integer multiple of hop {hop}")
    ws = _sqrt_hann(frame) ** 2        # analysis * synthesis
    env = np.zeros(3 * frame)
    for t in range(0, 2 * frame + 1, hop):
        env[t:t + frame] += ws
    steady = env[frame:2 * frame]
    gain = float(np.mean(steady))
    if gain <= 0.0 or np.max(np.abs(steady - gain)) > COLA_RTOL * gain:
        raise BadFrameConfig(
            f"sqrt-Hann windows with frame {frame}, hop {hop} do not "
            f"overlap-add to a constant")
    return gain


def render_time_domain(c: BsmFilterBank, mics: np.ndarray,
                       frame: int | None = None,
                       hop: int | None = None) -> np.ndarray:
    """Filter microphone time signals into a stereo signal, sample-aligned.

    ``mics`` is [n_samples] for one microphone or [n_samples][M]. Each
    square-root-Hann analysis frame of length ``frame`` (defaults to the
    filter bank's FFT size, and must equal it) is transformed, weighted per
    bin and ear with the conjugated filter weights, inverse-transformed,
    windowed again and overlap-added at ``hop`` (default frame/2). Input
    padding and output trimming cancel the blocking delay, so an identity
    filter bank returns the input with zero latency (residual below
    -100 dBFS).

    Returns [n_samples][2] float64.

    Raises
    ------
    BadFrameConfig
        If ``frame`` differs from the design FFT size, ``hop`` does not
        divide ``frame``, or the window pair fails the overlap-add check.
    """
    mics = np.asarray(mics, dtype=np.float64)
    if mics.ndim == 1:
        mics = mics[:, None]
    if mics.ndim != 2 or mics.shape[1] != c.n_mics:
        raise ValueError(
            f"mic signals must be [n_samples][{c.n_mics}], got {mics.shape}")
    fft_size = c.freq_axis.fft_size
    if frame is None:
        frame = fft_size
    if frame != fft_size:
        raise BadFrameConfig(
            f"frame {frame} must equal the filter bank FFT size {fft_size}")
    if hop is None:
        hop = frame // 2
    gain = _fold_constant(frame, hop)

    n = mics.shape[0]
    padded = np.zeros((n + 2 * frame, mics.shape[1]))
    padded[frame:frame + n] = mics
    window = _sqrt_hann(frame)
    out = np.zeros((padded.shape[0] + frame, 2))
    # weights enter conjugated (p_hat = c^H x), one [F][2][M] tensor
    w = c.weights.conj()
    for t in range(0, padded.shape[0] - frame + 1, hop):
        seg = np.fft.rfft(window[:, None] * padded[t:t + frame], axis=0)
        ears = np.einsum("fem,fm->fe", w, seg)
        out[t:t + frame] += window[:, None] * np.fft.irfft(ears, n=frame, axis=0)
    return out[frame:frame + n] / gain


# --------------------------------------------------------------------------
# WAV files
# --------------------------------------------------------------------------

def read_wav(path) -> tuple[float, np.ndarray]:
    """Read a WAV file to (sample_rate, float64 samples in [-1, 1)).

    Integer PCM (8/16/24/32-bit) is scaled to full-range float; float
    files pass through. Shape is [n_samples] mono or [n_samples][channels].
    """
    rate, data = wavfile.read(path)
    if data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        data = data.astype(np.float64) / 2.0 ** 15
    elif data.dtype == np.int32:       # includes 24-bit, stored in the top bytes
        data = data.astype(np.float64) / 2.0 ** 31
    else:
        data = data.astype(np.float64)
    return float(rate), data


def write_wav(path, sample_rate: float, data: np.ndarray,
              encoding: str = "float32") -> None:
    """Write samples (values in [-1, 1], mono or [n][channels]) to WAV.

    ``encoding`` is one of pcm16, pcm24, float32. Integer encodings clip
    to full scale.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim not in (1, 2):
        raise ValueError("data must be [n_samples] or [n_samples][channels]")
    rate = int(round(sample_rate))
    if encoding == "float32":
        wavfile.write(path, rate, data.astype(np.float32))
    elif encoding == "pcm16":
        scaled = np.clip(np.rint(data * 32767.0), -32768, 32767)
        wavfile.write(path, rate, scaled.astype(np.int16))
    elif encoding == "pcm24":
        scaled = np.clip(np.rint(data * 8388607.0), -8388608, 8388607)
        frames = scaled.astype("<i4").reshape(data.shape[0], -1)
        raw = frames.view(np.uint8).reshape(data.shape[0], -1, 4)
        with wave.open(str(path), "wb") as fh:
            fh.setnchannels(frames.shape[1])
            fh.setsampwidth(3)
            fh.setframerate(rate)
            fh.writeframes(raw[:, :, :3].tobytes())
    else:
        raise ValueError(f"encoding must be pcm16, pcm24 or float32, "
                         f"got {encoding!r}")
