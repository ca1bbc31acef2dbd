"""Binaural signal-matching filter design.

Per frequency bin and ear, the filter weights c minimize the regularized
complex matching error

    sigma_s^2 ||V^T c* - h||^2 + sigma_n^2 ||c*||^2,

whose normal equations are (V V^H + (sigma_n^2/sigma_s^2) I) c = V h*.
Three criteria are offered:

* LS      — the solution above at every bin.
* MagLS   — above a cutoff (default 800 Hz), match only |h| via a
            variable-exchange iteration; below the cutoff the LS solution
            is kept unchanged.
* Mixed   — per-bin linear blend alpha(f) c_LS + (1 - alpha(f)) c_MagLS
            with alpha falling from 1 at 800 Hz to 0 at 1500 Hz.

Optional field-of-view weighting scales steering columns and HRTF entries
per direction (1 inside the FoV, beta outside) before the solve, biasing
the fit toward the region of interest.
"""
from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .core import (
    BsmError,
    Direction,
    DirectionGrid,
    FrequencyAxis,
    HrtfSet,
    NoiseModel,
    SteeringSet,
    ensure_shared_grid,
)


class SingularSystem(BsmError):
    """The regularized normal matrix is numerically singular at some bin."""


class NoConvergence(UserWarning):
    """MagLS iteration hit the iteration cap while still improving."""


@dataclasses.dataclass(frozen=True)
class AlphaSchedule:
    """Crossfade band between complex (LS) and magnitude (MagLS) matching."""

    lo_hz: float = 800.0
    hi_hz: float = 1500.0

    def __post_init__(self):
        if not (0.0 < self.lo_hz < self.hi_hz):
            raise ValueError("need 0 < lo_hz < hi_hz")


DEFAULT_SCHEDULE = AlphaSchedule()


def alpha_weight(f, sched: AlphaSchedule = DEFAULT_SCHEDULE):
    """Blend weight alpha(f): 1 below lo_hz, 0 above hi_hz, linear between.

    Continuous at both boundaries; accepts scalars or arrays.
    """
    f = np.asarray(f, dtype=np.float64)
    if (f < 0).any():
        raise ValueError("frequency must be non-negative")
    a = (sched.hi_hz - f) / (sched.hi_hz - sched.lo_hz)
    out = np.clip(a, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclasses.dataclass(frozen=True)
class FovSpec:
    """Field-of-view region and its out-of-view design weight.

    Membership: a direction is inside the FoV when its azimuth lies within
    ``az_halfwidth`` of the center azimuth (shortest signed difference) and
    its inclination within ``el_halfwidth`` of the center inclination.
    Boundaries are inclusive. ``beta`` in [0, 1] is the weight applied
    outside; beta = 1 is the degenerate no-op.
    """

    az_halfwidth: float = math.pi / 4
    el_halfwidth: float = math.pi / 4
    center: Direction = Direction(math.pi / 2, 0.0)
    beta: float = 0.2

    def __post_init__(self):
        for name in ("az_halfwidth", "el_halfwidth"):
            v = getattr(self, name)
            if not (0.0 < v <= math.pi):
                raise ValueError(f"{name} must lie in (0, pi]")
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError("beta must lie in [0, 1]")


def in_fov_mask(grid: DirectionGrid, fov: FovSpec) -> np.ndarray:
    """Boolean per-direction FoV membership (boundary inclusive)."""
    daz = (grid.phis - fov.center.phi) % (2.0 * math.pi)
    daz = np.where(daz > math.pi, daz - 2.0 * math.pi, daz)  # (-pi, pi]
    del_ = grid.thetas - fov.center.theta
    return (np.abs(daz) <= fov.az_halfwidth) & (np.abs(del_) <= fov.el_halfwidth)


def fov_weights(grid: DirectionGrid, fov: FovSpec) -> np.ndarray:
    """Per-direction design weights: 1 inside the FoV, beta outside."""
    return np.where(in_fov_mask(grid, fov), 1.0, float(fov.beta))


def apply_fov(V: SteeringSet, h: HrtfSet, fov: FovSpec) -> tuple[SteeringSet, HrtfSet]:
    """Scale steering columns and HRTF entries by the FoV weights.

    The weighting acts along the direction axis of both arrays, matching a
    diagonal per-direction weight matrix applied to V columns and h entries.
    """
    ensure_shared_grid(V, h)
    w = fov_weights(V.grid, fov)
    return (dataclasses.replace(V, data=V.data * w),
            dataclasses.replace(h, data=h.data * w))


@dataclasses.dataclass(eq=False)
class BsmFilterBank:
    """Designed filter weights plus the conditions they were designed under.

    ``weights[f][ear][m]`` are applied as ``p_hat = c^H x`` (conjugated
    inner product with the mic spectra). ``magls_converged`` flags, per
    (bin, ear), whether the MagLS iteration converged (None for pure LS).
    """

    freq_axis: FrequencyAxis
    weights: np.ndarray
    criterion: str
    noise: NoiseModel
    fov: FovSpec | None = None
    source_distance_design: float | str | None = None
    magls_cutoff_hz: float | None = None
    magls_converged: np.ndarray | None = None
    magls_history: dict | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.complex128)
        if w.ndim != 3 or w.shape[0] != self.freq_axis.n_bins or w.shape[1] != 2:
            raise ValueError(
                f"weights must have shape [F][2][M] with F = "
                f"{self.freq_axis.n_bins}, got {w.shape}")
        self.weights = w
        if self.criterion not in ("LS", "MagLS", "Mixed"):
            raise ValueError(f"unknown criterion {self.criterion!r}")

    @property
    def n_mics(self) -> int:
        return self.weights.shape[2]


def _ridge_factor(Vf: np.ndarray, lam: float, bin_index: int):
    """Cholesky factor of V V^H + lam I; SingularSystem when not PD."""
    M = Vf.shape[0]
    A = Vf @ Vf.conj().T + lam * np.eye(M)
    try:
        return cho_factor(A, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise SingularSystem(
            f"regularized normal matrix singular at bin {bin_index} "
            f"(sigma_n^2/sigma_s^2 = {lam:g})") from exc


def _solve_ls_weights(Vdata: np.ndarray, hdata: np.ndarray, lam: float) -> np.ndarray:
    """LS weights [F][2][M] for steering [F][M][Q] and HRTFs [F][2][Q]."""
    F, M, _ = Vdata.shape
    out = np.empty((F, 2, M), dtype=np.complex128)
    for f in range(F):
        cho = _ridge_factor(Vdata[f], lam, f)
        rhs = Vdata[f] @ hdata[f].conj().T        # [M, 2]
        out[f] = cho_solve(cho, rhs, check_finite=False).T
    if not np.isfinite(out).all():
        f = int(np.argwhere(~np.isfinite(out))[0][0])
        raise SingularSystem(f"non-finite LS solution at bin {f}")
    return out


def design_ls(V: SteeringSet, h: HrtfSet, noise: NoiseModel,
              *, fov: FovSpec | None = None) -> BsmFilterBank:
    """Regularized least-squares filter bank (complex matching).

    Solves (V V^H + (sigma_n^2/sigma_s^2) I) c = V h* per frequency and ear
    through a Cholesky factorization of the Hermitian system; no explicit
    matrix inverse is formed.

    Raises
    ------
    SingularSystem
        If the regularized matrix is not positive definite at some bin
        (possible only with sigma_n_sq = 0 and rank-deficient steering).
    """
    ensure_shared_grid(V, h)
    if fov is not None:
        V, h = apply_fov(V, h, fov)
    weights = _solve_ls_weights(V.data, h.data, noise.ratio)
    return BsmFilterBank(
        freq_axis=V.freq_axis, weights=weights, criterion="LS", noise=noise,
        fov=fov, source_distance_design=V.source_distance)


def _magnitude_error(Vf: np.ndarray, c: np.ndarray, hmag: np.ndarray,
                     href_energy: float) -> float:
    """Normalized magnitude error || |V^T c*| - |h| ||^2 / || |h| ||^2."""
    g = Vf.T @ c.conj()
    return float(np.sum((np.abs(g) - hmag) ** 2) / href_energy)


def _magls_bin(Vf, cho, hmag, seeds, max_iter, tol, history=None):
    """Variable-exchange iteration at one bin; returns (c, converged).

    Each pass replaces the target phase with the phase of the current
    response, then re-solves the ridge system. Descent is enforced on the
    normalized magnitude error: a pass that would increase it ends the
    iteration with the best iterate kept, so the recorded error sequence is
    non-increasing.
    """
    href_energy = float(np.sum(hmag ** 2))
    if href_energy == 0.0:
        c = np.zeros(Vf.shape[0], dtype=np.complex128)
        if history is not None:
            history.append(0.0)
        return c, True
    # seed with whichever candidate already fits the magnitudes best
    # (the previous bin's solution for phase continuity, or this bin's LS)
    errs = [_magnitude_error(Vf, c, hmag, href_energy) for c in seeds]
    best = int(np.argmin(errs))
    c_cur, obj_cur = seeds[best], errs[best]
    if history is not None:
        history.append(obj_cur)
    converged = False
    for _ in range(max_iter):
        g = Vf.T @ c_cur.conj()
        target = hmag * np.exp(1j * np.angle(g))
        c_new = cho_solve(cho, Vf @ target.conj(), check_finite=False)
        obj_new = _magnitude_error(Vf, c_new, hmag, href_energy)
        if obj_new > obj_cur:
            converged = True          # exchange stopped helping; keep best
            break
        rel = (obj_cur - obj_new) / max(obj_cur, np.finfo(float).tiny)
        c_cur, obj_cur = c_new, obj_new
        if history is not None:
            history.append(obj_cur)
        if rel < tol:
            converged = True
            break
    return c_cur, converged


def design_magls(V: SteeringSet, h: HrtfSet, noise: NoiseModel,
                 sched: AlphaSchedule = DEFAULT_SCHEDULE,
                 *, fov: FovSpec | None = None, max_iter: int = 100,
                 tol: float = 1e-6, record_history: bool = False) -> BsmFilterBank:
    """Magnitude least-squares filter bank.

    Bins below ``sched.lo_hz`` keep the LS solution unchanged. From the
    cutoff upward, bins are swept in ascending order; each bin runs a
    variable-exchange iteration (phase update + ridge solve) seeded for
    phase continuity with the previous bin's converged solution (the LS
    solution seeds the first swept bin). Iteration stops when the relative
    objective change drops below ``tol`` or after ``max_iter`` passes; bins
    that hit the cap are flagged in ``magls_converged`` and reported once
    through a :class:`NoConvergence` warning, keeping the best iterate.

    With ``record_history=True`` the per-iteration magnitude-error sequence
    of every swept (bin, ear) is kept in ``magls_history``.
    """
    ensure_shared_grid(V, h)
    if fov is not None:
        V, h = apply_fov(V, h, fov)
    lam = noise.ratio
    ls = _solve_ls_weights(V.data, h.data, lam)
    weights = ls.copy()
    F = V.freq_axis.n_bins
    converged = np.ones((F, 2), dtype=bool)
    history: dict[tuple[int, int], list[float]] = {} if record_history else None
    swept = np.nonzero(V.freq_axis.frequencies >= sched.lo_hz)[0]
    if swept.size:
        factors = {int(f): _ridge_factor(V.data[f], lam, int(f)) for f in swept}
        hmags = np.abs(h.data)
        first = int(swept[0])
        for ear in (0, 1):
            c_prev = ls[first - 1, ear] if first > 0 else ls[first, ear]
            for f in swept:
                f = int(f)
                hist = history.setdefault((f, ear), []) if record_history else None
                c, ok = _magls_bin(
                    V.data[f], factors[f], hmags[f, ear],
                    seeds=(c_prev, ls[f, ear]), max_iter=max_iter, tol=tol,
                    history=hist)
                weights[f, ear] = c
                converged[f, ear] = ok
                c_prev = c
    if not np.isfinite(weights).all():
        raise SingularSystem("non-finite MagLS solution")
    n_bad = int((~converged).sum())
    if n_bad:
        warnings.warn(
            f"MagLS hit the {max_iter}-iteration cap at {n_bad} (bin, ear) "
            f"cells; best iterates kept", NoConvergence, stacklevel=2)
    return BsmFilterBank(
        freq_axis=V.freq_axis, weights=weights, criterion="MagLS", noise=noise,
        fov=fov, source_distance_design=V.source_distance,
        magls_cutoff_hz=sched.lo_hz, magls_converged=converged,
        magls_history=history)


def design_mixed(V: SteeringSet, h: HrtfSet, noise: NoiseModel,
                 sched: AlphaSchedule = DEFAULT_SCHEDULE,
                 *, fov: FovSpec | None = None, mode: str = "blend",
                 max_iter: int = 100, tol: float = 1e-6) -> BsmFilterBank:
    """Mixed-criterion filter bank.

    The rendered filter blends the two designs per bin,
    ``alpha(f) c_LS + (1 - alpha(f)) c_MagLS``, so it equals the LS design
    below 800 Hz and the MagLS design above 1500 Hz, with a continuous
    crossfade between. ``mode="switch"`` instead picks the LS design
    wherever alpha(f) >= 0.5 and the MagLS design elsewhere (hard
    per-band switch, no blending).
    """
    if mode not in ("blend", "switch"):
        raise ValueError(f"mode must be 'blend' or 'switch', got {mode!r}")
    ensure_shared_grid(V, h)
    if fov is not None:
        V, h = apply_fov(V, h, fov)
    mag = design_magls(V, h, noise, sched, max_iter=max_iter, tol=tol)
    ls = _solve_ls_weights(V.data, h.data, noise.ratio)
    a = alpha_weight(V.freq_axis.frequencies, sched)[:, None, None]
    if mode == "blend":
        weights = a * ls + (1.0 - a) * mag.weights
    else:
        weights = np.where(a >= 0.5, ls, mag.weights)
    return BsmFilterBank(
        freq_axis=V.freq_axis, weights=weights, criterion="Mixed", noise=noise,
        fov=fov, source_distance_design=V.source_distance,
        magls_cutoff_hz=sched.lo_hz, magls_converged=mag.magls_converged)
