"""Command-line front end.

Subcommands::

    bsmkit gen-steering   generate steering / ear-transfer containers
    bsmkit design         design a filter bank from steering + HRTF sets
    bsmkit evaluate       compute error metrics, write CSV reports
    bsmkit sweep          batch design/evaluate over condition grids
    bsmkit render         filter microphone audio to a stereo WAV

Angles are degrees on the command line and radians internally. Exit
codes: 0 success, 2 flag/usage error (including a source placed inside
the array), 3 incompatible or corrupt datasets, 4 numerical failure.
The environment variable ``BSMKIT_THREADS`` caps the sweep worker pool.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io as bsm_io
from .core import (
    ArrayGeometry,
    Direction,
    DirectionGrid,
    FrequencyAxis,
    HrtfSet,
    IncompatibleDatasets,
    NoiseModel,
    PLANE_WAVE,
    SteeringSet,
    ensure_shared_grid,
    glasses_array,
    is_plane_wave,
    ring_grid,
)
from .design import (
    AlphaSchedule,
    BsmFilterBank,
    FovSpec,
    SingularSystem,
    design_ls,
    design_magls,
    design_mixed,
    in_fov_mask,
)
from .lebedev import lebedev_2702
from .metrics import (
    AllBinsExcluded,
    DirectionRow,
    MetricsReport,
    ZeroReference,
    eps_ls,
    eps_magls,
    eps_mixed,
    ild,
    ild_error,
    itd,
    make_erb_filterbank,
    null_space_projection,
)
from .scene import BadFrameConfig, read_wav, render_time_domain, rotate_hrtf, write_wav
from .steering import (
    SourceInsideArray,
    gen_free_field_hrtf,
    gen_plane_wave_steering,
    gen_point_source_steering,
)

RENDER_HEADROOM_DBFS = -12.0


# --------------------------------------------------------------------------
# flag parsing helpers
# --------------------------------------------------------------------------

def _parse_distance(text: str):
    if text.strip().lower() == PLANE_WAVE:
        return PLANE_WAVE
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{text!r} is neither a distance in meters nor 'planewave'")
    if value <= 0.0:
        raise argparse.ArgumentTypeError("distance must be positive")
    return value


def _parse_grid(text: str) -> DirectionGrid:
    if text == "lebedev-2702":
        return lebedev_2702()
    if text.startswith("ring:"):
        try:
            n = int(text.split(":", 1)[1])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad ring size in {text!r}")
        if n < 1:
            raise argparse.ArgumentTypeError("ring size must be >= 1")
        return ring_grid(n)
    path = Path(text)
    if not path.exists():
        raise argparse.ArgumentTypeError(
            f"{text!r} is not lebedev-2702, ring:N, or a grid file")
    spec = json.loads(path.read_text())
    return DirectionGrid(thetas=np.asarray(spec["thetas"]),
                         phis=np.asarray(spec["phis"]),
                         name=spec.get("name", path.stem))


def _parse_geometry(text: str) -> ArrayGeometry:
    if text == "builtin-glasses":
        return glasses_array()
    path = Path(text)
    if not path.exists():
        raise argparse.ArgumentTypeError(
            f"{text!r} is not builtin-glasses or a geometry file")
    spec = json.loads(path.read_text())
    return ArrayGeometry(positions=np.asarray(spec["positions"]),
                         labels=tuple(spec.get("labels", ())) or None)


def _parse_fov(text: str) -> FovSpec | None:
    if text.strip().lower() == "none":
        return None
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"FoV must be AZ:EL:BETA in degrees (e.g. 45:45:0.2), got {text!r}")
    try:
        az, el, beta = (float(p) for p in parts)
        return FovSpec(az_halfwidth=math.radians(az),
                       el_halfwidth=math.radians(el), beta=beta)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad FoV spec {text!r}: {exc}")


def _float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _flags_dict(args: argparse.Namespace) -> dict:
    skip = {"func"}
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        if isinstance(value, (ArrayGeometry, DirectionGrid)):
            value = getattr(value, "name", type(value).__name__)
        elif isinstance(value, FovSpec):
            value = (f"{math.degrees(value.az_halfwidth):g}:"
                     f"{math.degrees(value.el_halfwidth):g}:{value.beta:g}")
        elif not isinstance(value, (str, int, float, bool, list, type(None))):
            value = str(value)
        out[key] = value
    return out


# --------------------------------------------------------------------------
# gen-steering
# --------------------------------------------------------------------------

def cmd_gen_steering(args) -> int:
    axis = FrequencyAxis(sample_rate=args.fs, fft_size=args.nfft)
    if args.kind == "steering":
        if is_plane_wave(args.distance):
            dataset = gen_plane_wave_steering(args.geometry, args.grid, axis)
        else:
            dataset = gen_point_source_steering(
                args.geometry, args.grid, args.distance, axis)
    else:
        dataset = gen_free_field_hrtf(
            args.grid, args.distance, axis, ear_offset=args.ear_offset)
    bsm_io.save_dataset(dataset, args.out, meta={"flags": _flags_dict(args)})
    print(f"wrote {args.kind} container: {args.out}")
    return 0


# --------------------------------------------------------------------------
# design
# --------------------------------------------------------------------------

def _design_filter(V: SteeringSet, h: HrtfSet, criterion: str,
                   noise: NoiseModel, fov: FovSpec | None,
                   mixed_mode: str) -> BsmFilterBank:
    if criterion == "ls":
        return design_ls(V, h, noise, fov=fov)
    if criterion == "magls":
        return design_magls(V, h, noise, fov=fov)
    return design_mixed(V, h, noise, fov=fov, mode=mixed_mode)


def cmd_design(args) -> int:
    V = bsm_io.load_dataset(args.steering)
    h = bsm_io.load_dataset(args.hrtf)
    if not isinstance(V, SteeringSet) or not isinstance(h, HrtfSet):
        raise IncompatibleDatasets(
            "--steering must point to a steering container and --hrtf to an "
            "hrtf container")
    if args.rotation_deg:
        h, _ = rotate_hrtf(h, math.radians(args.rotation_deg))
    noise = NoiseModel.from_snr_db(args.snr_db)
    bank = _design_filter(V, h, args.criterion, noise, args.fov, args.mixed_mode)
    bsm_io.save_dataset(bank, args.out, meta={"flags": _flags_dict(args)})
    print(f"wrote {bank.criterion} filter bank ({bank.n_mics} mics, "
          f"{bank.freq_axis.n_bins} bins): {args.out}")
    return 0


# --------------------------------------------------------------------------
# evaluate
# --------------------------------------------------------------------------

def _check_filter_compat(bank: BsmFilterBank, V: SteeringSet) -> None:
    if bank.freq_axis != V.freq_axis:
        raise IncompatibleDatasets(
            f"filter frequency axis {bank.freq_axis} does not match the "
            f"evaluation steering axis {V.freq_axis}")
    if bank.n_mics != V.n_mics:
        raise IncompatibleDatasets(
            f"filter has {bank.n_mics} microphone weights, steering has "
            f"{V.n_mics} microphones")


def _region_indices(grid: DirectionGrid, region: str,
                    fov: FovSpec | None) -> np.ndarray:
    if region == "all":
        return np.arange(len(grid))
    mask = in_fov_mask(grid, fov if fov is not None else FovSpec())
    idx = np.nonzero(mask if region == "in-fov" else ~mask)[0]
    if idx.size == 0:
        raise IncompatibleDatasets(f"no directions fall in region {region!r}")
    return idx


def _direction_rows(V: SteeringSet, h: HrtfSet, bank: BsmFilterBank,
                    region: str) -> list[DirectionRow]:
    """Per-direction ILD/ITD of a unit source, reference vs rendered."""
    axis = V.freq_axis
    bank_erb = make_erb_filterbank(axis)
    fs = axis.sample_rate
    # rendered ear spectra for a unit source at each direction: c^H v_q
    rendered = np.einsum("fem,fmq->feq", bank.weights.conj(), V.data)
    rows = []
    for qi in range(len(V.grid)):
        d = V.grid[qi]
        az_deg = math.degrees(d.phi)
        el_deg = 90.0 - math.degrees(d.theta)   # elevation above the horizon
        ref_pair = (h.data[:, 0, qi], h.data[:, 1, qi])
        rep_pair = (rendered[:, 0, qi], rendered[:, 1, qi])
        _, ild_ref = ild(*ref_pair, bank_erb)
        _, ild_rep = ild(*rep_pair, bank_erb)
        rows.append(DirectionRow(
            az_deg=az_deg, el_deg=el_deg, metric="ild", ref=ild_ref,
            rep=ild_rep, abs_err=ild_error(ref_pair, rep_pair, bank_erb),
            region_tag=region))
        n = axis.fft_size
        ref_t = (np.fft.irfft(ref_pair[0], n=n), np.fft.irfft(ref_pair[1], n=n))
        rep_t = (np.fft.irfft(rep_pair[0], n=n), np.fft.irfft(rep_pair[1], n=n))
        itd_ref = itd(*ref_t, fs)
        itd_rep = itd(*rep_t, fs)
        rows.append(DirectionRow(
            az_deg=az_deg, el_deg=el_deg, metric="itd", ref=itd_ref,
            rep=itd_rep, abs_err=abs(itd_ref - itd_rep), region_tag=region))
    return rows


def _build_report(bank: BsmFilterBank, V: SteeringSet, h: HrtfSet,
                  rotation_deg: float, region: str,
                  meta: dict | None = None) -> MetricsReport:
    ensure_shared_grid(V, h)
    _check_filter_compat(bank, V)
    if rotation_deg:
        h, residuals = rotate_hrtf(h, math.radians(rotation_deg))
        rot_residual = float(np.max(residuals))
    else:
        rot_residual = 0.0
    idx = _region_indices(V.grid, region, bank.fov)
    V = V.take_directions(idx)
    h = h.take_directions(idx)

    freqs = V.freq_axis.frequencies
    sched = AlphaSchedule(lo_hz=bank.magls_cutoff_hz or 800.0)
    e_ls = np.stack([eps_ls(V, bank, h, bank.noise, ear) for ear in (0, 1)], axis=1)
    e_mag = np.stack([eps_magls(V, bank, h, ear) for ear in (0, 1)], axis=1)
    e_mix = eps_mixed(e_ls, e_mag, freqs[:, None], sched)
    xi = np.empty_like(e_ls)
    for f in range(freqs.shape[0]):
        for ear in (0, 1):
            xi[f, ear] = null_space_projection(V.data[f], h.data[f, ear])
    report_meta = {"rotation_deg": rotation_deg,
                   "rotation_max_residual_rad": rot_residual,
                   "region_tag": region, "criterion": bank.criterion,
                   "n_directions": int(idx.size)}
    if meta:
        report_meta.update(meta)
    return MetricsReport(
        frequencies_hz=freqs, eps_ls=e_ls, eps_magls=e_mag, eps_mix=e_mix,
        xi_null=xi, direction_rows=_direction_rows(V, h, bank, region),
        meta=report_meta)


def _evaluate_to_csv(bank: BsmFilterBank, V: SteeringSet, h: HrtfSet,
                     rotation_deg: float, region: str, out_prefix,
                     meta: dict | None = None) -> MetricsReport:
    report = _build_report(bank, V, h, rotation_deg, region, meta=meta)
    bsm_io.export_report_csv(report, Path(str(out_prefix) + ".csv"))
    return report


def cmd_evaluate(args) -> int:
    bank = bsm_io.load_dataset(args.filter)
    V = bsm_io.load_dataset(args.steering_eval)
    h = bsm_io.load_dataset(args.hrtf_eval)
    if not isinstance(bank, BsmFilterBank) or not isinstance(V, SteeringSet) \
            or not isinstance(h, HrtfSet):
        raise IncompatibleDatasets(
            "--filter / --steering-eval / --hrtf-eval must point to "
            "filterbank / steering / hrtf containers")
    _evaluate_to_csv(bank, V, h, args.rotation_deg, args.region,
                     args.out_prefix, meta={"flags": _flags_dict(args)})
    print(f"wrote {args.out_prefix}.csv and "
          f"{bsm_io.direction_csv_path(str(args.out_prefix) + '.csv')}")
    return 0


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class _SweepCell:
    distance: float
    rotation_deg: float
    criterion: str
    fov_beta: float | None

    @property
    def tag(self) -> str:
        beta = "none" if self.fov_beta is None else f"{self.fov_beta:g}"
        return (f"d{self.distance:g}_rot{self.rotation_deg:g}_"
                f"{self.criterion}_beta{beta}")


def _worker_count(n_cells: int) -> int:
    cap = os.environ.get("BSMKIT_THREADS")
    try:
        cap = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError:
        cap = os.cpu_count() or 1
    return max(1, min(n_cells, cap))


def _run_sweep_cell(cell: _SweepCell, args, axis: FrequencyAxis,
                    out_dir: Path) -> dict:
    V_eval = gen_point_source_steering(
        args.geometry, args.grid, cell.distance, axis)
    h_eval = gen_free_field_hrtf(
        args.grid, cell.distance, axis, ear_offset=args.ear_offset)
    if args.design_distance == "match":
        V_design, h_design = V_eval, h_eval
    else:
        d = float(args.design_distance)
        V_design = gen_point_source_steering(args.geometry, args.grid, d, axis)
        h_design = gen_free_field_hrtf(args.grid, d, axis,
                                       ear_offset=args.ear_offset)
    fov = None if cell.fov_beta is None else FovSpec(beta=cell.fov_beta)
    if args.design_rotation:
        h_design, _ = rotate_hrtf(h_design, math.radians(cell.rotation_deg))
    noise = NoiseModel.from_snr_db(args.snr_db)
    bank = _design_filter(V_design, h_design, cell.criterion, noise, fov,
                          args.mixed_mode)
    prefix = out_dir / f"cell_{cell.tag}"
    meta = {"flags": _flags_dict(args), "cell": cell.tag}
    bsm_io.save_dataset(V_eval, f"{prefix}_steering.bsmd", meta=meta)
    bsm_io.save_dataset(h_eval, f"{prefix}_hrtf.bsmd", meta=meta)
    bsm_io.save_dataset(bank, f"{prefix}_filter.bsmd", meta=meta)
    rotation = 0.0 if args.design_rotation else cell.rotation_deg
    report = _evaluate_to_csv(bank, V_eval, h_eval, rotation, args.region,
                              prefix, meta={"cell": cell.tag})
    avg_mix = report.band_average(report.eps_mix)
    avg_ls = report.band_average(report.eps_ls)
    avg_mag = report.band_average(report.eps_magls)
    return {"status": "ok",
            "eps_mix_l_avg": avg_mix[0], "eps_mix_r_avg": avg_mix[1],
            "eps_ls_l_avg": avg_ls[0], "eps_ls_r_avg": avg_ls[1],
            "eps_magls_l_avg": avg_mag[0], "eps_magls_r_avg": avg_mag[1]}


def cmd_sweep(args) -> int:
    if not args.criteria:
        raise argparse.ArgumentTypeError("criteria list must not be empty")
    for crit in args.criteria:
        if crit not in ("ls", "magls", "mixed"):
            raise argparse.ArgumentTypeError(f"unknown criterion {crit!r}")
    if args.design_distance != "match":
        try:
            if float(args.design_distance) <= 0.0:
                raise ValueError
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"--design-distance must be 'match' or a positive number, "
                f"got {args.design_distance!r}")
    if not args.distances:
        raise argparse.ArgumentTypeError("distances list must not be empty")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    axis = FrequencyAxis(sample_rate=args.fs, fft_size=args.nfft)
    betas = [None if b is None else float(b) for b in args.fov_betas]
    cells = [_SweepCell(d, r, c, b)
             for d in args.distances for r in args.rotations
             for c in args.criteria for b in betas]

    results: dict[_SweepCell, dict] = {}

    def run(cell: _SweepCell) -> None:
        try:
            results[cell] = _run_sweep_cell(cell, args, axis, out_dir)
        except Exception as exc:          # partial-failure policy: mark, go on
            results[cell] = {"status": f"failed:{type(exc).__name__}"}

    with ThreadPoolExecutor(max_workers=_worker_count(len(cells))) as pool:
        list(pool.map(run, cells))

    summary = out_dir / "summary.csv"
    value_cols = ("eps_mix_l_avg", "eps_mix_r_avg", "eps_ls_l_avg",
                  "eps_ls_r_avg", "eps_magls_l_avg", "eps_magls_r_avg")
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("distance_m", "rotation_deg", "criterion", "fov_beta",
                    "design_distance", "status") + value_cols)
        for cell in cells:                 # deterministic order
            res = results[cell]
            row = [format(cell.distance, ".12g"),
                   format(cell.rotation_deg, ".12g"), cell.criterion,
                   "none" if cell.fov_beta is None
                   else format(cell.fov_beta, ".12g"),
                   str(args.design_distance), res["status"]]
            row += [format(res[k], ".12g") if k in res else "" for k in value_cols]
            w.writerow(row)
    n_ok = sum(1 for r in results.values() if r["status"] == "ok")
    print(f"swept {len(cells)} cells ({n_ok} ok) -> {summary}")
    return 0    # partial failures are marked in the summary, not fatal


# --------------------------------------------------------------------------
# render
# --------------------------------------------------------------------------

def _synth_mics(spec: str, V: SteeringSet, seed: int) -> np.ndarray:
    """Synthesize mic signals for 'synth:az=..,el=..,dur=..,kind=..,f=..'.

    A single source at the grid node nearest the given direction (azimuth
    and elevation in degrees, elevation 0 at the horizon) is convolved
    with each microphone's impulse response.
    """
    from scipy.signal import fftconvolve

    from .core import nearest_direction

    params = {}
    body = spec.split(":", 1)[1] if ":" in spec else ""
    for item in body.split(","):
        if item.strip():
            key, _, value = item.partition("=")
            params[key.strip()] = value.strip()

    def number(key, default):
        raw = params.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"bad synth spec: {key}={raw!r} is not a number") from None

    az = math.radians(number("az", 0.0))
    theta = math.radians(90.0 - number("el", 0.0))
    dur = number("dur", 1.0)
    kind = params.get("kind", "noise")
    axis = V.freq_axis
    n = max(int(round(dur * axis.sample_rate)), axis.fft_size)
    if kind == "noise":
        rng = np.random.default_rng(seed)
        src = rng.standard_normal(n)
    elif kind == "tone":
        f0 = number("f", 440.0)
        src = np.sin(2.0 * math.pi * f0 * np.arange(n) / axis.sample_rate)
    else:
        raise argparse.ArgumentTypeError(f"unknown synth kind {kind!r}")
    qi, _ = nearest_direction(V.grid, Direction(theta, az))
    impulses = np.fft.irfft(V.data[:, :, qi], n=axis.fft_size, axis=0)
    mics = fftconvolve(src[:, None], impulses, axes=0)[:n]
    return mics


def cmd_render(args) -> int:
    bank = bsm_io.load_dataset(args.filter)
    if not isinstance(bank, BsmFilterBank):
        raise IncompatibleDatasets("--filter must point to a filterbank container")
    fs = bank.freq_axis.sample_rate
    if args.mics.startswith("synth"):
        if not args.steering:
            raise argparse.ArgumentTypeError(
                "synthetic scenes need --steering for source propagation")
        V = bsm_io.load_dataset(args.steering)
        if not isinstance(V, SteeringSet):
            raise IncompatibleDatasets("--steering must be a steering container")
        _check_filter_compat(bank, V)
        mics = _synth_mics(args.mics, V, args.seed)
    else:
        rate, mics = read_wav(args.mics)
        if rate != fs:
            raise IncompatibleDatasets(
                f"mic WAV sample rate {rate:g} does not match the filter "
                f"bank rate {fs:g}")
        n_ch = 1 if mics.ndim == 1 else mics.shape[1]
        if n_ch != bank.n_mics:
            raise IncompatibleDatasets(
                f"mic WAV has {n_ch} channels, filter bank expects "
                f"{bank.n_mics}")
    stereo = render_time_domain(bank, mics)
    peak = float(np.max(np.abs(stereo))) if stereo.size else 0.0
    if peak > 0.0:
        stereo = stereo * (10.0 ** (RENDER_HEADROOM_DBFS / 20.0) / peak)
    write_wav(args.out, fs, stereo, encoding=args.encoding)
    print(f"wrote {args.out} ({stereo.shape[0]} samples, peak "
          f"{RENDER_HEADROOM_DBFS:g} dBFS)")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bsmkit",
        description="Binaural signal matching: filter design and evaluation "
                    "for arbitrary microphone arrays")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-steering",
                       help="generate a steering or ear-transfer container")
    p.add_argument("--geometry", type=_parse_geometry, default="builtin-glasses",
                   help="'builtin-glasses' or a JSON geometry file "
                        "(default: builtin-glasses)")
    p.add_argument("--grid", type=_parse_grid, default="lebedev-2702",
                   help="'lebedev-2702', 'ring:N', or a JSON grid file")
    p.add_argument("--distance", type=_parse_distance, default=1.5,
                   help="source distance in meters, or 'planewave' "
                        "(default: 1.5)")
    p.add_argument("--fs", type=float, default=48_000.0,
                   help="sample rate in Hz (default: 48000)")
    p.add_argument("--nfft", type=int, default=4096,
                   help="FFT size (default: 4096)")
    p.add_argument("--kind", choices=("steering", "hrtf"), default="steering",
                   help="'steering' for the mic array, 'hrtf' for the "
                        "free-field two-ear transfer proxy")
    p.add_argument("--ear-offset", type=float, default=0.09,
                   help="ear half-spacing in meters for --kind hrtf "
                        "(default: 0.09)")
    p.add_argument("--out", required=True, help="output container path")
    p.set_defaults(func=cmd_gen_steering)

    p = sub.add_parser("design", help="design a BSM filter bank")
    p.add_argument("--steering", required=True, help="steering container")
    p.add_argument("--hrtf", required=True, help="hrtf container")
    p.add_argument("--criterion", choices=("ls", "magls", "mixed"),
                   default="mixed", help="design criterion (default: mixed)")
    p.add_argument("--snr-db", type=float, default=20.0,
                   help="design SNR in dB (default: 20)")
    p.add_argument("--fov", type=_parse_fov, default=None,
                   help="AZ:EL:BETA in degrees (e.g. 45:45:0.2) or 'none'")
    p.add_argument("--rotation-deg", type=float, default=0.0,
                   help="rotate the design-target HRTFs by this azimuth "
                        "(listener head rotation during playback)")
    p.add_argument("--mixed-mode", choices=("blend", "switch"),
                   default="blend",
                   help="mixed criterion: per-bin blend (default) or hard "
                        "per-band switch")
    p.add_argument("--out", required=True, help="output filterbank path")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("evaluate", help="evaluate a filter bank, write CSVs")
    p.add_argument("--filter", required=True, help="filterbank container")
    p.add_argument("--steering-eval", required=True,
                   help="evaluation steering container (may differ from the "
                        "design distance)")
    p.add_argument("--hrtf-eval", required=True,
                   help="evaluation hrtf container")
    p.add_argument("--rotation-deg", type=float, default=0.0,
                   help="rotate the reference HRTFs before evaluation")
    p.add_argument("--region", choices=("all", "in-fov", "out-fov"),
                   default="all",
                   help="restrict metrics to a direction region "
                        "(default: all)")
    p.add_argument("--out-prefix", required=True,
                   help="writes PREFIX.csv and PREFIX_directions.csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep",
                       help="cartesian design/evaluate sweep with a summary CSV")
    p.add_argument("--distances", type=_float_list, required=True,
                   help="comma-separated evaluation distances in meters")
    p.add_argument("--rotations", type=_float_list, default=[0.0],
                   help="comma-separated rotation angles in degrees "
                        "(default: 0)")
    p.add_argument("--criteria", type=lambda s: [c for c in s.split(",") if c],
                   required=True, help="comma-separated criteria (ls,magls,mixed)")
    p.add_argument("--fov-betas",
                   type=lambda s: [None if b.strip().lower() == "none"
                                   else float(b)
                                   for b in s.split(",") if b.strip()],
                   default=[None],
                   help="comma-separated FoV betas, 'none' for unweighted "
                        "(default: none)")
    p.add_argument("--design-distance", default="match",
                   help="'match' designs at each evaluation distance; a "
                        "number fixes the design distance (e.g. 1.5 for the "
                        "far-field condition)")
    p.add_argument("--design-rotation", action="store_true",
                   help="apply rotations to the design HRTFs instead of the "
                        "evaluation reference")
    p.add_argument("--geometry", type=_parse_geometry, default="builtin-glasses")
    p.add_argument("--grid", type=_parse_grid, default="lebedev-2702")
    p.add_argument("--fs", type=float, default=48_000.0)
    p.add_argument("--nfft", type=int, default=4096)
    p.add_argument("--ear-offset", type=float, default=0.09)
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--mixed-mode", choices=("blend", "switch"), default="blend")
    p.add_argument("--region", choices=("all", "in-fov", "out-fov"),
                   default="all")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("render", help="render microphone audio to stereo WAV")
    p.add_argument("--filter", required=True, help="filterbank container")
    p.add_argument("--mics", required=True,
                   help="microphone WAV path, or "
                        "'synth:az=30,el=0,dur=1,kind=noise' for a "
                        "synthetic single-source scene")
    p.add_argument("--steering", default=None,
                   help="steering container (required for synthetic scenes)")
    p.add_argument("--seed", type=int, default=0,
                   help="RNG seed for synthetic sources (default: 0)")
    p.add_argument("--encoding", choices=("pcm16", "pcm24", "float32"),
                   default="float32", help="output WAV encoding")
    p.add_argument("--out", required=True, help="output WAV path")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as exc:
        print(f"bsmkit: {exc}", file=sys.stderr)
        return 2
    except SourceInsideArray as exc:
        print(f"bsmkit: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        # unreadable input / unwritable output named on the command line
        detail = (f"{exc.filename}: {exc.strerror}"
                  if exc.filename else str(exc))
        print(f"bsmkit: {detail}", file=sys.stderr)
        return 2
    except (IncompatibleDatasets, bsm_io.SchemaUnknown, bsm_io.DimsMismatch,
            bsm_io.ChecksumMismatch) as exc:
        print(f"bsmkit: {exc}", file=sys.stderr)
        return 3
    except (SingularSystem, AllBinsExcluded, ZeroReference,
            BadFrameConfig) as exc:
        print(f"bsmkit: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
