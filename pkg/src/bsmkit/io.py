"""Persistent formats: the dataset container and CSV metric reports.

Container layout (all integers little-endian):

====================  ========================================================
bytes [0:8]           magic ``b"BSMDSET1"``
bytes [8:16]          uint64 byte length L of the manifest
bytes [16:16+L]       manifest, UTF-8 JSON (indent=2, sorted keys)
bytes [16+L:]         payload: complex128 as interleaved little-endian
                      float64 (real, imag), row-major over [F][channel][Q]
====================  ========================================================

The manifest records schema_version, kind (steering / hrtf / filterbank),
dims, the frequency axis, the source model, the direction grid and
microphone geometry inline, a convention note, and the SHA-256 of the
payload bytes. Loads verify, in order: magic and manifest shape
(SchemaUnknown), payload byte length against dims (DimsMismatch), then the
checksum (ChecksumMismatch) — a truncated file reports its real problem
rather than a checksum failure.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from .core import (
    ArrayGeometry,
    BsmError,
    Direction,
    DirectionGrid,
    FrequencyAxis,
    HrtfSet,
    NoiseModel,
    SteeringSet,
)
from .design import BsmFilterBank, FovSpec
from .metrics import MetricsReport

MAGIC = b"BSMDSET1"
SCHEMA_VERSION = 1
_HEADER_LEN = 16
_CONVENTION_NOTE = (
    "head-centered right-handed frame, +x forward, +y left, +z up; "
    "inclination from +z, azimuth from +x toward +y; channel axis is "
    "microphones (steering), left/right ears (hrtf), or ears (filterbank, "
    "Q axis holding per-mic weights); payload row-major [F][channel][Q]")


class SchemaUnknown(BsmError):
    """The file is not a recognizable container of a supported version."""


class DimsMismatch(BsmError):
    """Payload byte length disagrees with the manifest dims."""


class ChecksumMismatch(BsmError):
    """Payload bytes do not hash to the manifest checksum."""


def _grid_to_json(grid: DirectionGrid) -> dict:
    return {"name": grid.name,
            "thetas": grid.thetas.tolist(),
            "phis": grid.phis.tolist()}


def _grid_from_json(d: dict) -> DirectionGrid:
    return DirectionGrid(thetas=np.asarray(d["thetas"]),
                         phis=np.asarray(d["phis"]),
                         name=d.get("name", "custom"))


def _geometry_to_json(geom: ArrayGeometry) -> dict:
    return {"positions": geom.positions.tolist(), "labels": list(geom.labels)}


def _geometry_from_json(d: dict) -> ArrayGeometry:
    return ArrayGeometry(positions=np.asarray(d["positions"]),
                         labels=tuple(d["labels"]))


def _fov_to_json(fov: FovSpec | None):
    if fov is None:
        return None
    return {"az_halfwidth": fov.az_halfwidth, "el_halfwidth": fov.el_halfwidth,
            "center_theta": fov.center.theta, "center_phi": fov.center.phi,
            "beta": fov.beta}


def _fov_from_json(d) -> FovSpec | None:
    if d is None:
        return None
    return FovSpec(az_halfwidth=d["az_halfwidth"],
                   el_halfwidth=d["el_halfwidth"],
                   center=Direction(d["center_theta"], d["center_phi"]),
                   beta=d["beta"])


def _axis_entries(axis: FrequencyAxis) -> dict:
    return {"sample_rate": axis.sample_rate, "fft_size": axis.fft_size,
            "speed_of_sound": axis.c_sound}


def _axis_from_manifest(m: dict) -> FrequencyAxis:
    return FrequencyAxis(sample_rate=m["sample_rate"], fft_size=m["fft_size"],
                         c_sound=m["speed_of_sound"])


def save_dataset(dataset, path, meta: dict | None = None) -> None:
    """Write a steering set, HRTF set, or filter bank as a container file.

    ``meta`` (JSON-serializable) is stored verbatim in the manifest — the
    CLI uses it to embed the generating flag set.
    """
    if isinstance(dataset, SteeringSet):
        kind, payload = "steering", dataset.data
        extra = {"source_distance": dataset.source_distance,
                 "grid": _grid_to_json(dataset.grid),
                 "geometry": _geometry_to_json(dataset.geometry)}
    elif isinstance(dataset, HrtfSet):
        kind, payload = "hrtf", dataset.data
        extra = {"source_distance": dataset.source_distance,
                 "grid": _grid_to_json(dataset.grid)}
    elif isinstance(dataset, BsmFilterBank):
        kind, payload = "filterbank", dataset.weights
        conv = dataset.magls_converged
        extra = {"criterion": dataset.criterion,
                 "sigma_s_sq": dataset.noise.sigma_s_sq,
                 "sigma_n_sq": dataset.noise.sigma_n_sq,
                 "fov": _fov_to_json(dataset.fov),
                 "source_distance": dataset.source_distance_design,
                 "magls_cutoff_hz": dataset.magls_cutoff_hz,
                 "magls_unconverged": None if conv is None
                 else int((~conv).sum())}
    else:
        raise TypeError(f"cannot save a {type(dataset).__name__}")

    payload = np.ascontiguousarray(payload, dtype="<c16")
    raw = payload.tobytes()
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "dims": list(payload.shape),
        **_axis_entries(dataset.freq_axis),
        "convention": _CONVENTION_NOTE,
        "payload_sha256": hashlib.sha256(raw).hexdigest(),
        **extra,
    }
    if meta is not None:
        manifest["meta"] = meta
    mbytes = json.dumps(manifest, indent=2, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(mbytes).to_bytes(8, "little"))
        fh.write(mbytes)
        fh.write(raw)


def load_dataset(path):
    """Read a container written by :func:`save_dataset`.

    Returns the matching domain object (SteeringSet, HrtfSet, or
    BsmFilterBank). Raises SchemaUnknown / DimsMismatch /
    ChecksumMismatch as documented in the module header.
    """
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER_LEN or blob[:8] != MAGIC:
        raise SchemaUnknown(f"{path}: not a dataset container (bad magic)")
    mlen = int.from_bytes(blob[8:16], "little")
    if len(blob) < _HEADER_LEN + mlen:
        raise SchemaUnknown(f"{path}: manifest truncated")
    try:
        manifest = json.loads(blob[16:16 + mlen])
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaUnknown(f"{path}: manifest is not valid JSON") from exc
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise SchemaUnknown(
            f"{path}: unsupported schema_version "
            f"{manifest.get('schema_version')!r}")
    kind = manifest.get("kind")
    if kind not in ("steering", "hrtf", "filterbank"):
        raise SchemaUnknown(f"{path}: unknown kind {kind!r}")

    dims = tuple(manifest["dims"])
    raw = blob[_HEADER_LEN + mlen:]
    expected = int(np.prod(dims)) * 16
    if len(raw) != expected:
        raise DimsMismatch(
            f"{path}: payload holds {len(raw)} bytes, dims {list(dims)} "
            f"require {expected}")
    if hashlib.sha256(raw).hexdigest() != manifest["payload_sha256"]:
        raise ChecksumMismatch(f"{path}: payload checksum failed")
    data = np.frombuffer(raw, dtype="<c16").reshape(dims).copy()

    axis = _axis_from_manifest(manifest)
    if kind == "steering":
        return SteeringSet(geometry=_geometry_from_json(manifest["geometry"]),
                           grid=_grid_from_json(manifest["grid"]),
                           freq_axis=axis,
                           source_distance=manifest["source_distance"],
                           data=data)
    if kind == "hrtf":
        return HrtfSet(grid=_grid_from_json(manifest["grid"]),
                       freq_axis=axis,
                       source_distance=manifest["source_distance"],
                       data=data)
    noise = NoiseModel(sigma_s_sq=manifest["sigma_s_sq"],
                       sigma_n_sq=manifest["sigma_n_sq"])
    return BsmFilterBank(freq_axis=axis, weights=data,
                         criterion=manifest["criterion"], noise=noise,
                         fov=_fov_from_json(manifest.get("fov")),
                         source_distance_design=manifest.get("source_distance"),
                         magls_cutoff_hz=manifest.get("magls_cutoff_hz"))


def load_manifest(path) -> dict:
    """Read only the JSON manifest of a container (no payload checks)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER_LEN)
        if len(head) < _HEADER_LEN or head[:8] != MAGIC:
            raise SchemaUnknown(f"{path}: not a dataset container (bad magic)")
        mlen = int.from_bytes(head[8:16], "little")
        try:
            return json.loads(fh.read(mlen))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise SchemaUnknown(f"{path}: manifest is not valid JSON") from exc


# --------------------------------------------------------------------------
# CSV reports
# --------------------------------------------------------------------------

FREQUENCY_COLUMNS = ("f_hz", "eps_ls_l", "eps_ls_r", "eps_magls_l",
                     "eps_magls_r", "eps_mix_l", "eps_mix_r", "xi_null_l",
                     "xi_null_r")
DIRECTION_COLUMNS = ("az_deg", "el_deg", "metric", "ref", "rep", "abs_err",
                     "region_tag")


def _fmt(v) -> str:
    return format(float(v), ".12g")


def direction_csv_path(path) -> Path:
    """Per-direction CSV path derived from the frequency CSV path."""
    p = Path(path)
    return p.with_name(p.stem + "_directions" + (p.suffix or ".csv"))


def export_report_csv(report: MetricsReport, path) -> tuple[Path, Path]:
    """Write a report as two CSV files; returns their paths.

    ``path`` receives one row per frequency with the error curves; the
    per-direction ILD/ITD table goes to a sibling file with
    ``_directions`` appended to the stem. Numbers are written with 12
    significant digits, enough for a float round trip at the precision the
    metrics are meaningful.
    """
    path = Path(path)
    dpath = direction_csv_path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FREQUENCY_COLUMNS)
        for i, f in enumerate(np.asarray(report.frequencies_hz)):
            w.writerow([_fmt(f),
                        _fmt(report.eps_ls[i, 0]), _fmt(report.eps_ls[i, 1]),
                        _fmt(report.eps_magls[i, 0]), _fmt(report.eps_magls[i, 1]),
                        _fmt(report.eps_mix[i, 0]), _fmt(report.eps_mix[i, 1]),
                        _fmt(report.xi_null[i, 0]), _fmt(report.xi_null[i, 1])])
    with open(dpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIRECTION_COLUMNS)
        for row in report.direction_rows:
            w.writerow([_fmt(row.az_deg), _fmt(row.el_deg), row.metric,
                        _fmt(row.ref), _fmt(row.rep), _fmt(row.abs_err),
                        row.region_tag])
    return path, dpath
