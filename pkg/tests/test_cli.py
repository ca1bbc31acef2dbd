"""End-to-end checks of the command line, driven in-process via main()."""
import csv
import math
from pathlib import Path

import numpy as np
import pytest

from bsmkit import io as bsm_io
from bsmkit.cli import _worker_count, main
from bsmkit.core import HrtfSet, SteeringSet
from bsmkit.design import BsmFilterBank
from bsmkit.scene import read_wav, write_wav


# at nfft=128 the bin spacing is 375 Hz, so the continuation seeding leaves
# a few magnitude-matching cells at the iteration cap; that aggregated
# warning is expected here and irrelevant to the command plumbing under test
pytestmark = pytest.mark.filterwarnings("ignore:MagLS hit the")


def run(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small generated pair plus a designed filter, shared read-only."""
    ws = tmp_path_factory.mktemp("cli")
    assert run("gen-steering", "--grid", "ring:16", "--nfft", 128,
               "--distance", 0.5, "--out", ws / "v.bsmd") == 0
    assert run("gen-steering", "--kind", "hrtf", "--grid", "ring:16",
               "--nfft", 128, "--distance", 0.5, "--out", ws / "h.bsmd") == 0
    assert run("design", "--steering", ws / "v.bsmd", "--hrtf", ws / "h.bsmd",
               "--out", ws / "c.bsmd") == 0
    return ws


class TestGenSteering:
    def test_builtin_glasses_positions(self, tmp_path):
        out = tmp_path / "v.bsmd"
        assert run("gen-steering", "--grid", "ring:4", "--nfft", 16,
                   "--out", out) == 0
        V = bsm_io.load_dataset(out)
        assert isinstance(V, SteeringSet)
        by_label = dict(zip(V.geometry.labels, V.geometry.positions))
        np.testing.assert_allclose(by_label["nose"], [0.101, -0.017, -0.005])
        assert len(V.geometry.labels) == 5

    def test_distance_lands_in_manifest(self, tmp_path):
        out = tmp_path / "v.bsmd"
        assert run("gen-steering", "--grid", "ring:4", "--nfft", 16,
                   "--distance", 0.15, "--out", out) == 0
        assert bsm_io.load_manifest(out)["source_distance"] == 0.15

    def test_ring_72_grid(self, tmp_path):
        out = tmp_path / "v.bsmd"
        assert run("gen-steering", "--grid", "ring:72", "--nfft", 16,
                   "--out", out) == 0
        V = bsm_io.load_dataset(out)
        assert len(V.grid) == 72
        steps = np.diff(V.grid.phis)
        np.testing.assert_allclose(steps, math.radians(5.0))

    def test_plane_wave_source_model(self, tmp_path):
        out = tmp_path / "v.bsmd"
        assert run("gen-steering", "--grid", "ring:4", "--nfft", 16,
                   "--distance", "planewave", "--out", out) == 0
        assert bsm_io.load_dataset(out).source_distance == "planewave"

    def test_hrtf_kind_gives_two_channels(self, tmp_path):
        out = tmp_path / "h.bsmd"
        assert run("gen-steering", "--kind", "hrtf", "--grid", "ring:4",
                   "--nfft", 16, "--out", out) == 0
        h = bsm_io.load_dataset(out)
        assert isinstance(h, HrtfSet)
        assert h.data.shape[1] == 2

    def test_flags_recorded_for_provenance(self, tmp_path):
        out = tmp_path / "v.bsmd"
        assert run("gen-steering", "--grid", "ring:4", "--nfft", 16,
                   "--distance", 0.7, "--out", out) == 0
        flags = bsm_io.load_manifest(out)["meta"]["flags"]
        assert flags["distance"] == 0.7
        assert flags["grid"] == "ring:4"
        assert flags["nfft"] == 16

    def test_bad_distance_is_usage_error(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            run("gen-steering", "--distance", "-1", "--out", tmp_path / "x")
        assert exc.value.code == 2

    def test_source_inside_array_is_usage_error(self, tmp_path):
        assert run("gen-steering", "--grid", "ring:4", "--nfft", 16,
                   "--distance", 0.05, "--out", tmp_path / "x.bsmd") == 2


class TestDesign:
    def test_defaults_mixed_at_20_db(self, workspace):
        manifest = bsm_io.load_manifest(workspace / "c.bsmd")
        assert manifest["criterion"] == "Mixed"
        assert manifest["sigma_n_sq"] == pytest.approx(10.0 ** -2)
        assert manifest["meta"]["flags"]["snr_db"] == 20.0

    def test_mixed_equals_ls_below_crossover(self, workspace, tmp_path):
        out = tmp_path / "ls.bsmd"
        assert run("design", "--steering", workspace / "v.bsmd", "--hrtf",
                   workspace / "h.bsmd", "--criterion", "ls",
                   "--out", out) == 0
        ls = bsm_io.load_dataset(out)
        mixed = bsm_io.load_dataset(workspace / "c.bsmd")
        low = ls.freq_axis.frequencies < 800.0
        np.testing.assert_array_equal(mixed.weights[low], ls.weights[low])

    def test_fov_spec_round_trips(self, workspace, tmp_path):
        out = tmp_path / "fov.bsmd"
        assert run("design", "--steering", workspace / "v.bsmd", "--hrtf",
                   workspace / "h.bsmd", "--fov", "45:45:0.2",
                   "--out", out) == 0
        fov = bsm_io.load_manifest(out)["fov"]
        assert fov["beta"] == 0.2
        assert fov["az_halfwidth"] == pytest.approx(math.pi / 4)

    def test_grid_mismatch_is_data_error(self, workspace, tmp_path):
        other = tmp_path / "h8.bsmd"
        assert run("gen-steering", "--kind", "hrtf", "--grid", "ring:8",
                   "--nfft", 128, "--distance", 0.5, "--out", other) == 0
        assert run("design", "--steering", workspace / "v.bsmd",
                   "--hrtf", other, "--out", tmp_path / "c.bsmd") == 3

    def test_swapped_containers_are_data_error(self, workspace, tmp_path):
        assert run("design", "--steering", workspace / "h.bsmd",
                   "--hrtf", workspace / "v.bsmd",
                   "--out", tmp_path / "c.bsmd") == 3

    def test_missing_input_file_is_usage_error(self, workspace, tmp_path,
                                               capsys):
        assert run("design", "--steering", tmp_path / "nope.bsmd",
                   "--hrtf", workspace / "h.bsmd",
                   "--out", tmp_path / "c.bsmd") == 2
        err = capsys.readouterr().err
        assert "nope.bsmd" in err
        assert "Traceback" not in err


class TestEvaluate:
    def test_writes_both_csvs(self, workspace, tmp_path):
        prefix = tmp_path / "report"
        assert run("evaluate", "--filter", workspace / "c.bsmd",
                   "--steering-eval", workspace / "v.bsmd",
                   "--hrtf-eval", workspace / "h.bsmd",
                   "--out-prefix", prefix) == 0
        with open(f"{prefix}.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 65            # nfft 128 -> 65 bins
        assert set(rows[0]) == set(bsm_io.FREQUENCY_COLUMNS)
        with open(f"{prefix}_directions.csv", newline="") as fh:
            drows = list(csv.DictReader(fh))
        assert len(drows) == 2 * 16       # ild + itd per direction
        assert {r["metric"] for r in drows} == {"ild", "itd"}
        assert {r["region_tag"] for r in drows} == {"all"}

    def test_region_restriction(self, workspace, tmp_path):
        prefix = tmp_path / "fov_report"
        assert run("evaluate", "--filter", workspace / "c.bsmd",
                   "--steering-eval", workspace / "v.bsmd",
                   "--hrtf-eval", workspace / "h.bsmd",
                   "--region", "in-fov", "--out-prefix", prefix) == 0
        with open(f"{prefix}_directions.csv", newline="") as fh:
            drows = list(csv.DictReader(fh))
        # ring:16 has nodes every 22.5 deg; +/-45 inclusive keeps 5 of them
        assert len(drows) == 2 * 5
        assert {r["region_tag"] for r in drows} == {"in-fov"}
        azimuths = {float(r["az_deg"]) for r in drows}
        assert all(a <= 45.0 or a >= 315.0 for a in azimuths)

    def test_rotation_runs_on_ring_grid(self, workspace, tmp_path):
        prefix = tmp_path / "rot"
        assert run("evaluate", "--filter", workspace / "c.bsmd",
                   "--steering-eval", workspace / "v.bsmd",
                   "--hrtf-eval", workspace / "h.bsmd",
                   "--rotation-deg", 45.0, "--out-prefix", prefix) == 0
        base = tmp_path / "base"
        assert run("evaluate", "--filter", workspace / "c.bsmd",
                   "--steering-eval", workspace / "v.bsmd",
                   "--hrtf-eval", workspace / "h.bsmd",
                   "--out-prefix", base) == 0
        rotated = (tmp_path / "rot.csv").read_bytes()
        unrotated = (tmp_path / "base.csv").read_bytes()
        assert rotated != unrotated       # the mismatch must show up

    def test_axis_mismatch_is_data_error(self, workspace, tmp_path):
        other = tmp_path / "v256.bsmd"
        assert run("gen-steering", "--grid", "ring:16", "--nfft", 256,
                   "--distance", 0.5, "--out", other) == 0
        assert run("evaluate", "--filter", workspace / "c.bsmd",
                   "--steering-eval", other,
                   "--hrtf-eval", workspace / "h.bsmd",
                   "--out-prefix", tmp_path / "r") == 3

    def test_corrupt_container_is_data_error(self, workspace, tmp_path):
        bad = tmp_path / "bad.bsmd"
        blob = bytearray((workspace / "v.bsmd").read_bytes())
        blob[-3] ^= 0xFF
        bad.write_bytes(bytes(blob))
        assert run("evaluate", "--filter", workspace / "c.bsmd",
                   "--steering-eval", bad,
                   "--hrtf-eval", workspace / "h.bsmd",
                   "--out-prefix", tmp_path / "r") == 3


class TestSweep:
    def sweep_args(self, out_dir, **overrides):
        base = {"--distances": "0.5,1.0", "--criteria": "ls",
                "--grid": "ring:8", "--nfft": 128, "--out-dir": out_dir}
        base.update(overrides)
        argv = ["sweep"]
        for key, value in base.items():
            argv += [key, value]
        return argv

    def read_summary(self, out_dir):
        with open(out_dir / "summary.csv", newline="") as fh:
            return list(csv.DictReader(fh))

    def test_summary_and_cell_outputs(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BSMKIT_THREADS", "2")
        out_dir = tmp_path / "sweep"
        assert run(*self.sweep_args(out_dir)) == 0
        rows = self.read_summary(out_dir)
        assert [r["distance_m"] for r in rows] == ["0.5", "1"]
        assert all(r["status"] == "ok" for r in rows)
        assert all(float(r["eps_ls_l_avg"]) >= 0.0 for r in rows)
        for tag in ("d0.5_rot0_ls_betanone", "d1_rot0_ls_betanone"):
            for suffix in ("steering.bsmd", "hrtf.bsmd", "filter.bsmd",
                           ".csv", "_directions.csv"):
                sep = "" if suffix.startswith((".", "_")) else "_"
                assert (out_dir / f"cell_{tag}{sep}{suffix}").exists()

    def test_cells_match_standalone_evaluate(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BSMKIT_THREADS", "1")
        out_dir = tmp_path / "sweep"
        assert run(*self.sweep_args(out_dir, **{"--distances": "0.5",
                                                "--rotations": "45"})) == 0
        cell = out_dir / "cell_d0.5_rot45_ls_betanone"
        prefix = tmp_path / "standalone"
        assert run("evaluate", "--filter", f"{cell}_filter.bsmd",
                   "--steering-eval", f"{cell}_steering.bsmd",
                   "--hrtf-eval", f"{cell}_hrtf.bsmd",
                   "--rotation-deg", 45, "--out-prefix", prefix) == 0
        assert Path(f"{cell}.csv").read_bytes() == Path(
            f"{prefix}.csv").read_bytes()
        assert Path(f"{cell}_directions.csv").read_bytes() == Path(
            f"{prefix}_directions.csv").read_bytes()

    def test_empty_criteria_is_usage_error(self, tmp_path):
        assert run(*self.sweep_args(tmp_path / "s", **{"--criteria": ""})) == 2

    def test_unknown_criterion_is_usage_error(self, tmp_path):
        assert run(*self.sweep_args(tmp_path / "s",
                                    **{"--criteria": "ls,umls"})) == 2

    def test_bad_design_distance_is_usage_error(self, tmp_path):
        assert run(*self.sweep_args(tmp_path / "s",
                                    **{"--design-distance": "near"})) == 2

    def test_failed_cells_are_marked_not_fatal(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BSMKIT_THREADS", "1")
        out_dir = tmp_path / "sweep"
        # 0.05 m sits inside the glasses frame; the 0.5 m cell still runs
        assert run(*self.sweep_args(out_dir,
                                    **{"--distances": "0.05,0.5"})) == 0
        rows = {r["distance_m"]: r for r in self.read_summary(out_dir)}
        assert rows["0.05"]["status"] == "failed:SourceInsideArray"
        assert rows["0.05"]["eps_mix_l_avg"] == ""
        assert rows["0.5"]["status"] == "ok"

    def test_fixed_design_distance_column(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BSMKIT_THREADS", "1")
        out_dir = tmp_path / "sweep"
        assert run(*self.sweep_args(out_dir,
                                    **{"--distances": "0.5",
                                       "--design-distance": "1.5"})) == 0
        rows = self.read_summary(out_dir)
        assert rows[0]["design_distance"] == "1.5"

    def test_worker_count_env_cap(self, monkeypatch):
        monkeypatch.setenv("BSMKIT_THREADS", "3")
        assert _worker_count(8) == 3
        assert _worker_count(2) == 2      # never more workers than cells
        monkeypatch.setenv("BSMKIT_THREADS", "not-a-number")
        assert _worker_count(1) == 1
        monkeypatch.delenv("BSMKIT_THREADS")
        assert _worker_count(4) >= 1


class TestRender:
    def test_silence_in_silence_out(self, workspace, tmp_path):
        mics = tmp_path / "mics.wav"
        write_wav(mics, 48000.0, np.zeros((600, 5)))
        out = tmp_path / "out.wav"
        assert run("render", "--filter", workspace / "c.bsmd",
                   "--mics", mics, "--out", out) == 0
        _, data = read_wav(out)
        assert data.shape == (600, 2)
        np.testing.assert_array_equal(data, 0.0)

    def test_synth_scene_respects_headroom(self, workspace, tmp_path):
        out = tmp_path / "out.wav"
        assert run("render", "--filter", workspace / "c.bsmd",
                   "--steering", workspace / "v.bsmd",
                   "--mics", "synth:az=30,el=0,dur=0.05", "--out", out) == 0
        _, data = read_wav(out)
        peak_dbfs = 20.0 * math.log10(np.max(np.abs(data)))
        assert peak_dbfs == pytest.approx(-12.0, abs=0.01)

    def test_deterministic_given_seed(self, workspace, tmp_path):
        args = ("render", "--filter", workspace / "c.bsmd",
                "--steering", workspace / "v.bsmd",
                "--mics", "synth:az=0,el=0,dur=0.05,kind=noise")
        a, b, c = (tmp_path / n for n in ("a.wav", "b.wav", "c.wav"))
        assert run(*args, "--seed", 7, "--out", a) == 0
        assert run(*args, "--seed", 7, "--out", b) == 0
        assert run(*args, "--seed", 8, "--out", c) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()

    def test_tone_source(self, workspace, tmp_path):
        out = tmp_path / "tone.wav"
        assert run("render", "--filter", workspace / "c.bsmd",
                   "--steering", workspace / "v.bsmd",
                   "--mics", "synth:az=0,el=0,dur=0.05,kind=tone,f=3000",
                   "--encoding", "pcm16", "--out", out) == 0
        rate, data = read_wav(out)
        assert rate == 48000.0
        assert np.max(np.abs(data)) > 0.0

    def test_sample_rate_mismatch(self, workspace, tmp_path):
        mics = tmp_path / "mics.wav"
        write_wav(mics, 44100.0, np.zeros((600, 5)))
        assert run("render", "--filter", workspace / "c.bsmd",
                   "--mics", mics, "--out", tmp_path / "out.wav") == 3

    def test_channel_count_mismatch(self, workspace, tmp_path):
        mics = tmp_path / "mics.wav"
        write_wav(mics, 48000.0, np.zeros((600, 2)))
        assert run("render", "--filter", workspace / "c.bsmd",
                   "--mics", mics, "--out", tmp_path / "out.wav") == 3

    def test_synth_without_steering_is_usage_error(self, workspace, tmp_path):
        assert run("render", "--filter", workspace / "c.bsmd",
                   "--mics", "synth:az=0,el=0",
                   "--out", tmp_path / "out.wav") == 2

    def test_unknown_synth_kind_is_usage_error(self, workspace, tmp_path):
        assert run("render", "--filter", workspace / "c.bsmd",
                   "--steering", workspace / "v.bsmd",
                   "--mics", "synth:kind=chirp",
                   "--out", tmp_path / "out.wav") == 2

    def test_non_numeric_synth_value_is_usage_error(self, workspace,
                                                    tmp_path, capsys):
        assert run("render", "--filter", workspace / "c.bsmd",
                   "--steering", workspace / "v.bsmd",
                   "--mics", "synth:az=",
                   "--out", tmp_path / "out.wav") == 2
        assert "az=''" in capsys.readouterr().err
