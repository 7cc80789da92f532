import json
import subprocess
import sys
from datetime import datetime

import numpy as np
import pytest

import rollstab
from rollstab.cli import main
from rollstab import GridSpec, RegimeConfig, generate, write_rollout
from rollstab.synth import config_to_dict
from conftest import make_series


def run_cli(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def synth_files(tmp_path_factory):
    """Pre-generated small rollouts shared across CLI tests."""
    d = tmp_path_factory.mktemp("data")
    pred = d / "pred.rgf"
    ref = d / "ref.rgf"
    assert run_cli("synth", "--regime", "STABLE", "--horizon-days", 90,
                   "--seed", "3", "--grid", "16x240", "-o", pred) == 0
    assert run_cli("synth", "--regime", "STABLE", "--horizon-days", 800,
                   "--seed", "3", "--grid", "16x240", "-o", ref) == 0
    return {"dir": d, "pred": pred, "ref": ref}


class TestSynthCommand:
    def test_writes_rollout_and_labels(self, tmp_path):
        out = tmp_path / "run.rgf"
        labels = tmp_path / "labels.json"
        rc = run_cli("synth", "--regime", "BLOWUP", "--delta", "0.1",
                     "--onset-days", "65", "--horizon-days", "120",
                     "--seed", "7", "--grid", "8x128", "-o", out,
                     "--labels", labels)
        assert rc == 0
        doc = json.loads(labels.read_text())
        assert doc["regime"] == "BLOWUP"
        assert doc["blowup_window"][0] == 65.0
        assert "manifest" in doc
        r = rollstab.read_rollout(out)
        assert r.n_time == 481

    def test_byte_deterministic(self, tmp_path):
        out = tmp_path / "a.rgf"
        argv = ("synth", "--regime", "DRIFT", "--tau-days", "70",
                "--horizon-days", "90", "--seed", "11", "--grid", "8x64",
                "-o", out)
        assert run_cli(*argv) == 0
        first = out.read_bytes()
        assert run_cli(*argv) == 0
        assert out.read_bytes() == first

    def test_regime_config_file(self, tmp_path):
        cfg = RegimeConfig(regime="STABLE", grid=GridSpec.regular(8, 64), seed=2)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config_to_dict(cfg)))
        out = tmp_path / "r.rgf"
        assert run_cli("synth", "--regime-config", cfg_path,
                       "--horizon-days", "60", "-o", out) == 0
        assert rollstab.read_rollout(out).grid.n_lon == 64


class TestSpectraCommand:
    def test_csv_output_and_determinism(self, tmp_path, synth_files):
        a = tmp_path / "a.csv"
        argv = ("spectra", "--input", synth_files["pred"], "--variable", "T2m",
                "--daily", "-o", a)
        assert run_cli(*argv) == 0
        first = a.read_bytes()
        assert run_cli(*argv) == 0
        assert a.read_bytes() == first
        lines = a.read_text().splitlines()
        assert lines[0].startswith("# rollstab")
        header = [l for l in lines if not l.startswith("#")][0]
        assert header == "timestamp,band_large,band_medium,band_small"

    def test_full_dump(self, tmp_path, synth_files):
        out = tmp_path / "bands.csv"
        full = tmp_path / "full.csv"
        assert run_cli("spectra", "--input", synth_files["pred"],
                       "--variable", "T2m", "-o", out,
                       "--full-output", full) == 0
        head = [l for l in full.read_text().splitlines() if not l.startswith("#")][0]
        assert head.startswith("timestamp,k0,k1,")

    def test_unknown_variable_exit_2(self, tmp_path, synth_files):
        assert run_cli("spectra", "--input", synth_files["pred"],
                       "--variable", "Zonk", "-o", tmp_path / "x.csv") == 2


class TestBlowupCommand:
    def test_from_rgf(self, tmp_path, synth_files):
        out = tmp_path / "b.json"
        assert run_cli("blowup", "--input", synth_files["pred"],
                       "--variable", "T2m", "-o", out) == 0
        doc = json.loads(out.read_text())
        assert doc["censored"] is True
        assert doc["manifest"]["subcommand"] == "blowup"

    def test_from_csv_series(self, tmp_path):
        t = np.arange(200 * 4)
        ts = (np.datetime64("2021-01-01", "s")
              + t * np.timedelta64(21600, "s"))
        vals = np.exp(0.2 * np.clip(t / 4.0 - 60.0, 0, None))
        from rollstab.gridio import write_series_csv

        mn, mx = tmp_path / "min.csv", tmp_path / "max.csv"
        write_series_csv(mn, ts, vals)
        write_series_csv(mx, ts, vals)
        out = tmp_path / "res.json"
        assert run_cli("blowup", "--min-csv", mn, "--max-csv", mx, "-o", out) == 0
        doc = json.loads(out.read_text())
        assert abs(doc["blowup_day"] - 60.0) <= 1.0

    def test_short_series_exit_3(self, tmp_path):
        ts = (np.datetime64("2021-01-01", "s")
              + np.arange(8) * np.timedelta64(21600, "s"))
        from rollstab.gridio import write_series_csv

        mn = tmp_path / "min.csv"
        write_series_csv(mn, ts, np.ones(8))
        assert run_cli("blowup", "--min-csv", mn, "--max-csv", mn,
                       "-o", tmp_path / "r.json") == 3


class TestSeasonalityCommand:
    def test_with_reference_and_envelope_reuse(self, tmp_path, synth_files):
        out = tmp_path / "s.json"
        env = tmp_path / "env.json"
        assert run_cli("seasonality", "--input", synth_files["pred"],
                       "--variable", "T2m", "--reference", synth_files["ref"],
                       "--save-envelope", env, "-o", out) == 0
        doc = json.loads(out.read_text())
        assert doc["censored"] is True
        out2 = tmp_path / "s2.json"
        assert run_cli("seasonality", "--input", synth_files["pred"],
                       "--variable", "T2m", "--envelope", env, "-o", out2) == 0
        assert (json.loads(out2.read_text())["seasonality_loss_day"]
                == doc["seasonality_loss_day"])

    def test_missing_climatology_exit_2(self, tmp_path, synth_files):
        assert run_cli("seasonality", "--input", synth_files["pred"],
                       "--variable", "T2m", "-o", tmp_path / "x.json") == 2


class TestSmallscaleCommand:
    def test_unresolved_band_exit_3(self, tmp_path, synth_files):
        # 240-longitude grid cannot resolve wavelengths below 250 km
        assert run_cli("smallscale", "--input", synth_files["pred"],
                       "--reference", synth_files["ref"], "--variable", "T2m",
                       "-o", tmp_path / "x.json") == 3

    def test_fine_grid_ratios(self, tmp_path):
        pred = tmp_path / "p.rgf"
        ref = tmp_path / "r.rgf"
        for seed, path in ((1, pred), (2, ref)):
            assert run_cli("synth", "--regime", "STABLE", "--horizon-days", 60,
                           "--seed", seed, "--grid", "16x384", "-o", path) == 0
        out = tmp_path / "ss.json"
        assert run_cli("smallscale", "--input", pred, "--reference", ref,
                       "--variable", "T2m", "-o", out) == 0
        doc = json.loads(out.read_text())
        assert 0.5 < doc["ratio_vs_reference"] < 2.0


class TestCycleRmseCommand:
    def test_identical_is_zero(self, tmp_path):
        grid = GridSpec.regular(8, 64)
        data = np.random.default_rng(0).standard_normal((365 * 4, 1, 8, 64))
        r = make_series(grid, data, start=datetime(2021, 1, 1))
        p = tmp_path / "a.rgf"
        write_rollout(r, p)
        out = tmp_path / "rmse.json"
        assert run_cli("cycle-rmse", "--input", p, "--reference", p,
                       "--variable", "T2m", "-o", out) == 0
        assert json.loads(out.read_text())["seasonal_cycle_rmse"] < 1e-6


class TestPerturbCommand:
    def test_synth_adapter_roundtrip(self, tmp_path, synth_files):
        cfg = RegimeConfig(regime="STABLE", grid=GridSpec.regular(8, 64), seed=4)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config_to_dict(cfg)))
        out = tmp_path / "rollout.rgf"
        rc = run_cli("perturb", "--adapter", f"synth:{cfg_path}",
                     "--kind", "white", "--k", "1", "--seed", "3",
                     "--stats-from", synth_files["pred"], "--steps", "8",
                     "-o", out)
        assert rc == 0
        r = rollstab.read_rollout(out)
        assert r.n_time == 9
        assert r.attrs["perturbation"]["kind"] == "WHITE"

    def test_missing_stats_exit_2(self, tmp_path):
        cfg = RegimeConfig(regime="STABLE", grid=GridSpec.regular(8, 64))
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config_to_dict(cfg)))
        assert run_cli("perturb", "--adapter", f"synth:{cfg_path}",
                       "--kind", "white", "--steps", "4",
                       "-o", tmp_path / "x.rgf") == 2


class TestExtremesCommand:
    def test_per_region_outputs(self, tmp_path, synth_files):
        outdir = tmp_path / "ext"
        regions = tmp_path / "regions.json"
        regions.write_text(json.dumps([
            {"name": "tropics", "lat_min": -20, "lat_max": 20,
             "lon_min": 0, "lon_max": 360},
        ]))
        rc = run_cli("extremes", "--input", synth_files["pred"],
                     "--reference", synth_files["ref"], "--variable", "T2m",
                     "--regions", regions, "--outdir", outdir)
        assert rc == 0
        assert (outdir / "tropics_qq.csv").exists()
        assert (outdir / "tropics_exceedance.csv").exists()
        assert (outdir / "tropics_events.csv").exists()
        summary = json.loads((outdir / "summary.json").read_text())
        assert "tropics" in summary["regions"]
        exc = (outdir / "tropics_exceedance.csv").read_text().splitlines()
        rows = [l for l in exc if not l.startswith("#")]
        assert rows[0] == "side,level,threshold,model_fraction,reference_fraction,ratio"
        assert len(rows) == 1 + 200 + 200  # header + hot P80..P99.9 + cold P0.1..P20


class TestMemorizeCommand:
    def test_ratios_csv(self, tmp_path):
        grid = GridSpec.regular(8, 16)
        rng = np.random.default_rng(5)
        train = make_series(grid, rng.standard_normal((200, 1, 8, 16)),
                            start=datetime(1990, 1, 1), step_seconds=86400)
        roll = make_series(grid, rng.standard_normal((5, 1, 8, 16)),
                           start=datetime(1990, 3, 1), step_seconds=86400)
        tp, rp = tmp_path / "train.rgf", tmp_path / "roll.rgf"
        write_rollout(train, tp)
        write_rollout(roll, rp)
        out = tmp_path / "ratios.csv"
        assert run_cli("memorize", "--rollout", rp, "--index", tp, "-o", out) == 0
        rows = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert rows[0] == "timestamp,ratio,d1,d2,first_neighbor,second_neighbor"
        assert len(rows) == 6


class TestReportCommand:
    def test_stable_run_fully_censored(self, tmp_path, synth_files):
        out = tmp_path / "report.json"
        csv = tmp_path / "report.csv"
        rc = run_cli("report", "--prediction", synth_files["pred"],
                     "--reference", synth_files["ref"], "--name", "stable",
                     "-o", out, "--csv", csv)
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["blowup"]["T2m"]["censored"] is True
        assert doc["seasonality"]["T2m"]["censored"] is True
        assert doc["small_scale"]["T2m"] is None  # 240-lon grid: unresolved
        body = [l for l in csv.read_text().splitlines() if not l.startswith("#")]
        assert body[0] == "run,metric,T2m"
        assert body[1] == "stable,blowup_days,>90"
        assert body[3] == "stable,small_scale,unresolved"

    def test_byte_deterministic(self, tmp_path, synth_files):
        out = tmp_path / "r.json"
        argv = ("report", "--prediction", synth_files["pred"],
                "--reference", synth_files["ref"], "-o", out)
        assert run_cli(*argv) == 0
        first = out.read_bytes()
        assert run_cli(*argv) == 0
        assert out.read_bytes() == first

    def test_blowup_run_detected_in_label_window(self, tmp_path, synth_files):
        pred = tmp_path / "blow.rgf"
        assert run_cli("synth", "--regime", "BLOWUP", "--delta", "0.1",
                       "--onset-days", "150", "--horizon-days", "730",
                       "--seed", "7", "--grid", "16x240", "-o", pred) == 0
        out = tmp_path / "rep.json"
        assert run_cli("report", "--prediction", pred,
                       "--reference", synth_files["ref"], "-o", out) == 0
        doc = json.loads(out.read_text())
        day = doc["blowup"]["T2m"]["day"]
        assert 150.0 <= day <= 170.0

    def test_no_shared_variables_exit_2(self, tmp_path, synth_files):
        other = tmp_path / "other.rgf"
        assert run_cli("synth", "--regime", "STABLE", "--horizon-days", 90,
                       "--variables", "Q100", "--grid", "16x240",
                       "-o", other) == 0
        assert run_cli("report", "--prediction", other,
                       "--reference", synth_files["pred"],
                       "-o", tmp_path / "x.json") == 2


class TestAggregateCommand:
    def test_aggregates_reports(self, tmp_path, synth_files):
        reports = []
        for i, days in enumerate((90, 90)):
            rep = tmp_path / f"rep{i}.json"
            assert run_cli("report", "--prediction", synth_files["pred"],
                           "--reference", synth_files["ref"],
                           "--name", f"run{i}", "-o", rep) == 0
            reports.append(rep)
        out = tmp_path / "agg.json"
        csv = tmp_path / "agg.csv"
        assert run_cli("aggregate", *reports, "-o", out, "--csv", csv) == 0
        doc = json.loads(out.read_text())
        entry = doc["metrics"]["blowup_day"]["T2m"]
        assert entry["mean"] == 90.0 and entry["std"] == 0.0


class TestEverySubcommandByteStable:
    def test_rerun_reproduces_bytes(self, tmp_path, synth_files):
        """Each subcommand, run twice with one argv, emits identical bytes."""
        d = tmp_path
        pred, ref = synth_files["pred"], synth_files["ref"]
        grid = GridSpec.regular(8, 16)
        rng = np.random.default_rng(5)
        train = make_series(grid, rng.standard_normal((120, 1, 8, 16)),
                            start=datetime(1990, 1, 1), step_seconds=86400)
        roll = make_series(grid, rng.standard_normal((3, 1, 8, 16)),
                           start=datetime(1990, 2, 1), step_seconds=86400)
        write_rollout(train, d / "train.rgf")
        write_rollout(roll, d / "roll.rgf")
        cfg = RegimeConfig(regime="STABLE", grid=GridSpec.regular(8, 64), seed=4)
        (d / "cfg.json").write_text(json.dumps(config_to_dict(cfg)))
        (d / "regions.json").write_text(json.dumps(
            [{"name": "tropics", "lat_min": -20, "lat_max": 20,
              "lon_min": 0, "lon_max": 360}]))
        rep = d / "rep.json"
        assert run_cli("report", "--prediction", pred, "--reference", ref,
                       "-o", rep) == 0

        year = make_series(grid, rng.standard_normal((365 * 4, 1, 8, 16)),
                           start=datetime(2021, 1, 1))
        write_rollout(year, d / "year.rgf")
        cases = {
            "synth": (["synth", "--regime", "STABLE", "--horizon-days", "60",
                       "--grid", "8x64", "--seed", "2", "-o", d / "s.rgf",
                       "--labels", d / "s.json"],
                      [d / "s.rgf", d / "s.json"]),
            "cycle-rmse": (["cycle-rmse", "--input", d / "year.rgf",
                            "--reference", d / "year.rgf", "--variable", "T2m",
                            "-o", d / "c.json"], [d / "c.json"]),
            "spectra": (["spectra", "--input", pred, "--variable", "T2m",
                         "-o", d / "sp.csv"], [d / "sp.csv"]),
            "blowup": (["blowup", "--input", pred, "--variable", "T2m",
                        "-o", d / "b.json"], [d / "b.json"]),
            "seasonality": (["seasonality", "--input", pred, "--variable",
                             "T2m", "--reference", ref, "-o", d / "se.json"],
                            [d / "se.json"]),
            "perturb": (["perturb", "--adapter", f"synth:{d / 'cfg.json'}",
                         "--kind", "white", "--k", "1", "--seed", "3",
                         "--stats-from", pred, "--steps", "4",
                         "-o", d / "p.rgf"], [d / "p.rgf"]),
            "extremes": (["extremes", "--input", pred, "--reference", ref,
                          "--variable", "T2m", "--regions", d / "regions.json",
                          "--outdir", d / "ext"],
                         [d / "ext" / "tropics_qq.csv",
                          d / "ext" / "summary.json"]),
            "memorize": (["memorize", "--rollout", d / "roll.rgf", "--index",
                          d / "train.rgf", "-o", d / "m.csv"], [d / "m.csv"]),
            "report": (["report", "--prediction", pred, "--reference", ref,
                        "-o", d / "r.json", "--csv", d / "r.csv"],
                       [d / "r.json", d / "r.csv"]),
            "aggregate": (["aggregate", str(rep), str(rep), "-o", d / "a.json",
                           "--csv", d / "a.csv"], [d / "a.json", d / "a.csv"]),
        }
        for name, (argv, outputs) in cases.items():
            assert run_cli(*argv) == 0, name
            first = [p.read_bytes() for p in outputs]
            assert run_cli(*argv) == 0, name
            second = [p.read_bytes() for p in outputs]
            assert first == second, f"{name} output not byte-stable"


class TestCliSurface:
    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for sub in ("synth", "spectra", "blowup", "seasonality", "smallscale",
                    "cycle-rmse", "perturb", "extremes", "memorize",
                    "aggregate", "report"):
            assert sub in out

    def test_subcommand_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for flag in ("--regime", "--horizon-days", "--seed", "--labels"):
            assert flag in out

    def test_invalid_flag_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--no-such-flag", "1", "-o", "x.rgf"])
        assert exc.value.code == 2

    def test_missing_file_exit_2(self, tmp_path):
        assert run_cli("spectra", "--input", tmp_path / "absent.rgf",
                       "--variable", "T2m", "-o", tmp_path / "x.csv") == 2

    def test_config_file_sets_defaults(self, tmp_path):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps({"horizon-days": 60, "grid": "8x64",
                                    "seed": 9}))
        out = tmp_path / "from_config.rgf"
        assert run_cli("synth", "--config", conf, "-o", out) == 0
        r = rollstab.read_rollout(out)
        assert r.n_time == 241
        assert r.grid.n_lon == 64

    def test_entry_point_runs(self):
        res = subprocess.run([sys.executable, "-m", "rollstab.cli", "--version"],
                             capture_output=True, text=True)
        assert res.returncode == 0
        assert "rollstab" in res.stdout
