import json

import numpy as np
import pytest

import flockstab as fs
from flockstab.cli import (EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_OK, main)
from flockstab.jacobians import save_stationary

FAST_STEADY = {
    "N": 6,
    "seeds": {"base_seed": 8},
    "table1": {"refine_T": 60.0, "refine_dt": 2e-3},
}


def write_config(tmp_path, extra=None, name="config.json"):
    data = json.loads(json.dumps(FAST_STEADY))
    for key, value in (extra or {}).items():
        if isinstance(value, dict):
            data.setdefault(key, {}).update(value)
        else:
            data[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


class TestConfigHandling:
    def test_malformed_json_reports_location(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"N": 6,\n  "oops"\n}')
        code = main(["find-steady", "--config", str(bad),
                     "--out", str(tmp_path / "out")])
        assert code == EXIT_CONFIG
        err = capsys.readouterr().err
        assert "line" in err and "column" in err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"particles": 6}))
        assert main(["find-steady", "--config", str(cfg),
                     "--out", str(tmp_path / "out")]) == EXIT_CONFIG
        assert "unknown config key" in capsys.readouterr().err

    def test_zero_a_max_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"sweep": {"a_max": 0.0}})
        assert main(["perturb-sweep", "--config", str(cfg),
                     "--out", str(tmp_path / "out")]) == EXIT_CONFIG
        assert "a_max" in capsys.readouterr().err

    def test_flag_overrides_file(self, tmp_path):
        from flockstab.cli import build_run_config, build_parser
        args = build_parser().parse_args(
            ["find-steady", "--seed", "99", "--N", "7"])
        run = build_run_config({"N": 3}, args)
        assert run.N == 7
        assert run.base_seed == 99
        assert run.raw["seeds"]["base_seed"] == 99


class TestFindSteady:
    def test_single_particle_trivial(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"N": 1})
        out = tmp_path / "out"
        assert main(["find-steady", "--config", str(cfg),
                     "--out", str(out)]) == EXIT_OK
        record = json.loads((out / "steady.json").read_text())
        assert record["N"] == 1
        assert record["residual"] == 0.0

    def test_small_run_writes_state_and_echo(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["find-steady", "--config", str(cfg),
                     "--out", str(out)]) == EXIT_OK
        record = json.loads((out / "steady.json").read_text())
        assert record["N"] == 6
        assert record["residual"] < 1e-8
        echoed = json.loads((out / "config.json").read_text())
        assert echoed["N"] == 6
        config = fs.StationaryConfig.from_dict(record)
        spectrum = fs.symmetric_eigen(fs.assemble_G(config), kernel_tol=1e-6)
        assert spectrum.kernel_dim == 3

    def test_env_var_default_outdir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FLOCKSTAB_OUT", str(tmp_path / "envout"))
        cfg = write_config(tmp_path, {"N": 1})
        assert main(["find-steady", "--config", str(cfg)]) == EXIT_OK
        assert (tmp_path / "envout" / "steady.json").exists()


@pytest.fixture(scope="module")
def steady_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("steady")
    cfg = write_config(tmp)
    out = tmp / "out"
    assert main(["find-steady", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    return tmp, out / "steady.json"


class TestSpectrumCommand:
    def test_writes_both_spectra(self, steady_dir, tmp_path):
        tmp, steady = steady_dir
        cfg = write_config(tmp_path)
        out = tmp_path / "spec"
        assert main(["spectrum", "--config", str(cfg), "--steady", str(steady),
                     "--out", str(out)]) == EXIT_OK
        g = json.loads((out / "spectrum_G.json").read_text())
        fbb = json.loads((out / "spectrum_FBB.json").read_text())
        assert g["kernel_dim"] == 3
        assert fbb["kernel_dim"] == 4
        assert len(g["eigenvalues"]) == 12
        assert len(fbb["eigenvalues"]) == 24

    def test_corrupt_input_rejected(self, steady_dir, tmp_path, capsys):
        tmp, steady = steady_dir
        broken = tmp_path / "broken.json"
        text = steady.read_text()
        data = json.loads(text)
        data["positions"][0] += 0.5
        broken.write_text(json.dumps(data))
        cfg = write_config(tmp_path)
        assert main(["spectrum", "--config", str(cfg), "--steady", str(broken),
                     "--out", str(tmp_path / "o")]) == EXIT_CONFIG
        assert "checksum" in capsys.readouterr().err


class TestCheckHypotheses:
    def test_passes_on_good_state(self, steady_dir, tmp_path, capsys):
        tmp, steady = steady_dir
        cfg = write_config(tmp_path)
        out = tmp_path / "hyp"
        assert main(["check-hypotheses", "--config", str(cfg),
                     "--steady", str(steady), "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "hypotheses.json").read_text())
        assert report["all_pass"] is True
        console = capsys.readouterr().out
        assert "H1" in console and "lemma4" in console

    def test_collinear_input_fails_h4(self, tmp_path, capsys):
        pts = np.column_stack([np.linspace(0, 5, 6), np.zeros(6)]).ravel()
        config = fs.StationaryConfig(pts, 0.0, fs.morse(D=0.5))
        steady = tmp_path / "steady.json"
        save_stationary(steady, config)
        cfg = write_config(tmp_path)
        out = tmp_path / "hyp"
        code = main(["check-hypotheses", "--config", str(cfg),
                     "--steady", str(steady), "--out", str(out)])
        assert code == EXIT_HYPOTHESIS
        report = json.loads((out / "hypotheses.json").read_text())
        assert report["passes"]["H4"] is False


class TestPerturbSweep:
    SWEEP = {
        "potential": {"family": "morse", "C": 10.0 / 9.0, "ell": 0.75, "D": 0.5},
        "integrator": {"dt": 0.01, "T": 2.0},
        "sweep": {"n_sims": 6, "a_max": 1.0, "n_bins": 3},
    }

    def test_outputs_reproducible_byte_for_byte(self, steady_dir, tmp_path):
        tmp, steady = steady_dir
        cfg = write_config(tmp_path, self.SWEEP)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["perturb-sweep", "--config", str(cfg),
                         "--steady", str(steady), "--out", str(out)]) == EXIT_OK
            outs.append(out)
        for fname in ("records.csv", "stats.csv"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()

    def test_thread_count_does_not_change_output(self, steady_dir, tmp_path):
        tmp, steady = steady_dir
        cfg = write_config(tmp_path, self.SWEEP)
        out1 = tmp_path / "t1"
        out2 = tmp_path / "t2"
        assert main(["perturb-sweep", "--config", str(cfg), "--steady",
                     str(steady), "--out", str(out1), "--threads", "1"]) == EXIT_OK
        assert main(["perturb-sweep", "--config", str(cfg), "--steady",
                     str(steady), "--out", str(out2), "--threads", "2"]) == EXIT_OK
        assert (out1 / "records.csv").read_bytes() == \
            (out2 / "records.csv").read_bytes()

    def test_round_trip_from_echoed_config(self, steady_dir, tmp_path):
        tmp, steady = steady_dir
        cfg = write_config(tmp_path, self.SWEEP)
        out1 = tmp_path / "first"
        assert main(["perturb-sweep", "--config", str(cfg), "--steady",
                     str(steady), "--out", str(out1)]) == EXIT_OK
        out2 = tmp_path / "second"
        assert main(["perturb-sweep", "--config", str(out1 / "config.json"),
                     "--steady", str(steady), "--out", str(out2)]) == EXIT_OK
        assert (out1 / "records.csv").read_bytes() == \
            (out2 / "records.csv").read_bytes()
        assert (out1 / "stats.csv").read_bytes() == \
            (out2 / "stats.csv").read_bytes()


class TestTable1Command:
    def test_single_family_quick(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "t1"
        assert main(["reproduce-table1", "--config", str(cfg),
                     "--potential", "morse", "--out", str(out)]) == EXIT_OK
        lines = (out / "table1.csv").read_text().strip().split("\n")
        assert lines[0] == "potential,params,N,mu4,abs_mu3,D"
        assert len(lines) == 2
        fields = lines[1].split(",")
        assert fields[0] == "morse"
        assert float(fields[3]) < 0
        assert float(fields[4]) < 1e-6
