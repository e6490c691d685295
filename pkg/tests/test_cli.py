import json
import subprocess
import sys

import numpy as np
import pytest

from flipflow import io as fio
from flipflow.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, RunConfig, load_config, main
from flipflow.dynamics import State, g_star
from flipflow.errors import ConfigError
from flipflow.model import decompose, random_spd


def write_config(path, **fields):
    path.write_text(json.dumps(fields))
    return path


def read_bytes(folder):
    return {p.name: p.read_bytes() for p in sorted(folder.iterdir())}


@pytest.fixture
def sim_config(tmp_path):
    return write_config(
        tmp_path / "run.json",
        matrix={"kind": "random_spd", "n": 3, "seed": 7},
        t_end=300.0,
        seeds=[1, 2, 3],
        observables=["H", "r1_sq", "p1_sq", "q1_4"],
        trajectory_dt=0.5,
        events=True,
    )


class TestConfig:
    def test_defaults(self):
        cfg = load_config(None)
        assert isinstance(cfg, RunConfig)
        assert cfg.matrix["kind"] == "random_spd" and cfg.energy == 0.5

    def test_unknown_field(self, tmp_path):
        with pytest.raises(ConfigError, match="colour"):
            load_config(write_config(tmp_path / "c.json", colour="red"))

    def test_relative_paths(self, tmp_path):
        sub = tmp_path / "cfgs"
        sub.mkdir()
        cfg = load_config(write_config(sub / "c.json", matrix="v.json", initial_state="s.json"))
        assert cfg.matrix["path"] == str(sub / "v.json")
        assert cfg.initial_state == str(sub / "s.json")


class TestSpectrum:
    def test_chain2_relation(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", matrix={"kind": "harmonic_chain", "n": 2})
        assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_OK
        rep = json.loads((tmp_path / "spectrum.json").read_text())["admissibility"]
        assert rep["independence"] == "dependent"
        assert rep["relation"] in ([3, -1], [-3, 1])

    def test_diag_matrix_file(self, tmp_path):
        fio.write_matrix(tmp_path / "v.json", np.diag([1.0, 2.0]))
        code = main(["spectrum", "--matrix", str(tmp_path / "v.json"), "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        rep = json.loads((tmp_path / "spectrum.json").read_text())["admissibility"]
        assert rep["in_v_plus"] is False

    def test_malformed_matrix(self, tmp_path, capsys):
        (tmp_path / "v.json").write_text(json.dumps({"n": 2, "v": [1.0, 0.0, 0.0]}))
        code = main(["spectrum", "--matrix", str(tmp_path / "v.json"), "--out", str(tmp_path)])
        assert code == EXIT_CONFIG
        assert "'v'" in capsys.readouterr().err

    def test_missing_matrix(self, tmp_path):
        assert main(["spectrum", "--matrix", str(tmp_path / "gone.csv"), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_not_positive_definite(self, tmp_path):
        fio.write_matrix(tmp_path / "v.csv", np.diag([1.0, -2.0]))
        code = main(["spectrum", "--matrix", str(tmp_path / "v.csv"), "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_CONFIG


class TestSimulate:
    def test_outputs(self, sim_config, tmp_path):
        out = tmp_path / "o"
        assert main(["simulate", "--config", str(sim_config), "--out", str(out), "--quiet"]) == EXIT_OK
        rows = fio.read_results(out / "results.csv")
        assert len(rows) == 3 * 4
        assert {r["seed"] for r in rows} == {1, 2, 3}
        h_rows = [r for r in rows if r["observable"] == "H"]
        assert all(abs(r["estimate"] - 0.5) < 1e-12 for r in h_rows)
        traj = (out / "trajectory_seed1.csv").read_text().splitlines()
        assert traj[0] == "t,q1,q2,q3,p1,p2,p3"
        assert len(traj) == 1 + 600
        events = (out / "events_seed2.csv").read_text().splitlines()
        assert events[0] == "t_m,tau_m" and len(events) > 200

    def test_byte_identical(self, sim_config, tmp_path):
        for name in ("a", "b"):
            main(["simulate", "--config", str(sim_config), "--out", str(tmp_path / name), "--quiet"])
        main(["simulate", "--config", str(sim_config), "--out", str(tmp_path / "c"), "--quiet", "--workers", "3"])
        a = read_bytes(tmp_path / "a")
        assert a == read_bytes(tmp_path / "b") == read_bytes(tmp_path / "c")

    def test_zero_time_header_only(self, sim_config, tmp_path):
        out = tmp_path / "z"
        code = main(["simulate", "--config", str(sim_config), "--out", str(out), "--t-end", "0", "--quiet"])
        assert code == EXIT_OK
        assert (out / "results.csv").read_text() == "seed,T,observable,estimate,reference,abs_error\n"
        assert (out / "trajectory_seed1.csv").read_text() == "t,q1,q2,q3,p1,p2,p3\n"
        assert (out / "events_seed1.csv").read_text() == "t_m,tau_m\n"

    def test_seed_flag(self, sim_config, tmp_path):
        main(["simulate", "--config", str(sim_config), "--out", str(tmp_path / "s"), "--seed", "9", "--quiet"])
        assert {r["seed"] for r in fio.read_results(tmp_path / "s" / "results.csv")} == {9}

    def test_unknown_observable(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", observables=["r9_sq"], t_end=1.0)
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "valid names" in capsys.readouterr().err

    def test_empty_seeds(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", seeds=[], t_end=1.0)
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_bad_law(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", law={"kind": "exponential", "rate": -1}, t_end=1.0)
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_missing_initial_state(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", initial_state="absent.json", t_end=1.0)
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG


class TestSteer:
    @pytest.fixture
    def spec(self):
        return decompose(random_spd(3, 7))

    def test_from_gstar(self, tmp_path, spec):
        fio.write_state(tmp_path / "g.json", g_star(spec))
        code = main(["steer", "--from", str(tmp_path / "g.json"), "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        res = json.loads((tmp_path / "steer.json").read_text())
        assert res["flips_used"] == 0 and res["mode"] == "g_star"

    def test_to_gstar(self, tmp_path, spec):
        psi = State(np.zeros(3), spec.modes[:, 1])
        fio.write_state(tmp_path / "s.json", psi)
        code = main(["steer", "--from", str(tmp_path / "s.json"), "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        res = json.loads((tmp_path / "steer.json").read_text())
        assert res["final_error"] <= 0.05 and res["flips_used"] >= 1

    def test_different_energy(self, tmp_path, spec):
        fio.write_state(tmp_path / "a.json", g_star(spec))
        fio.write_state(tmp_path / "b.json", State(np.zeros(3), [2.0, 0.0, 0.0]))
        code = main(["steer", "--from", str(tmp_path / "a.json"), "--to", str(tmp_path / "b.json"),
                     "--out", str(tmp_path)])
        assert code == EXIT_CONFIG

    def test_missing_from(self, tmp_path):
        assert main(["steer", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_not_in_v_plus(self, tmp_path):
        fio.write_matrix(tmp_path / "v.json", np.diag([1.0, 2.0]))
        fio.write_state(tmp_path / "s.json", State([0.3, 0.0], [0.5, 0.5]))
        code = main(["steer", "--matrix", str(tmp_path / "v.json"), "--from", str(tmp_path / "s.json"),
                     "--out", str(tmp_path)])
        assert code == EXIT_CONFIG

    def test_horizon_too_short_is_numerical(self, tmp_path, spec):
        psi = State(np.zeros(3), spec.modes[:, 1])
        fio.write_state(tmp_path / "s.json", psi)
        cfg = write_config(tmp_path / "c.json", steer={"from": "s.json", "eps": 1e-9, "horizon": 1.0,
                                                       "grid": 10})
        assert main(["steer", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_NUMERICAL


class TestReport:
    def test_outputs_and_determinism(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.json",
            matrix={"kind": "random_spd", "n": 2, "seed": 24},
            t_end=2000.0,
            seeds=[0, 1],
            observables=["H", "r1_sq"],
            report={"chain_samples": 5000, "burn_in": 100},
        )
        for name, extra in (("a", []), ("b", ["--workers", "2"])):
            code = main(["report", "--config", str(cfg), "--out", str(tmp_path / name), "--quiet", *extra])
            assert code == EXIT_OK
        assert read_bytes(tmp_path / "a") == read_bytes(tmp_path / "b")
        rep = json.loads((tmp_path / "a" / "report.json").read_text())
        assert set(rep["pass"]) == {"H", "r1_sq", "ks"}

    def test_unknown_observable_lists_names(self, tmp_path, capsys):
        code = main(["report", "--out", str(tmp_path), "--observables", "H,kinetic"])
        assert code == EXIT_CONFIG
        assert "r{k}_sq" in capsys.readouterr().err

    def test_empty_seeds(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", seeds=[])
        assert main(["report", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_unknown_report_field(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", report={"samples": 3})
        assert main(["report", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_console_script(tmp_path):
    cfg = write_config(tmp_path / "c.json", matrix={"kind": "harmonic_chain", "n": 3})
    proc = subprocess.run(
        [sys.executable, "-m", "flipflow.cli", "spectrum", "--config", str(cfg), "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "wrote" in proc.stdout
