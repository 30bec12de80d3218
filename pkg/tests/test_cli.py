import numpy as np
import pytest

from vemwave.cli import main
from vemwave.mesh import generate_family, write_mesh


class TestDispersionCommand:
    def test_happy_path(self, tmp_path, capsys):
        code = main(["dispersion", "--grid", "quad", "--k", "4", "--delta", "0.2",
                     "--theta", "0.7853981634", "--r", "2", "--out", str(tmp_path)])
        assert code == 0
        lines = (tmp_path / "dispersion.csv").read_text().splitlines()
        assert lines[0].startswith("grid,k,delta")
        assert len(lines) == 2

    def test_negative_delta_exit_2(self, tmp_path, capsys):
        code = main(["dispersion", "--grid", "quad", "--k", "1", "--delta", "-1",
                     "--r", "2", "--out", str(tmp_path)])
        assert code == 2
        assert "delta" in capsys.readouterr().err

    def test_unknown_flag_exit_2(self, tmp_path):
        code = main(["dispersion", "--grid", "quad", "--nope", "1",
                     "--out", str(tmp_path)])
        assert code == 2

    def test_byte_identical_reruns(self, tmp_path):
        args = ["dispersion", "--grid", "tria", "--k", "2", "--delta", "0.2",
                "--theta", "0.5", "--r", "2"]
        main(args + ["--out", str(tmp_path / "a")])
        main(args + ["--out", str(tmp_path / "b")])
        assert (tmp_path / "a/dispersion.csv").read_bytes() == \
            (tmp_path / "b/dispersion.csv").read_bytes()


class TestConvergenceCommand:
    def test_small_run(self, tmp_path):
        code = main(["convergence", "--family", "quad", "--k", "1", "--levels", "1",
                     "--dt", "1e-3", "--T", "0.01", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "convergence.csv").exists()

    def test_bad_family(self, tmp_path):
        code = main(["convergence", "--family", "icosahedra", "--out", str(tmp_path)])
        assert code == 2

    def test_deterministic_csv(self, tmp_path):
        args = ["convergence", "--family", "quad", "--k", "1", "--levels", "1",
                "--dt", "1e-3", "--T", "0.01", "--seed", "3"]
        main(args + ["--out", str(tmp_path / "a")])
        main(args + ["--out", str(tmp_path / "b")])
        a = (tmp_path / "a/convergence.csv").read_text().splitlines()
        b = (tmp_path / "b/convergence.csv").read_text().splitlines()
        # timing column varies; everything else is byte-identical
        strip = lambda lines: [",".join(l.split(",")[:-1]) for l in lines]
        assert strip(a) == strip(b)


class TestCflCommand:
    def test_runs(self, tmp_path):
        code = main(["cfl", "--grids", "quad", "--kmin", "1", "--kmax", "2",
                     "--out", str(tmp_path)])
        assert code == 0
        lines = (tmp_path / "cfl.csv").read_text().splitlines()
        assert lines[0] == "grid,k,q_cfl"
        assert len(lines) == 3


class TestAnisotropyCommand:
    def test_runs(self, tmp_path):
        code = main(["anisotropy", "--grid", "quad", "--k", "1", "--delta", "0.2",
                     "--angles", "8", "--out", str(tmp_path)])
        assert code == 0
        assert len((tmp_path / "anisotropy.csv").read_text().splitlines()) == 9


class TestSolveCommand:
    def test_missing_mesh_exit_1(self, tmp_path, capsys):
        code = main(["solve", "--mesh", str(tmp_path / "nope.txt"),
                     "--out", str(tmp_path)])
        assert code == 1
        assert "nope.txt" in capsys.readouterr().err

    def test_zero_steps_writes_initial_state(self, tmp_path):
        mesh = generate_family("random_quad", 0, seed=0)
        path = tmp_path / "mesh.txt"
        write_mesh(mesh, path)
        code = main(["solve", "--mesh", str(path), "--T", "0", "--dt", "1e-3",
                     "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "final_state.ckpt").exists()

    def test_short_run_with_snapshots(self, tmp_path):
        mesh = generate_family("random_quad", 0, seed=0)
        path = tmp_path / "mesh.txt"
        write_mesh(mesh, path)
        code = main(["solve", "--mesh", str(path), "--T", "0.01", "--dt", "1e-3",
                     "--k", "1", "--snapshot-every", "5", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "final_state.ckpt").exists()
        assert (tmp_path / "state_00000005.ckpt").exists()


class TestConfigFile:
    def test_config_supplies_defaults(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("k = 2\ndelta = 0.1\n")
        code = main(["--config", str(cfg), "dispersion", "--grid", "quad",
                     "--r", "2", "--out", str(tmp_path)])
        assert code == 0
        row = (tmp_path / "dispersion.csv").read_text().splitlines()[1]
        assert row.startswith("quad,2,0.1,")

    def test_cli_overrides_config(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("delta = 0.1\n")
        code = main(["--config", str(cfg), "dispersion", "--grid", "quad",
                     "--k", "1", "--delta", "0.4", "--r", "2",
                     "--out", str(tmp_path)])
        assert code == 0
        row = (tmp_path / "dispersion.csv").read_text().splitlines()[1]
        assert row.startswith("quad,1,0.4,")

    def test_bad_config_line(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("just-nonsense\n")
        code = main(["--config", str(cfg), "dispersion", "--grid", "quad",
                     "--out", str(tmp_path)])
        assert code == 2
