"""Configuration parsing, serialization round trips, CLI exit codes."""

import numpy as np
import pytest

from nschannel.cli import main
from nschannel.config import ConfigError, parse_config
from nschannel.grid import build_grid
from nschannel.io import (cell_centered_velocity, read_diagnostics_csv,
                          read_vtk_structured, write_vtk_structured)
from nschannel.model import h_of_L

MINIMAL = """
[grid]
nx = 8
ny = 8
"""

EQUILIBRIUM = """
[grid]
nx = 8
ny = 8
[model]
dt = 1e-3
t_end = 5e-3
[init]
preset = constant:1.0
"""

REFERENCE_SMALL = """
[grid]
nx = 12
ny = 12
[model]
dt = 1e-3
t_end = 1e-2
[init]
preset = spinodal:42,0.05
[output]
directory = {out}
"""


class TestParseConfig:
    def test_minimal_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.grid.nx == 8 and cfg.grid.hx == 0.125
        p = cfg.params
        assert p.eps == p.delta == p.kappa == p.beta == 1.0
        assert p.coupling.kind == "dirichlet"
        assert p.stabilization == 2.0

    def test_robin_coupling(self):
        cfg = parse_config(MINIMAL + "[model]\ncoupling = robin:0.5\n")
        assert cfg.params.coupling.kind == "robin"
        assert cfg.params.coupling.L == 0.5
        assert h_of_L(cfg.params.coupling) == 2.0

    def test_small_nx_names_key(self):
        with pytest.raises(ConfigError, match="grid.nx"):
            parse_config("[grid]\nnx = 3\nny = 8\n")

    def test_unknown_key_has_line_number(self):
        with pytest.raises(ConfigError, match="line 3"):
            parse_config("[grid]\nnx = 8\nwhat = 1\nny = 8\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("[grid]\nnx = 8\nny = 8\n[extra]\n")

    def test_comments_ignored(self):
        cfg = parse_config("# top\n[grid]  # side\nnx = 8  # inline\nny = 8\n")
        assert cfg.grid.ny == 8

    def test_polynomial_constitutive(self):
        cfg = parse_config(MINIMAL + "[constitutive]\n"
                           "viscosity = poly:1.0,0.0,0.5\n"
                           "viscosity_bounds = 0.5,4.0\n")
        v = cfg.consts.viscosity
        assert not v.is_constant
        assert v(np.array([0.0]))[0] == 1.0
        assert (v.lo, v.hi) == (0.5, 4.0)

    def test_spinodal_preset(self):
        cfg = parse_config(MINIMAL + "[init]\npreset = spinodal:7,0.1\n")
        assert cfg.init.preset == "spinodal"
        assert cfg.init.seed == 7 and cfg.init.args == (0.1,)

    def test_bad_v0(self):
        with pytest.raises(ConfigError, match="init.v0"):
            parse_config(MINIMAL + "[init]\nv0 = sideways\n")


class TestVtkRoundTrip:
    def test_bit_identical_fields(self, tmp_path):
        g = build_grid(1.0, 1.0, 12, 10)
        rng = np.random.default_rng(0)
        phi = rng.standard_normal((12, 10))
        p = rng.standard_normal((12, 10))
        u = rng.standard_normal((12, 10))
        v = rng.standard_normal((12, 11))
        ucc, vcc = cell_centered_velocity(u, v, g)
        path = tmp_path / "snap.vtk"
        write_vtk_structured(path, g, scalars={"phi": phi, "p": p},
                             vectors={"velocity": (ucc, vcc)})
        scalars, vectors = read_vtk_structured(path)
        assert np.array_equal(scalars["phi"], phi)
        assert np.array_equal(scalars["p"], p)
        assert np.array_equal(vectors["velocity"][0], ucc)
        assert np.array_equal(vectors["velocity"][1], vcc)


class TestRunCommand:
    def test_equilibrium_rows_identical(self, tmp_path):
        cfgfile = tmp_path / "eq.ini"
        cfgfile.write_text(EQUILIBRIUM + f"[output]\ndirectory = {tmp_path}/out\n")
        assert main(["run", str(cfgfile)]) == 0
        header, data = read_diagnostics_csv(tmp_path / "out" / "diagnostics.csv")
        assert header[0] == "t"
        # all non-time columns constant along the run (up to the linear
        # solver's roundoff: the equilibrium is a fixed point, not a bit
        # pattern)
        assert np.allclose(data[:, 1:], data[0, 1:], rtol=0.0, atol=1e-12)

    def test_strict_exits_zero_on_clean_run(self, tmp_path):
        cfgfile = tmp_path / "run.ini"
        cfgfile.write_text(REFERENCE_SMALL.format(out=tmp_path / "out"))
        assert main(["run", str(cfgfile), "--strict"]) == 0
        assert (tmp_path / "out" / "final.vtk").exists()
        assert (tmp_path / "out" / "wall_profiles.csv").exists()

    def test_byte_identical_reruns(self, tmp_path):
        cfgfile = tmp_path / "run.ini"
        cfgfile.write_text(REFERENCE_SMALL.format(out=tmp_path / "a"))
        assert main(["run", str(cfgfile)]) == 0
        cfgfile.write_text(REFERENCE_SMALL.format(out=tmp_path / "b"))
        assert main(["run", str(cfgfile)]) == 0
        a = (tmp_path / "a" / "diagnostics.csv").read_bytes()
        b = (tmp_path / "b" / "diagnostics.csv").read_bytes()
        assert a == b

    def test_seed_override_changes_output(self, tmp_path):
        cfgfile = tmp_path / "run.ini"
        cfgfile.write_text(REFERENCE_SMALL.format(out=tmp_path / "a"))
        main(["run", str(cfgfile)])
        cfgfile.write_text(REFERENCE_SMALL.format(out=tmp_path / "b"))
        main(["run", str(cfgfile), "--seed", "99"])
        a = (tmp_path / "a" / "diagnostics.csv").read_bytes()
        b = (tmp_path / "b" / "diagnostics.csv").read_bytes()
        assert a != b

    def test_unwritable_output_dir(self, tmp_path):
        # a regular file in the path makes the directory uncreatable even
        # when the suite runs as root
        blocked = tmp_path / "blocked"
        blocked.write_text("not a directory")
        cfgfile = tmp_path / "run.ini"
        cfgfile.write_text(REFERENCE_SMALL.format(out=blocked / "sub"))
        assert main(["run", str(cfgfile)]) == 1

    def test_bad_config_exit_one(self, tmp_path):
        cfgfile = tmp_path / "bad.ini"
        cfgfile.write_text("[grid]\nnx = 3\nny = 8\n")
        assert main(["run", str(cfgfile)]) == 1

    def test_plots_flag_writes_figures(self, tmp_path):
        cfgfile = tmp_path / "run.ini"
        cfgfile.write_text(EQUILIBRIUM + f"[output]\ndirectory = {tmp_path}/out\n")
        assert main(["run", str(cfgfile), "--plots"]) == 0
        for name in ("energy.png", "mass.png", "dissipation.png"):
            assert (tmp_path / "out" / name).exists()


class TestVerifyCommand:
    CFG = """
[grid]
nx = 16
ny = 8
[init]
preset = spinodal:42,0.05
[verify]
k = {k}
tol = {tol}
t_end = 0.05
"""

    def test_default_verify_passes(self, tmp_path, capsys):
        cfgfile = tmp_path / "v.ini"
        cfgfile.write_text(self.CFG.format(k=8, tol=1e-8))
        assert main(["verify", str(cfgfile)]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") >= 6 and "FAIL" not in out

    def test_zero_tolerance_fails(self, tmp_path):
        cfgfile = tmp_path / "v.ini"
        cfgfile.write_text(self.CFG.format(k=8, tol=0.0))
        assert main(["verify", str(cfgfile)]) == 2

    def test_single_mode_trivial_pass(self, tmp_path):
        cfgfile = tmp_path / "v.ini"
        cfgfile.write_text(self.CFG.format(k=1, tol=1e-8))
        assert main(["verify", str(cfgfile)]) == 0


class TestReportCommand:
    def test_renders_figures(self, tmp_path):
        cfgfile = tmp_path / "run.ini"
        cfgfile.write_text(REFERENCE_SMALL.format(out=tmp_path / "out"))
        main(["run", str(cfgfile)])
        csv = tmp_path / "out" / "diagnostics.csv"
        assert main(["report", str(csv)]) == 0
        for name in ("energy.png", "mass.png", "dissipation.png"):
            assert (tmp_path / "out" / name).exists()
