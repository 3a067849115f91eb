import csv
import io
import re
import subprocess
import sys

import numpy as np
import pytest

from kpproads import cli
from kpproads.cli import SweepSpec, UsageError, main, parse_range
from kpproads.dispersion import Params
from kpproads.speed import SolverError, solve_cstar


def invoke(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def blocks(text):
    """Split stdout into CSV blocks separated by blank lines."""
    return [list(csv.DictReader(io.StringIO(b))) for b in text.strip().split("\n\n")]


class TestSpeed:
    def test_mixed_example(self):
        code, out, err = invoke("speed", "--d", "1", "--D", "4", "--mu", "1", "--nu", "1",
                                "--R", "2", "--N", "1", "--f0", "1")
        assert code == 0
        (row,) = blocks(out)[0]
        assert float(row["c_star"]) == pytest.approx(2.3094011, abs=1e-7)
        assert row["type"] == "Mixed"
        assert "R_M = 2" in err and "c_M = 2.3094" in err

    def test_type1_example(self):
        code, out, err = invoke("speed", "--D", "0.5", "--d", "1", "--R", "1")
        (row,) = blocks(out)[0]
        assert code == 0 and row["type"] == "Type1" and float(row["c_star"]) < 2
        assert "R_M" not in err

    def test_round_trip_formatting(self):
        _, out, _ = invoke("speed", "--D", "4", "--R", "10")
        (row,) = blocks(out)[0]
        res = solve_cstar(Params(D=4.0, R=10.0))
        assert float(row["c_star"]) == res.c_star
        assert float(row["beta_star"]) == res.beta_star

    @pytest.mark.parametrize("argv", [
        ("speed", "--D", "4"),
        ("speed", "--D", "4", "--R", "0"),
        ("speed", "--D", "-1", "--R", "1"),
        ("speed", "--D", "1", "--R", "1", "--N", "0"),
        ("speed", "--D", "nan", "--R", "1"),
        ("nonsense",),
        (),
    ])
    def test_usage_errors(self, argv):
        assert invoke(*argv)[0] == 2

    def test_solver_failure_exit_code(self, monkeypatch):
        def boom(p):
            raise SolverError("no bracket")

        monkeypatch.setattr(cli, "solve_cstar", boom)
        code, _, err = invoke("speed", "--D", "1", "--R", "1")
        assert code == 1 and "no bracket" in err

    def test_flag_file(self, tmp_path):
        f = tmp_path / "flags.txt"
        f.write_text("--D\n4\n--R\n2\n")
        code, out, _ = invoke("speed", f"@{f}")
        assert code == 0 and "Mixed" in out


class TestSweep:
    def test_D_sweep_increasing(self):
        code, out, _ = invoke("sweep", "--axis", "D", "--values", "0.25,0.5,1,2,4,8,16")
        assert code == 0
        rows, footer = blocks(out)
        cs = [float(r["c_star"]) for r in rows]
        assert np.all(np.diff(cs) > 0)
        names = {r["quantity"] for r in footer}
        assert {"c0", "c_tilde2", "c_kpp"} <= names
        ct = float(next(r["value"] for r in footer if r["quantity"] == "c_tilde2"))
        assert float(rows[-1]["c_tilde2_sqrtD"]) == pytest.approx(ct * 4)

    def test_R_sweep_unimodal(self):
        code, out, _ = invoke("sweep", "--axis", "R", "--D", "4", "--range", "0.5:8:9:log")
        assert code == 0
        rows, footer = blocks(out)
        Rs = np.array([float(r["R"]) for r in rows])
        cs = np.array([float(r["c_star"]) for r in rows])
        k = int(np.argmax(cs))
        assert k == int(np.argmin(np.abs(np.log(Rs / 2))))
        assert np.all(np.diff(cs[:k + 1]) > 0) and np.all(np.diff(cs[k:]) < 0)
        names = {r["quantity"]: float(r["value"]) for r in footer}
        assert names["R_M"] == 2.0 and names["c_inf"] > 2

    def test_R_sweep_small_D(self):
        code, out, _ = invoke("sweep", "--axis", "R", "--D", "1", "--values", "0.2,0.5,1,2,5,10")
        rows, footer = blocks(out)
        cs = [float(r["c_star"]) for r in rows]
        assert np.all(np.diff(cs) >= 0)
        assert "R_M" not in {r["quantity"] for r in footer}

    def test_failure_flagged_and_continues(self, monkeypatch):
        real = cli.solve_cstar

        def flaky(p):
            if p.D == 2.0:
                raise SolverError("synthetic")
            return real(p)

        monkeypatch.setattr(cli, "solve_cstar", flaky)
        code, out, err = invoke("sweep", "--axis", "D", "--values", "1,2,3")
        rows, _ = blocks(out)
        assert code == 1
        assert [r["status"] for r in rows] == ["ok", "error", "ok"]
        assert rows[1]["c_star"] == ""
        assert "synthetic" in err

    def test_parallel_keeps_order(self):
        _, serial, _ = invoke("sweep", "--axis", "R", "--values", "0.5,1,3")
        _, parallel, _ = invoke("sweep", "--axis", "R", "--values", "0.5,1,3", "--jobs", "2")
        assert serial == parallel

    @pytest.mark.parametrize("extra", [
        ("--values", "2,1"),
        ("--values", "1,1"),
        ("--values", "0,1"),
        ("--range", "1:2"),
        ("--range", "-1:2:3:log"),
        ("--values", "1,2", "--range", "1:2:3"),
        (),
    ])
    def test_usage(self, extra):
        assert invoke("sweep", "--axis", "D", *extra)[0] == 2

    def test_spec_and_ranges(self):
        spec = SweepSpec("R", (1.0, 2.0), Params())
        assert [p.R for p in spec.points()] == [1.0, 2.0]
        with pytest.raises(UsageError):
            SweepSpec("mu", (1.0,), Params())
        assert parse_range("1:100:3:log") == pytest.approx([1, 10, 100])
        assert parse_range("0:1:5") == pytest.approx([0, 0.25, 0.5, 0.75, 1])


class TestLimits:
    def test_small_D(self):
        code, out, _ = invoke("limits", "--D", "2", "--R", "1")
        (row,) = blocks(out)[0]
        assert code == 0
        assert row["c_inf"] == "2"
        assert 0 < float(row["c0"]) < 2
        assert "R_M" not in row

    def test_large_D(self):
        code, out, _ = invoke("limits", "--D", "4", "--R", "1")
        (row,) = blocks(out)[0]
        assert float(row["R_M"]) == 2.0
        assert float(row["c_M"]) == pytest.approx(2.3094011, abs=1e-7)
        assert float(row["c_inf"]) > 2


class TestCurves:
    P = ("--D", "4", "--R", "10")

    def gaps(self, c, *grid):
        code, out, _ = invoke("curves", "--c", repr(c), *self.P, *grid)
        assert code == 0
        rows = blocks(out)[0]
        gaps = []
        for r in rows:
            if "" in (r["d_lo"], r["D_lo"]):
                continue
            gaps.append(max(float(r["d_lo"]), float(r["D_lo"])) - min(float(r["d_hi"]), float(r["D_hi"])))
        return np.array(gaps)

    def test_below_and_above(self):
        c = solve_cstar(Params(D=4.0, R=10.0)).c_star
        assert np.all(self.gaps(c * (1 - 1e-3)) > 0)
        assert np.any(self.gaps(c * (1 + 1e-3)) <= 0)

    def test_at_cstar(self):
        res = solve_cstar(Params(D=4.0, R=10.0))
        b = res.beta_star
        g = self.gaps(res.c_star, f"--range={b - 1e-4}:{b + 1e-4}:41")
        assert abs(g.min()) < 1e-7

    def test_header_and_empty_cells(self):
        _, out, _ = invoke("curves", "--c", "1.0", "--D", "1", "--R", "1", "--values=-0.5,0,0.2")
        lines = out.splitlines()
        assert lines[0] == "beta,d_lo,d_hi,D_lo,D_hi"
        assert lines[1].split(",")[1:3] == ["", ""]

    def test_bad_grid(self):
        assert invoke("curves", "--c", "1", *self.P, "--values", "0.2,0.1")[0] == 2
        assert invoke("curves", "--c", "0", *self.P)[0] == 2


class TestSimulate:
    SMALL = ("--L", "30", "--nx", "301", "--ny", "11")

    def test_cfl_violation(self):
        code, _, err = invoke("simulate", *self.SMALL, "--dt", "1.0")
        assert code == 2
        bound = float(re.search(r"CFL bound: dt <= ([0-9.e-]+)", err).group(1))
        assert 0 < bound < 1

    def test_zero_reaction_reports_drift(self):
        code, out, err = invoke("simulate", *self.SMALL, "--t-end", "10", "--reaction", "zero")
        assert code == 0
        drift = float(re.search(r"relative mass drift: (\S+)", err).group(1))
        assert drift < 5e-3
        assert "no front" in err
        assert out.startswith("t,front_x,mass,v_center,u_center\n")

    def test_domain_too_small(self):
        code, _, err = invoke("simulate", "--L", "10", "--nx", "101", "--ny", "11", "--t-end", "20")
        assert code == 1 and "increase L" in err

    def test_bad_level(self):
        assert invoke("simulate", *self.SMALL, "--level", "1.5")[0] == 2

    @pytest.mark.slow
    def test_default_config(self):
        code, out, err = invoke("simulate")
        assert code == 0
        dev = float(re.search(r"relative deviation ([-+0-9.]+)%", err).group(1))
        assert abs(dev) < 5


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kpproads", "limits", "--D", "1", "--R", "1"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert proc.stdout.startswith("c0,c_tilde2,c_inf\n")
    proc = subprocess.run([sys.executable, "-m", "kpproads", "speed"], capture_output=True, text=True)
    assert proc.returncode == 2
