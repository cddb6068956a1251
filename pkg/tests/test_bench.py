import math

import pytest

from saddlesor.bench import (COLUMNS, BenchConfig, BenchReport, BenchRow, emit_report, parse_config, read_report_csv,
                             run_bench)
from saddlesor.errors import ConfigError
from saddlesor.problem import QCase
from saddlesor.spectral import MethodId


def strip_wall(text):
    idx = COLUMNS.index("wall_seconds")
    return [",".join(c for i, c in enumerate(line.split(",")) if i != idx) for line in text.splitlines()]


class TestParseConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert (cfg.tol, cfg.max_iter, cfg.a_list) == (1e-9, 1200, (0.0,))
        assert cfg.p_list == (8,) and cfg.oracle is False

    def test_combinations(self):
        cfg = parse_config("p=8,16 q=tridiag methods=gsor,gmesor")
        assert len(cfg.combinations()) == 4
        assert cfg.methods == (MethodId.GSOR, MethodId.GMESOR)

    def test_multiline_and_comments(self):
        cfg = parse_config("# sweep\np=8:24:8\nq=tridiag,diag   a=0,auto\noracle=on workers=2 tol=1e-8\n")
        assert cfg.p_list == (8, 16, 24)
        assert cfg.q_cases == (QCase.TridiagA, QCase.DiagA)
        assert cfg.a_list == (0.0, None)
        assert cfg.oracle and cfg.workers == 2 and cfg.tol == 1e-8

    def test_bad_value_names_key(self):
        with pytest.raises(ConfigError, match=r"line 1: .*'p'"):
            parse_config("p=abc")

    def test_line_numbers(self):
        with pytest.raises(ConfigError, match="line 3"):
            parse_config("p=8\n\nmethods=gsor,nonsense\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key 'colour'"):
            parse_config("colour=red")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="already set"):
            parse_config("p=8\np=16")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="key=value"):
            parse_config("p 8")

    def test_invalid_values(self):
        for text in ("tol=-1", "max_iter=0", "mode=fast", "oracle=maybe", "grid.beta=0:1:3"):
            with pytest.raises(ConfigError):
                parse_config(text)


class TestEmit:
    def test_empty_report(self):
        assert emit_report(BenchReport([]), "csv") == ",".join(COLUMNS) + "\n"
        md = emit_report(BenchReport([]), "markdown").splitlines()
        assert len(md) == 2 and md[0].startswith("| p | case")

    def test_single_row(self):
        row = BenchRow(8, "tridiag", "gsor", a=0.0, tau1=2 / 3, iterations=46, converged="yes")
        lines = emit_report(BenchReport([row])).splitlines()
        assert len(lines) == 2
        assert len(lines[1].split(",")) == len(COLUMNS)
        assert "0.666667" in lines[1]

    def test_round_trip(self):
        row = BenchRow(8, "diag", "gmesor", a=10.0, mu_min=0.5162441, tau1=0.5436321, rho_formula=0.6755501,
                       iterations=65, converged="yes", final_res=8.358e-10, error="")
        text = emit_report(BenchReport([row, BenchRow(16, "tridiag", "gesor", error="Infeasible: pinned a")]))
        back = read_report_csv(text)
        assert emit_report(back) == text
        assert back.rows[0].iterations == 65 and math.isnan(back.rows[0].rho_oracle)

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit_report(BenchReport([]), "xml")


class TestRunBench:
    def test_reference_tau1_column(self):
        rep = run_bench(parse_config("p=8,16,24 q=tridiag methods=gmesor"))
        assert [r.tau1 for r in rep.rows] == pytest.approx([0.663309, 0.442911, 0.330674], abs=5e-7)
        assert [r.iterations for r in rep.rows] == [46, 86, 126]

    @pytest.mark.slow
    def test_reference_iteration_counts(self):
        rep = run_bench(parse_config("p=8:48:8 q=tridiag methods=gsor workers=3"))
        assert [r.iterations for r in rep.rows] == [46, 86, 126, 167, 207, 248]
        assert rep.ok

    def test_a_invariance(self):
        rep = run_bench(parse_config("p=8 methods=gmesor a=0,10,1000 oracle=on"))
        rhos = [r.rho_oracle for r in rep.rows]
        assert max(rhos) - min(rhos) <= 1e-6
        assert [r.a for r in rep.rows] == [0, 10, 1000]

    def test_oracle_matches_formula(self):
        rep = run_bench(parse_config("p=4,6 q=tridiag,diag "
                                     "methods=gsor,gbsor,gmesor,gmpsd,gmpsd3,gmssor,simplified_gmpsd,gpsd "
                                     "oracle=on"))
        for r in rep.rows:
            assert not r.error
            if r.method == "gpsd":
                # the GPSD closed form is not attained; the oracle exposes it
                assert r.rho_oracle > 1
            else:
                assert abs(r.rho_formula - r.rho_oracle) <= 1e-5

    def test_oracle_forced_off_above_cap(self):
        rep = run_bench(BenchConfig(p_list=(4,), oracle=True, oracle_cap=40))
        assert math.isnan(rep.rows[0].rho_oracle) and not rep.rows[0].error

    def test_row_errors_captured(self):
        rep = run_bench(parse_config("p=4 methods=gsor,gesor,sorlike a=0,auto"))
        errs = {(r.method, r.a if not math.isnan(r.a) else None): r.error for r in rep.rows}
        assert not rep.ok
        assert "Infeasible" in errs[("gesor", 0.0)]
        assert any(m == "gesor" and not e for (m, _), e in errs.items())
        assert all(e for (m, _), e in errs.items() if m == "sorlike")
        assert len(rep.rows) == 6

    def test_deterministic_and_order_stable(self):
        text = "p=6,4 q=diag,tridiag methods=gmesor,gsor,pgmres oracle=on"
        one = emit_report(run_bench(parse_config(text)))
        four = emit_report(run_bench(parse_config(text + " workers=4")))
        assert strip_wall(one) == strip_wall(four)
        rows = read_report_csv(one).rows
        keys = [(r.p, r.case, r.method) for r in rows]
        assert keys[0] == (4, "tridiag", "gsor") and keys[-1] == (6, "diag", "pgmres")

    def test_baselines(self):
        rep = run_bench(parse_config("p=8 methods=gmres,pgmres"))
        for r in rep.rows:
            assert r.converged == "yes" and r.max_error <= 1e-6 and math.isnan(r.rho_formula)

    def test_sweep(self):
        rep = run_bench(parse_config("p=4 methods=gsor mode=sweep grid.tau2=0.2:1.0:5"))
        assert len(rep.rows) == 5
        assert [r.tau2 for r in rep.rows] == pytest.approx([0.2, 0.4, 0.6, 0.8, 1.0])
        assert all(r.tau2 == r.omega2 and r.iterations is None for r in rep.rows)
        rhos = [r.rho_formula for r in rep.rows]
        assert min(rhos) < 1 and all(r > 0 for r in rhos)

    def test_sweep_derived_ties(self):
        rep = run_bench(parse_config("p=4 methods=gmssor mode=sweep grid.omega1=0.2:0.6:3"))
        for r in rep.rows:
            assert not r.error
            assert r.tau1 == pytest.approx(r.omega1 + r.omega2 - r.omega1 * r.omega2)


def test_parse_config_spaces_around_separators():
    cfg = parse_config("p = 8, 16\nmethods = gsor , gmesor  # comment\ngrid.tau1 = 0.1 : 1.9 : 5\nmode = sweep\n")
    assert cfg.p_list == (8, 16)
    assert len(cfg.methods) == 2
    assert cfg.grid[0][0] == "tau1" and len(cfg.grid[0][1]) == 5
