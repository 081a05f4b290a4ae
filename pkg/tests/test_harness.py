import os
import re
import subprocess
import sys

import numpy as np
import pytest

from ortholap import mollify, odmap
from ortholap.errors import ConfigError, DegenerateFit, InvalidSpec, IoError, OracleUnavailable
from ortholap.harness import (ExperimentSpec, ProbeResult, emit_report, fit_rate, parse_config, run_convergence,
                              run_probe_battery, spec_from_mapping)
from ortholap.harness import experiments as ex
from ortholap.harness.cli import main

from conftest import UNIT_DISK

EPS4 = (1 / 8, 1 / 16, 1 / 32, 1 / 64)


# ---------------------------------------------------------------------------
# fit_rate


def test_fit_linear():
    f = fit_rate([(e, 3.0 * e) for e in EPS4])
    assert f.slope == pytest.approx(1.0, abs=1e-9)
    assert f.r2 == pytest.approx(1.0, abs=1e-12)
    assert f.n_points == 4


def test_fit_square_root():
    assert fit_rate([(e, 0.2 * e ** 0.5) for e in EPS4]).slope == pytest.approx(0.5, abs=1e-9)


def test_fit_degenerate():
    with pytest.raises(DegenerateFit):
        fit_rate([(e, 0.1) for e in EPS4])
    with pytest.raises(DegenerateFit):
        fit_rate([(0.1, 1.0), (0.05, 0.5)])
    with pytest.raises(DegenerateFit):
        fit_rate([(0.1, 1.0), (0.05, 0.0), (0.02, 0.1)])


def test_fit_reads_record_fields():
    recs = [ex.SweepRecord(e, 2 * e, e, 2 * e, np.array([2 * e])) for e in EPS4]
    assert fit_rate(recs, "bulk_max_err").slope == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# spec validation and config


def test_spec_rejects_bad_eps():
    with pytest.raises(InvalidSpec):
        ExperimentSpec(eps=(1 / 16, 1 / 8, 1 / 32))
    with pytest.raises(InvalidSpec):
        ExperimentSpec(eps=(1 / 8, 1 / 16))
    ExperimentSpec(kind="walkcheck", eps=(1 / 16,))


def test_spec_rejects_unknowns():
    with pytest.raises(InvalidSpec):
        ExperimentSpec(kind="nope")
    with pytest.raises(InvalidSpec):
        ExperimentSpec(probes=("walkcheck", "nope"))
    with pytest.raises(InvalidSpec):
        ExperimentSpec(params={"bogus": 1})
    with pytest.raises(InvalidSpec):
        ExperimentSpec(g="poly:x:re")


def test_parse_config():
    text = "# comment\nkind = walkcheck\n eps = 1/16 , 1/32\n\ntrials = 500  # trailing\nn_starts = 3\n"
    cfg = parse_config(text)
    assert cfg == {"kind": "walkcheck", "eps": "1/16 , 1/32", "trials": "500", "n_starts": "3"}
    spec = spec_from_mapping(cfg)
    assert spec.eps == (1 / 16, 1 / 32)
    assert spec.trials == 500
    assert spec.param("n_starts") == 3.0
    assert spec_from_mapping(cfg, trials="7").trials == 7


def test_config_errors_carry_line_numbers():
    with pytest.raises(ConfigError) as info:
        parse_config("kind = converge\nno equals here\n")
    assert info.value.line == 2
    with pytest.raises(ConfigError) as info:
        parse_config("a = 1\n# x\na = 2\n")
    assert info.value.line == 3
    with pytest.raises(ConfigError):
        spec_from_mapping({"colour": "red"})
    with pytest.raises(ConfigError):
        spec_from_mapping({"trials": "many"})


def test_oracle_unavailable_for_holder_on_rect():
    with pytest.raises(OracleUnavailable):
        ex.continuum_oracle("holder:0.5:1,0", odmap.Rect(0, 0, 1, 1), 1e-8)
    spec = ExperimentSpec(domain="rect:1,1", g="holder:0.5:1,0", eps=(1 / 4, 1 / 8, 1 / 16))
    with pytest.raises(OracleUnavailable):
        run_convergence(spec)


# ---------------------------------------------------------------------------
# experiments


def test_low_degree_polynomials_hit_solver_floor():
    for g in ("poly:1:re", "poly:2:re", "poly:2:im"):
        res = run_convergence(ExperimentSpec(g=g, eps=(1 / 4, 1 / 8, 1 / 16)))
        assert res.fit is None and res.skip_reason == "errors at solver floor"
        assert all(r.max_err <= 1e-7 for r in res.records)


def test_sweep_record_invariants():
    res = run_convergence(ExperimentSpec(gen="rectnu", g="poly:3:re", eps=(1 / 8, 1 / 16, 1 / 32)))
    for r in res.records:
        assert r.max_err == pytest.approx(float(r.errors.max()), abs=0)
        assert r.max_err == max(r.bulk_max_err, r.boundary_max_err)
    assert res.fit is not None and res.fit.slope > 0


def test_prop41_residual_column_matches_library():
    spec = ExperimentSpec(kind="prop41", eps=(1 / 8, 1 / 16, 1 / 32))
    res = ex.prop41_probe(spec)
    sq = mollify.Square(0.0, 0.0, 0.5)
    for row in res.rows:
        m = odmap.generate_square(UNIT_DISK, row[0])
        assert row[4] == mollify.averaged_laplacian_residual(m, mollify.radial_quadratic(), sq).residual


def test_averaged_laplacian_bound_on_nonuniform_lattice():
    res = ex.prop41_probe(ExperimentSpec(kind="prop41", gen="rectnu", eps=(1 / 8, 1 / 16, 1 / 32, 1 / 64)))
    assert res.status == ex.RECORDED
    for eps, side, _, _, residual in res.rows:
        assert residual <= 5 * eps * side


def test_exponents_probe_passes():
    res = ex.exponents_probe(ExperimentSpec(kind="exponents"))
    assert res.status == ex.PASS
    assert len(res.rows) == 100


def test_failing_probe_is_isolated():
    spec = ExperimentSpec(domain="rect:1,1", g="holder:0.5:1,0", eps=(1 / 4, 1 / 8, 1 / 16),
                          probes=("converge", "exponents"))
    rep = run_probe_battery(spec)
    assert [r.status for r in rep.results] == [ex.ERROR, ex.PASS]
    assert rep.exit_code == 1


def test_exit_code_mapping():
    mk = lambda s: ProbeResult("p", s)  # noqa: E731
    assert ex.exit_code([mk(ex.PASS), mk(ex.RECORDED)]) == 0
    assert ex.exit_code([mk(ex.PASS), mk(ex.FINDING)]) == 2
    assert ex.exit_code([mk(ex.FINDING), mk(ex.FAIL)]) == 1
    assert ex.exit_code([]) == 0


# ---------------------------------------------------------------------------
# reports


def test_empty_report(tmp_path):
    man = emit_report([], tmp_path)
    assert list(man) == ["fit.csv"]
    assert (tmp_path / "fit.csv").read_text() == "probe,slope,intercept,r2,n_points,status,note\n"
    assert (tmp_path / "manifest.txt").read_text() == f"{man['fit.csv']}  fit.csv\n"


def _converge_result():
    return ex.convergence_probe(ExperimentSpec(gen="rectnu", g="poly:3:re", eps=(1 / 8, 1 / 16, 1 / 32)))


def test_svg_has_one_point_per_eps(tmp_path):
    res = _converge_result()
    emit_report([res], tmp_path)
    svg = (tmp_path / "plot_converge.svg").read_text()
    assert len(re.findall(r'<circle class="pt"', svg)) == 3
    assert 'class="fit"' in svg and 'class="guide"' in svg
    assert "beta is not explicit" in svg


def test_report_is_deterministic(tmp_path):
    a = emit_report([_converge_result()], tmp_path / "a")
    b = emit_report([_converge_result()], tmp_path / "b")
    assert a == b
    assert (tmp_path / "a" / "manifest.txt").read_bytes() == (tmp_path / "b" / "manifest.txt").read_bytes()
    assert {"fit.csv", "records.csv", "converge.csv", "plot_converge.svg"} <= set(a)


def test_report_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoError):
        emit_report([], blocker / "sub")


def test_battery_bytes_identical_across_runs(tmp_path):
    spec = ExperimentSpec(eps=(1 / 32,), seeds=(1, 2, 3), trials=1000,
                          probes=("walkcheck", "property_s", "annulus"), params={"n_starts": 3})
    hashes = [emit_report(run_probe_battery(spec).results, tmp_path / str(k)) for k in range(2)]
    assert hashes[0] == hashes[1]


# ---------------------------------------------------------------------------
# CLI


def test_cli_rates(capsys, tmp_path):
    out = tmp_path / "rates.csv"
    assert main(["rates", "--alpha", "0.2", "--beta", "0.4", "--grid", "128", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("alpha,beta,lambda,lambda_lower,theta,theta_branch,bootstrap_limit\n")
    assert "0.00625" in text


def test_cli_probes_pass_and_report(tmp_path):
    assert main(["probes", "--probes", "exponents", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "exponents.csv").exists() and (tmp_path / "meta.csv").exists()


def test_cli_report_from_config(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(f"kind = converge\ngen = rectnu\ng = poly:3:re\neps = 1/8, 1/16, 1/32\nout = {tmp_path / 'out'}\n")
    assert main(["report", "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / "plot_converge.svg").exists()


def test_cli_hard_errors(capsys, tmp_path):
    assert main(["converge", "--eps", "1/8,1/16"]) == 1
    assert main(["converge", "--domain", "rect:1,1", "--g", "holder:0.5:1,0", "--eps", "1/4,1/8,1/16"]) == 1
    assert main(["report", "--config", str(tmp_path / "missing.cfg")]) == 1
    with pytest.raises(SystemExit) as info:
        main(["solve", "--gen", "hexagonal"])
    assert info.value.code == 1


def test_cli_findings_exit_two(monkeypatch):
    monkeypatch.setitem(ex.PROBES, "annulus", lambda spec: ProbeResult("annulus", ex.FINDING))
    assert main(["probes", "--probes", "annulus", "--eps", "1/8"]) == 2


def test_cli_mesh_solve_walk(tmp_path, capsys):
    path = tmp_path / "m.odmap"
    assert main(["mesh-gen", "--eps", "1/8", "--out", str(path)]) == 0
    assert odmap.load(path).n_quads > 0
    assert main(["solve", "--eps", "1/8", "--g", "poly:2:re"]) == 0
    assert "max_err=" in capsys.readouterr().out
    assert main(["walk", "--eps", "1/8", "--trials", "2000", "--seed", "3"]) == 0


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ortholap.harness.cli", "rates", "--alpha", "0.5",
                           "--beta", "0.25", "--grid", "64"], capture_output=True, text=True,
                          env={**os.environ})
    assert proc.returncode == 0
    assert proc.stdout.count("\n") == 2
