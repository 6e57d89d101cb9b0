import csv
import json
import math

import pytest

from rsfog import harness, surrogate
from rsfog.harness import (CSV_HEADER, ResultRow, SweepSpec, UsageError, config_for, main,
                           mean_rows, run_solve, run_sweep)
from rsfog.scenario import SystemConfig
from rsfog.selftest import check_tightness, run_selftest

SMALL = SystemConfig(K=2)


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text("# two users\nK = 2\n", encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    spec = SweepSpec(["RS_FOG", "RS_CLOUD"], "F_k_cyc_s", [1e6, 3e6, 5e6], list(range(5)), SMALL)
    rows, means, path = run_sweep(spec, out, workers=1)
    return rows, means, path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def row(**kw):
    base = dict(scheme="RS_FOG", seed=0, param="K", value=2.0, T_u=1.0, T_p=2.0, T_d=3.0,
                T_total=6.0, iterations=4, status="converged", wall_ms=1.0)
    base.update(kw)
    return ResultRow(**base)


def exit_code(argv):
    """``main``'s return value, or the code argparse exits with."""
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


# -- sweep bookkeeping

def test_csv_header_is_stable(sweep):
    _, _, path = sweep
    text = path.read_bytes().decode("utf-8")
    assert text.splitlines()[0] == "scheme,seed,param,value,T_u,T_p,T_d,T_total,iterations,status,wall_ms"
    assert "\r" not in text
    assert read_csv(path)[0] == CSV_HEADER


def test_sweep_cardinality(sweep):
    rows, means, path = sweep
    assert len(rows) == 2 * 3 * 5
    assert len(means) == 2 * 3
    assert len(read_csv(path)) == 1 + 30 + 6


def test_rows_are_consistent(sweep):
    rows, _, _ = sweep
    for r in rows:
        assert r.status == "converged"
        assert 1 <= r.iterations <= 30
        assert r.T_total == pytest.approx(r.T_u + r.T_p + r.T_d, abs=1e-9)


def test_cloud_means_are_flat_in_local_cpu(sweep):
    _, means, _ = sweep
    cloud = [m.T_total for m in means if m.scheme == "RS_CLOUD"]
    assert cloud[0] == cloud[1] == cloud[2]
    fog = [m.T_total for m in means if m.scheme == "RS_FOG"]
    assert fog[0] > fog[2]


def test_plot_script_lists_every_scheme(sweep):
    _, means, path = sweep
    gp = path.with_suffix(".gp").read_text(encoding="utf-8")
    assert "$RS_FOG << EOD" in gp and "$RS_CLOUD << EOD" in gp
    assert repr(means[0].T_total) in gp
    assert gp.count("EOD") == 4


def test_means_skip_failed_cells():
    rows = [row(seed=0, T_u=1.0), row(seed=1, T_u=3.0),
            row(seed=2, status="infeasible", T_u=math.nan), row(seed=3, status="max-iter", T_u=100.0)]
    (m,) = mean_rows(rows, ["RS_FOG"], "K", [2.0])
    assert m.seed == "mean"
    assert m.status == "mean(excluded=2)"
    assert m.T_u == 2.0
    assert m.T_total == pytest.approx(2.0 + 2.0 + 3.0)


def test_failed_cell_does_not_stop_sweep(tmp_path, monkeypatch):
    real = harness.solve_scheme

    def flaky(kind, sc, opts=None):
        if sc.seed == 1:
            raise RuntimeError("solver blew up")
        return real(kind, sc, opts)

    monkeypatch.setattr(harness, "solve_scheme", flaky)
    spec = SweepSpec(["SDMA"], "K", [1, 2], [0, 1], SMALL)
    rows, means, _ = run_sweep(spec, tmp_path, workers=1)
    assert [r.status for r in rows] == ["converged", "infeasible", "converged", "infeasible"]
    assert all(m.status == "mean(excluded=1)" for m in means)


@pytest.mark.parametrize("value,pk,pb", [(5, 5, 20), (10, 10, 25), (15, 15, 30)])
def test_power_pair_mapping(value, pk, pb):
    cfg = config_for(SystemConfig(), "power_pair_dBm", value)
    assert (cfg.P_k_dBm, cfg.P_b_dBm) == (pk, pb)


@pytest.mark.parametrize("values", [[1.0, 1.0], [3.0, 2.0], []])
def test_sweep_values_must_increase(values):
    with pytest.raises(UsageError):
        SweepSpec(["SDMA"], "K", values, [0], SMALL).validate()


def test_fractional_user_count_is_rejected():
    with pytest.raises(UsageError):
        config_for(SMALL, "K", 2.5)


# -- solve

def test_solve_writes_dump(tmp_path):
    r, sol = run_solve(SMALL, "noma", 3, tmp_path)
    assert r.status == "converged" and r.iterations <= 30
    doc = json.loads((tmp_path / "NOMA_seed3.json").read_text(encoding="utf-8"))
    assert doc["trace"] == sol.trace
    assert doc["sic_layers"] == 1
    assert doc["times"]["T_total"] == pytest.approx(r.T_total)
    assert read_csv(tmp_path / "NOMA_seed3.csv")[1] == r.fields()


def test_solve_is_deterministic():
    a, _ = run_solve(SMALL, "RS_FOG", 4)
    b, _ = run_solve(SMALL, "RS_FOG", 4)
    assert a.fields()[:-1] == b.fields()[:-1]


# -- CLI

def test_cli_solve(small_config, tmp_path, capsys):
    assert main(["solve", "--config", str(small_config), "--scheme", "SDMA", "--seed", "1",
                 "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1].startswith("SDMA,1,none,")


@pytest.mark.parametrize("argv", [
    ["solve", "--scheme", "OMA"],
    ["solve", "--seed", "x"],
    ["sweep", "--param", "K", "--values", "3,2", "--out", "o"],
    ["sweep", "--param", "bandwidth", "--values", "1,2", "--out", "o"],
    ["sweep", "--param", "K", "--values", "1,2", "--seeds", "0", "--out", "o"],
    ["frobnicate"],
    [],
])
def test_cli_usage_errors(argv, capsys):
    assert exit_code(argv) == 2
    assert capsys.readouterr().err


def test_cli_bad_config_key(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("K = 2\nnot_a_key = 1\n", encoding="utf-8")
    assert main(["solve", "--config", str(path)]) == 2
    assert "not_a_key" in capsys.readouterr().err


def test_cli_missing_config(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_cli_runtime_failure(monkeypatch, capsys):
    def boom(*args, **kw):
        raise RuntimeError("subproblem status infeasible")

    monkeypatch.setattr(harness, "run_solve", boom)
    assert main(["solve", "--scheme", "SDMA"]) == 1
    assert "infeasible" in capsys.readouterr().err


# -- self-test

def test_selftest_passes_and_repeats():
    first = [c.line() for c in run_selftest()]
    assert all(line.startswith("PASS") for line in first), first
    assert [c.line() for c in run_selftest()] == first


def test_selftest_cli(capsys):
    assert main(["selftest"]) == 0
    assert "checks passed" in capsys.readouterr().out


def test_selftest_catches_flipped_auxiliary(monkeypatch):
    real = surrogate.matrix_aux

    def flipped(S, Omega):
        Y, Phi = real(S, Omega)
        return -Y, Phi

    monkeypatch.setattr(surrogate, "matrix_aux", flipped)
    check = check_tightness(n_instances=10)
    assert not check.passed
    assert check.line().startswith("FAIL")
