import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from singular_yamabe.cli import main
from singular_yamabe.exceptions import InvalidParameterError, ValidationError
from singular_yamabe.io import RunConfig, parse_override, read_csv, read_field, write_field
from singular_yamabe.radial import constant_solution

N6 = {"n": 6, "psi": "constant", "mu": 2.9, "seed": {"1": 0.05}, "t0": 8.0}


def _config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def _columns(path):
    _, rows = read_csv(path)
    return {k: np.array([float(r[k]) if r[k] not in ("True", "False") else r[k] == "True"
                         for r in rows]) for k in rows[0]}


def _run(tmp_path, command, data, out="out", *extra):
    return main([command, "--config", _config(tmp_path, data), "--out",
                 str(tmp_path / out), *extra])


def test_radial_constant(tmp_path, capsys):
    assert _run(tmp_path, "radial", {"n": 4, "periods": 2}) == 0
    rows = _columns(tmp_path / "out" / "radial.csv")
    assert_allclose(rows["psi"], constant_solution(4), rtol=1e-13)
    assert np.all(rows["hamiltonian_drift"] == 0.0)
    summary = json.loads(capsys.readouterr().out)
    assert summary


def test_radial_delaunay_drift(tmp_path):
    assert _run(tmp_path, "radial", {"n": 3, "psi": {"delaunay": 0.3}, "periods": 3}) == 0
    rep = json.loads((tmp_path / "out" / "radial.json").read_text())
    assert rep["max_drift"] < 1e-10 and not rep["constant"]


def test_csv_header_carries_hash(tmp_path):
    _run(tmp_path, "radial", {"n": 3, "periods": 1})
    first = (tmp_path / "out" / "radial.csv").read_text().splitlines()[0]
    h = json.loads((tmp_path / "out" / "radial.json").read_text())["config_hash"]
    assert first.startswith("#") and f"config_hash={h}" in first and "units" in first


def test_outputs_are_deterministic(tmp_path):
    data = {"n": 3, "psi": {"delaunay": 0.5}, "periods": 2}
    _run(tmp_path, "radial", data, "a")
    _run(tmp_path, "radial", data, "b")
    for name in ("radial.csv", "radial.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_invalid_profile_exits_2(tmp_path, capsys):
    assert _run(tmp_path, "radial", {"n": 3, "psi": {"delaunay": 1.5}}) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] and err["exit_code"] == 2
    assert (tmp_path / "out" / "error.json").exists()


def test_missing_config_exits_5(tmp_path):
    assert main(["radial", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "out")]) == 5


def test_roots_table(tmp_path):
    assert _run(tmp_path, "roots", {"n": 3, "grid": {"max_degree": 2}}) == 0
    rows = _columns(tmp_path / "out" / "roots.csv")
    assert list(rows["degree"]) == [1, 2]
    # degree 1 on the constant solution has rho = 1
    assert_allclose(rows["rho"][0], 1.0, atol=1e-10)
    assert np.all(np.abs(rows["det_monodromy_error"]) < 1e-8)


def test_index_admissible_and_conflict(tmp_path):
    assert _run(tmp_path, "index", {"n": 3, "mu": 2.5}) == 0
    rep = json.loads((tmp_path / "out" / "index.json").read_text())
    assert rep["admissible"] and 2.0 in [round(e, 9) for e in rep["elements_below_mu"]]
    assert _run(tmp_path, "index", {"n": 3, "mu": 2.0}, "bad") == 3
    assert json.loads((tmp_path / "bad" / "error.json").read_text())


def test_override_changes_config(tmp_path):
    assert _run(tmp_path, "radial", {"n": 3, "periods": 1}, "out",
                "--override", "n=5", "--override", "psi.delaunay=0.4") == 0
    rep = json.loads((tmp_path / "out" / "radial.json").read_text())
    assert rep["n"] == 5 and not rep["constant"]


def test_approx_solve_verify_pipeline(tmp_path):
    assert _run(tmp_path, "approx", N6) == 0
    summary = json.loads((tmp_path / "out" / "approx_summary.json").read_text())
    assert summary["order_ok"] and abs(summary["rate_uncorrected"] - 2.0) < 0.1
    assert _run(tmp_path, "solve", N6) == 0
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["solve"]["converged"] and rep["solve"]["contraction_factor"] < 1.0
    first = (tmp_path / "out" / "report.json").read_bytes()
    assert _run(tmp_path, "verify", N6) == 0
    ver = json.loads((tmp_path / "out" / "verify.json").read_text())
    assert ver["verified"] and ver["verified_mu"] >= 2.9 - 0.05
    assert _run(tmp_path, "solve", N6) == 0
    assert (tmp_path / "out" / "report.json").read_bytes() == first


def test_degree_overflow_exits_4(tmp_path):
    data = dict(N6, grid={"max_degree": 1})
    assert _run(tmp_path, "approx", data) == 4


def test_parse_override():
    assert parse_override("grid.t_step=0.01") == (["grid", "t_step"], 0.01)
    assert parse_override("psi=constant") == (["psi"], "constant")
    with pytest.raises(InvalidParameterError):
        parse_override("novalue")


@pytest.mark.parametrize("data", [{"n": 2}, {"mu": 0.5}, {"psi": "sphere"},
                                  {"grid": {"t_step": -1}}, {"seed": {"x": 1}}])
def test_config_validation(data):
    with pytest.raises(ValidationError):
        RunConfig(data)


def test_config_hash_ignores_output_dir():
    a = RunConfig({"n": 4, "output_dir": "x"})
    b = RunConfig({"n": 4, "output_dir": "y"})
    assert a.hash == b.hash != RunConfig({"n": 5}).hash


def test_field_round_trip(tmp_path, reference_approx):
    from singular_yamabe.fields import FieldGrid

    ap = reference_approx["n3"]
    g = FieldGrid.build(8.0, ap.psi.nominal_period, 2.0, 0.05)
    f = ap.field(g)
    write_field(tmp_path / "f.txt", f, {"config_hash": "abc"})
    back, header = read_field(tmp_path / "f.txt", ap.basis)
    assert header["config_hash"] == "abc"
    assert np.array_equal(back.coeffs, f.coeffs) and np.array_equal(back.grid.t, g.t)
