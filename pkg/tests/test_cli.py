import json

import numpy as np
import pytest
from click.testing import CliRunner

from qle import curvature as cv
from qle.cli import (EXIT_FAIL, EXIT_INPUT, EXIT_OBSTRUCTION, EXIT_OK, JobConfig, jet_to_dict, main,
                     parse_observer, run)
from qle.errors import MalformedInput


def invoke(*args, env=None):
    res = CliRunner().invoke(main, list(args), env=env)
    return res.exit_code, res.output


def report(*args, env=None):
    code, out = invoke(*args, env=env)
    return code, json.loads(out)


@pytest.mark.parametrize("command", ["validate", "identities", "expand", "oracle", "embed", "energy"])
def test_sample_random_vacuum_passes(command):
    code, rep = report(command, "--input", "sample:random-vacuum", "--seed", "3",
                       "--observer", "1.5,0.5,1.0,0.0" if command == "energy" else "1,0,0,0")
    assert code == EXIT_OK, rep
    assert rep["passed"] and rep["schema_version"] == "1.0"


def test_pure_electric_energy():
    code, rep = report("energy", "--input", "sample:pure-electric")
    assert code == EXIT_OK
    assert rep["energy"]["closed_form_e5"] == pytest.approx(0.1, abs=1e-12)


def test_dust_energy_and_optimize():
    code, rep = report("energy", "--input", "sample:dust")
    assert code == EXIT_OK
    assert rep["energy"]["e3"] == pytest.approx(4 * np.pi / 3, abs=1e-12)
    code, rep = report("optimize", "--input", "sample:dust")
    assert code == EXIT_OK and rep["minimum"] == pytest.approx(4 * np.pi / 3, abs=1e-12)


def test_optimize_certificate():
    code, rep = report("optimize", "--input", "sample:pure-electric")
    assert code == EXIT_OK
    assert {r["name"] for r in rep["rows"]} == {"gradient", "hessian", "multistart", "grid oracle"}


def test_zero_weyl_optimize_is_obstruction():
    code, rep = report("optimize", "--input", "sample:zero")
    assert code == EXIT_OBSTRUCTION
    assert rep["error"] == "InfimumNotAttained"
    assert rep["u_vector"] == [0.0, 0.0, 0.0, 0.0]


def test_energy_with_optimized_observer():
    code, rep = report("energy", "--input", "sample:random-vacuum", "--seed", "1", "--optimize")
    assert code in (EXIT_OK, EXIT_OBSTRUCTION)
    if code == EXIT_OK:
        assert rep["observer"]["A"] >= 1.0


def test_asymmetric_weyl_file(tmp_path):
    jet = jet_to_dict(cv.pure_electric_jet())
    w = np.array(jet["weyl"])
    w[0, 1, 0, 1] += 0.5
    w[0, 1, 0, 2] += 1.0
    jet["weyl"] = w.tolist()
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(jet))
    code, rep = report("validate", "--input", str(path))
    assert code == EXIT_FAIL
    failed = [r["name"] for r in rep["rows"] if not r["passed"]]
    assert "weyl-antisymmetry" in failed


def test_constraint_violation_blocks_other_commands(tmp_path):
    jet = jet_to_dict(cv.pure_electric_jet())
    jet["weyl"][0][1][0][1] += 1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(jet))
    code, rep = report("energy", "--input", str(path))
    assert code == EXIT_FAIL and rep["error"] == "ConstraintViolation"


@pytest.mark.parametrize("content", ["not json", "[1, 2]", '{"weyl": "abc"}', '{"mode": "plasma"}', "{}"])
def test_malformed_files(tmp_path, content):
    path = tmp_path / "in.json"
    path.write_text(content)
    code, rep = report("validate", "--input", str(path))
    assert code == EXIT_INPUT
    assert rep["passed"] is False


def test_missing_file_and_sample():
    assert report("validate", "--input", "/nonexistent/jet.json")[0] == EXIT_INPUT
    assert report("validate", "--input", "sample:nothing")[0] == EXIT_INPUT


def test_bad_options():
    assert report("energy", "--input", "sample:pure-electric", "--observer", "1,2")[0] == EXIT_INPUT
    assert report("energy", "--input", "sample:pure-electric", "--observer", "1,2,0,0")[0] == EXIT_INPUT
    assert report("expand", "--input", "sample:zero", "--lmax", "4")[0] == EXIT_INPUT
    assert report("expand", "--input", "sample:zero", "--tol", "-1")[0] == EXIT_INPUT


def test_electric_magnetic_input(tmp_path):
    path = tmp_path / "em.json"
    path.write_text(json.dumps({"electric": np.diag([2.0, -1.0, -1.0]).tolist(),
                                "magnetic": np.zeros((3, 3)).tolist()}))
    code, rep = report("optimize", "--input", str(path))
    assert code == EXIT_OK
    assert rep["minimum"] == pytest.approx(0.1, abs=1e-12)


def test_matter_embed():
    code, rep = report("embed", "--input", "sample:random-matter", "--seed", "2")
    assert code == EXIT_OK and rep["rows"][0]["name"] == "isometric"


def test_deterministic_json():
    a = invoke("energy", "--input", "sample:random-vacuum", "--seed", "9", "--observer", "2,1,1,1")
    b = invoke("energy", "--input", "sample:random-vacuum", "--seed", "9", "--observer", "2,1,1,1")
    assert a == b
    c = invoke("energy", "--input", "sample:random-vacuum", "--seed", "10", "--observer", "2,1,1,1")
    assert c[1] != a[1]


def test_lmax_environment():
    code, rep = report("identities", "--input", "sample:pure-electric", env={"QLE_LMAX": "12"})
    assert code == EXIT_OK and rep["l_max"] == 12
    assert invoke("identities", "--input", "sample:zero", env={"QLE_LMAX": "x"})[0] == EXIT_INPUT


def test_out_file(tmp_path):
    path = tmp_path / "rep.json"
    code, out = invoke("validate", "--input", "sample:zero", "--out", str(path))
    assert code == EXIT_OK and out == ""
    assert json.loads(path.read_text())["command"] == "validate"


def test_table_format():
    code, out = invoke("embed", "--input", "sample:pure-electric", "--format", "table")
    assert code == EXIT_OK
    assert out.startswith("embed  schema 1.0  passed=True")
    assert "[PASS] isometric" in out


def test_run_api():
    rep, code = run(JobConfig("oracle", "sample:random-vacuum", seed=4))
    assert code == EXIT_OK
    assert any(n["name"].startswith("trn[3]") for n in rep["notes"])


def test_parse_observer():
    assert parse_observer(None).a == 1.0
    with pytest.raises(MalformedInput):
        parse_observer("a,b,c,d")
