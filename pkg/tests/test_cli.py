import json
from dataclasses import replace

import pytest

from kmcert import certify as cert_mod
from kmcert.cli import EXIT_FAIL, EXIT_IO, EXIT_OK, EXIT_USAGE, dumps, main
from kmcert.interval import Interval


def run(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    return exc.value.code


def test_certify_single_claim(capsys):
    assert run(["certify", "--claim", "p4"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    (rec,) = doc["records"]
    assert rec["claim_id"] == "p4" and rec["pass"] is True
    assert rec["computed_lo"] <= rec["computed_hi"]


def test_certify_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(cert_mod, "APPX", replace(cert_mod.APPX, a_ub=Interval.point(0.54)))
    assert run(["certify", "--claim", "condition3"]) == EXIT_FAIL
    assert "FAIL" in capsys.readouterr().err


def test_certify_usage_errors():
    assert run(["certify", "--claim", "bogus"]) == EXIT_USAGE
    assert run(["certify", "--kappa", "0.5"]) == EXIT_USAGE
    assert run(["certify", "--delta", "0.5"]) == EXIT_USAGE


def test_io_error(tmp_path):
    assert run(["threshold", "--alpha", "0.8"]) == EXIT_OK
    assert run(["certify", "--claim", "p4", "--out", str(tmp_path / "no" / "such" / "c.json")]) == EXIT_IO


def test_unknown_command():
    assert run(["nosuch"]) == EXIT_USAGE


def test_landscape_rows(tmp_path):
    out = tmp_path / "l.csv"
    assert run(["landscape", "--n", "7", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "x,y,value" and len(lines) == 1 + 49


def test_landscape_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(["landscape", "--n", "5", "--out", str(a)])
    run(["landscape", "--n", "5", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_threshold(capsys):
    assert run(["threshold", "--alpha", "0.8"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["q"] == pytest.approx(0.5379421597943607, abs=1e-10)
    assert doc["G_star"] > 0
    assert run(["threshold"]) == EXIT_USAGE
    assert run(["threshold", "--alpha-star", "--alpha", "0.8"]) == EXIT_USAGE


def test_threshold_alpha_star(capsys):
    assert run(["threshold", "--alpha-star", "--tol", "1e-9"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["alpha_lo"] <= 0.8330786 <= doc["alpha_hi"] + 1e-9
    assert doc["alpha_hi"] - doc["alpha_lo"] <= 2e-9


def test_amp_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(["--threads", "1", "amp", "--N", "300", "--k", "4", "--seed", "3", "--out", str(p)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "k,grad_norm,q_err,psi_err"
    assert len(a.read_text().splitlines()) == 5


def test_amp_needs_positive_eps():
    assert run(["amp", "--eps", "0", "--N", "50"]) == EXIT_USAGE


def test_planted(tmp_path):
    out = tmp_path / "p.csv"
    assert run(["planted", "--N", "200", "--k", "3", "--seeds", "2", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "seed,k,dist_m,dist_n,edge" and len(lines) == 1 + 2 * 4
    assert run(["planted", "--N", "2000", "--edge"]) == EXIT_USAGE


def test_dumps_precision():
    text = dumps({"a": 0.1, "b": [1, True, None], "c": float("inf")})
    doc = json.loads(text)
    assert doc["a"] == 0.1 and doc["c"] is None
    assert "0.10000000000000001" in text
    with pytest.raises(TypeError):
        dumps(object())
