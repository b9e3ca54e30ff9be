import json
import subprocess
import sys
import warnings

import numpy as np
import pytest

from smallsig import io as sio
from smallsig.cli import run
from smallsig.dae import LinearDAE, SemiImplicitLHS, example_ch3
from smallsig.errors import InputError
from smallsig.pencil import MatrixPencil


def _dae():
    rng = np.random.default_rng(0)
    d = LinearDAE(rng.standard_normal((3, 3)), rng.standard_normal((3, 2)), rng.standard_normal((2, 3)),
                  rng.standard_normal((2, 2)) + 3 * np.eye(2), ("a", "b", "c"), ("p", "q"))
    d.meta["lhs"] = SemiImplicitLHS(np.eye(3), np.zeros((2, 3)))
    return d


def test_model_round_trip_is_byte_identical(tmp_path):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    sio.save_model(p1, _dae())
    sio.save_model(p2, sio.load_model(p1))
    assert p1.read_bytes() == p2.read_bytes()
    back = sio.load_model(p1)
    assert np.array_equal(back.fx, _dae().fx) and back.state_names == ("a", "b", "c")


def test_pencil_round_trip(tmp_path):
    p = tmp_path / "p.json"
    sio.save_model(p, example_ch3())
    P = sio.load_model(p)
    assert isinstance(P, MatrixPencil) and np.array_equal(P.E, example_ch3().E)


def test_matrix_market_round_trip(tmp_path):
    A = np.array([[1.0 / 3, 0.0], [-2e-300, 7.0]])
    sio.save_matrix(tmp_path / "a.mtx", A)
    assert np.array_equal(sio.load_matrix(tmp_path / "a.mtx"), A)


def test_bad_matrix_market(tmp_path):
    (tmp_path / "x.mtx").write_text("hello\n")
    with pytest.raises(InputError):
        sio.load_matrix(tmp_path / "x.mtx")
    (tmp_path / "y.mtx").write_text("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n")
    with pytest.raises(InputError):
        sio.load_matrix(tmp_path / "y.mtx")


def test_duplicate_triplets_warn_and_sum():
    doc = {"n": 1, "m": 0, "fx": [[0, 0, 1.0], [0, 0, 2.0]]}
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        d = sio.model_from_doc(doc)
    assert d.fx[0, 0] == 3.0
    assert any("duplicate" in str(x.message) for x in w)


@pytest.mark.parametrize("doc, where", [
    ({"n": 2, "m": 0, "fx": [[0, 5, 1.0]]}, "/fx/0/1"),
    ({"n": 2, "m": 0, "fx": [[0, 0, "x"]]}, "/fx/0/2"),
    ({"n": -1, "m": 0}, "/n"),
    ({"n": 2, "m": 0, "state_names": ["a"]}, "/state_names"),
])
def test_schema_errors_carry_json_pointer(doc, where):
    with pytest.raises(InputError, match=where):
        sio.model_from_doc(doc)


def test_cli_eig(capsys):
    assert run(["eig", "--model", "example_ch4", "--builtin"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "re,im,zeta,fn_hz,kind"
    assert sum(r.endswith("finite") and not r.endswith("infinite") for r in out[1:]) == 5
    assert sum(r.endswith("infinite") for r in out[1:]) == 2


def test_cli_exit_codes(tmp_path, capsys):
    sio.save_model(tmp_path / "s.json", LinearDAE(np.eye(2), np.ones((2, 1)), np.ones((1, 2)), np.zeros((1, 1))))
    assert run(["eig", "--model", str(tmp_path / "s.json"), "--reduce"]) == 3
    (tmp_path / "bad.json").write_text(json.dumps({"n": 1, "m": 0, "fx": [[3, 0, 1.0]]}))
    assert run(["eig", "--model", str(tmp_path / "bad.json")]) == 2
    assert "/fx/0/0" in capsys.readouterr().err
    assert run(["ora", "--gamma", "0.5", "--wb", "10", "--wh", "1"]) == 4
    assert run(["gco", "--fmin", "50", "--fmax", "60"]) == 4


def test_cli_outputs_are_deterministic(tmp_path):
    outs = []
    for k in range(2):
        o = tmp_path / f"m{k}.csv"
        assert run(["delay-map", "--c", "-0.4", "--ntau", "6", "--nk", "6", "--out", str(o), "--seed", "3"]) == 0
        outs.append(o.read_bytes() + (tmp_path / f"m{k}.csv.json").read_bytes())
    assert outs[0] == outs[1]


def test_cli_other_verbs(tmp_path, capsys):
    assert run(["transform", "--model", "example_ch3", "--builtin", "--kind", "cayley", "--sigma", "1.5",
                "--emit-mtx", str(tmp_path / "t")]) == 0
    assert (tmp_path / "t.E.mtx").exists()
    assert run(["pf", "--model", "example_ch3", "--builtin", "--floor", "1e-9"]) == 0
    assert run(["ora", "--gamma", "-0.7", "--wb", "1e-3", "--wh", "1e3", "--N", "11", "--points", "5"]) == 0
    assert run(["foc-stab"]) == 0
    assert run(["delay-dis", "--c", "0.4", "--eps", str(1 / (100 * np.pi))]) == 0
    sio.save_matrix(tmp_path / "a0.mtx", np.zeros((1, 1)))
    sio.save_matrix(tmp_path / "a1.mtx", -np.ones((1, 1)))
    assert run(["cheb-eig", "--A0", str(tmp_path / "a0.mtx"), "--Ad", str(tmp_path / "a1.mtx"), "--tau", "1",
                "--count", "2"]) == 0
    out = capsys.readouterr().out
    assert "-0.3181315" in out
    assert run(["gco", "--gco-max", "1e-4", "--selection-out", str(tmp_path / "sel.json")]) == 0
    assert run(["simulate", "--h", "0.05", "--t-end", "2", "--event-time", "0.5", "--delay-selection",
                str(tmp_path / "sel.json"), "--compare-undelayed", "--out", str(tmp_path / "tr.csv")]) == 0
    stats = json.loads((tmp_path / "tr.csv.stats.json").read_text())
    assert stats["nnz_delayed"] < stats["nnz_full"] and stats["max_mismatch"] < 1e-2
    assert run(["hmax", "--h-grid", "0.02", "0.1", "--out", str(tmp_path / "h.csv")]) == 0
    assert json.loads((tmp_path / "h.csv.json").read_text())["h_max"] == 0.1


def test_cli_global_options_either_side(capsys):
    assert run(["--seed", "1", "eig", "--model", "example_ch3", "--builtin"]) == 0
    a = capsys.readouterr().out
    assert run(["eig", "--model", "example_ch3", "--builtin", "--seed", "1"]) == 0
    assert capsys.readouterr().out == a


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "smallsig", "delay-dis", "--c", "-0.4", "--eps", "0.01"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "unstable" in r.stdout
    r = subprocess.run([sys.executable, "-m", "smallsig", "eig", "--model", "/nonexistent.json"], capture_output=True, text=True)
    assert r.returncode == 2
