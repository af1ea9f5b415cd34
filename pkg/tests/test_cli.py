import json
import subprocess
import sys
from pathlib import Path

import pytest

from mksys.cli import dumps, fnv1a64, main

from conftest import LN2, fixture_path

A, B, C, FIG1, BROKEN = (str(fixture_path(n)) for n in ("bernoulli", "chain2", "placedep", "fig1",
                                                          "broken"))


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fnv1a64_reference_vectors():
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_dumps_is_stable():
    text = dumps({"b": 0.1, "a": [1, 2.0, True, None], "c": float("nan"), "d": "é"})
    assert text.splitlines()[1].strip().startswith('"a"')
    assert "0.10000000000000001" in text and "2.0" in text and '"nan"' in text
    assert json.loads(text)["d"] == "é"


def test_validate(capsys, tmp_path):
    assert run(capsys, "validate", A)[0] == 0
    code, out, _ = run(capsys, "validate", BROKEN)
    assert code == 1
    rep = json.loads(out)
    assert rep["violations"][0]["check"] == "prob-sum" and rep["violations"][0]["id"] == "V1"
    assert run(capsys, "validate", "nonexistent.mks")[0] == 2
    bad = tmp_path / "bad.mks"
    bad.write_text("space dim=1\nvertex V { box = [0, 1 }\n")
    code, _, err = run(capsys, "validate", str(bad))
    assert code == 2 and "line 2" in err
    bad.write_text('space dim=1\nvertex V { box = [0, 1] }\nedge e { from=V9 to=V map="x" prob="1" }\n')
    assert run(capsys, "validate", str(bad))[0] == 2


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["simulate"])
    assert info.value.code == 2
    assert run(capsys, "simulate", A, "--x0", "abc")[0] == 2
    assert run(capsys, "birkhoff", B, "--fam", "edge:nope", "--n", "100")[0] == 2
    assert run(capsys, "birkhoff", B, "--fam", "what", "--n", "100")[0] == 2


def test_simulate(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", A, "--n", "0", "--x0", "0.3")
    assert code == 0
    assert out.splitlines() == ["n,edge_id,x0,logprob_cum", "0,,0.29999999999999999,0"]
    first = run(capsys, "simulate", C, "--n", "500", "--seed", "9")[1]
    second = run(capsys, "simulate", C, "--n", "500", "--seed", "9")[1]
    assert first == second and len(first.splitlines()) == 502
    assert run(capsys, "simulate", C, "--n", "500", "--seed", "10")[1] != first
    code, _, err = run(capsys, "simulate", A, "--x0", "9.9")
    assert code == 1 and "DomainError" in err
    out_dir = tmp_path / "sim"
    assert run(capsys, "simulate", FIG1, "--n", "50", "--out", str(out_dir), "--threads", "3")[0] == 0
    man = json.loads((out_dir / "manifest.json").read_text())
    assert man["config_fnv1a64"] == "%016x" % fnv1a64(Path(FIG1).read_bytes())
    assert man["threads"] == 3 and man["seed"] == 0 and man["parameters"]["n"] == 50
    assert (out_dir / "trajectory.csv").read_text().startswith("n,edge_id,x0,x1,logprob_cum\n")


def test_threads_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("MKSYS_THREADS", "5")
    run(capsys, "simulate", A, "--n", "5", "--out", str(tmp_path))
    assert json.loads((tmp_path / "manifest.json").read_text())["threads"] == 5


def test_entropy(capsys, tmp_path):
    code, out, _ = run(capsys, "entropy", A, "--n", "100000", "--seed", "7", "--out", str(tmp_path))
    s = json.loads(out)
    assert code == 0 and s["pass"] is True
    assert s["entropy_pathwise"] == pytest.approx(LN2, abs=1e-12)
    assert s["entropy_integral"] == pytest.approx(LN2, abs=1e-12)
    assert {p.name for p in tmp_path.iterdir()} == {"summary.json", "manifest.json", "series.csv"}


def test_birkhoff(capsys):
    code, out, _ = run(capsys, "birkhoff", B, "--fam", "occupancy", "--n", "100000",
                       "--replicas", "8")
    s = json.loads(out)
    assert code == 0 and s["pass"] is True
    assert round(s["rhs"], 4) == 0.6667


def test_birkhoff_failing_criterion(capsys):
    code, out, _ = run(capsys, "birkhoff", C, "--fam", "edge:e1", "--n", "2000", "--replicas", "3",
                       "--tol", "1e-9", "--bins", "256")
    assert code == 1 and json.loads(out)["pass"] is False


def test_family_file(capsys, tmp_path):
    fam = tmp_path / "fam.txt"
    fam.write_text("e1 = 1\ne2 = 1  # both edges\n")
    code, out, _ = run(capsys, "birkhoff", A, "--fam", str(fam), "--n", "1000", "--replicas", "3",
                       "--bins", "256")
    s = json.loads(out)
    assert code == 0 and s["rhs"] == pytest.approx(1.0, abs=1e-12)


def test_contract(capsys):
    code, out, _ = run(capsys, "contract", C, "--pairs", "10000")
    s = json.loads(out)
    assert code == 0 and s["contractive"] is True
    assert s["a_hat"] == pytest.approx(0.5, abs=1e-12)


def test_invariant(capsys, tmp_path):
    code, out, _ = run(capsys, "invariant", A, "--n", "100000", "--bins", "1024", "--support",
                       "--out", str(tmp_path))
    s = json.loads(out)
    assert code == 0 and s["pass"] is True
    assert abs(s["empirical_mean"][0] - 0.5) < 0.01 and s["ulam_mean"][0] == pytest.approx(0.5)
    assert (tmp_path / "support.csv").read_text().startswith("x0,weight\n")
    assert (tmp_path / "series.csv").read_text().startswith("bin_lo,bin_hi,mass\n")
    code, out, _ = run(capsys, "invariant", FIG1, "--n", "20000")
    assert "ulam_mean" not in json.loads(out)


def test_mmeasure(capsys):
    code, out, _ = run(capsys, "mmeasure", B, "--mu", "orbit", "--x0", "0")
    s = json.loads(out)
    assert code == 0 and s["stationarity_residual"] <= 1e-12
    code, out, _ = run(capsys, "mmeasure", A, "--bins", "1024", "--words", "4")
    assert code == 0 and json.loads(out)["stationarity_residual"] <= 1e-6


def test_installed_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "mksys", "validate", A], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["ok"] is True
