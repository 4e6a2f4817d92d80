import csv
import io
import json

import numpy as np
import pytest

from ipucopula.cli import REFERENCE_TABLE, main


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def read_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# command=")
    return lines[0], list(csv.DictReader(lines[1:]))


def test_ranks_match_table(reference_table):
    code, out, err = run("ranks", "--dataset", "fixture:cottin-pfeifer-4.2")
    assert code == 0
    comment, rows = read_csv(out)
    assert "seed=" in comment and "count=" in comment and "config=" in comment
    got = np.array([[int(r["r1"]), int(r["r2"])] for r in rows])
    np.testing.assert_array_equal(got, reference_table[:, 2:].astype(int))
    assert json.loads(err.strip().splitlines()[-1])["command"] == "ranks"


def test_taildep_values():
    code, out, _ = run("taildep", "--family", "nb", "--a", "5")
    assert code == 0
    payload = json.loads(out)
    assert payload["exact"] == 0.75390625
    assert payload["asymptotic"] == pytest.approx(0.747687, abs=1e-6)
    assert payload["empirical"] == []


def test_taildep_empirical():
    code, out, _ = run("taildep", "--base", "comonotone", "--a", "5", "--t", "0.9", "--t", "0.99",
                       "--count", "20000", "--seed", "4")
    assert code == 0
    est = json.loads(out)["empirical"]
    assert [e["t"] for e in est] == [0.9, 0.99]
    assert 0.5 < est[0]["estimate"] <= 1


@pytest.mark.parametrize("argv, field", [
    (["var", "--alpha", "1.5"], "alpha"),
    (["simulate", "--count", "0"], "count"),
    (["simulate", "--a", "-1"], "a"),
    (["density", "--resolution", "1"], "resolution"),
    (["simulate", "--family", "nb", "--family", "nb", "--family", "nb"], "family"),
    (["frobnicate"], "argv"),
    (["simulate", "--bogus"], "argv"),
    ([], "argv"),
])
def test_errors_name_the_field(argv, field):
    code, out, err = run(*argv)
    assert code != 0
    assert out == ""
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith(f"error: field={field} ")


def test_runtime_error_is_single_line(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3\n")
    code, _, err = run("ranks", "--dataset", str(bad))
    assert code == 1
    assert len(err.strip().splitlines()) == 1 and "ragged" in err


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alpha": 0.1, "seed": 9, "family": "poisson", "a": 6}))
    code, out, _ = run("fit", "--config", str(cfg), "--seed", "11")
    assert code == 0
    payload = json.loads(out)
    assert payload["alpha"] == 0.1
    assert payload["seed"] == 11
    assert payload["config"]["family"] == ["poisson"]
    cfg.write_text(json.dumps({"colour": 1}))
    code, _, err = run("fit", "--config", str(cfg))
    assert code == 2 and "field=colour" in err


def test_fit_output(obs):
    code, out, _ = run("fit")
    payload = json.loads(out)
    sel = payload["selected"]
    assert [s["kind"] for s in sel] == ["lognormal", "frechet"]
    assert all(s["var"] > 0 for s in sel)


def test_simulate_and_density_shapes():
    code, out, _ = run("simulate", "--count", "50", "--seed", "1")
    _, rows = read_csv(out)
    assert len(rows) == 50 and list(rows[0]) == ["u1", "u2"]
    u = np.array([[float(r["u1"]), float(r["u2"])] for r in rows])
    assert np.all((u > 0) & (u < 1))
    code, out, _ = run("density", "--resolution", "10", "--family", "poisson", "--a", "6")
    comment, rows = read_csv(out)
    assert len(rows) == 100 and "residual_bound=" in comment
    assert "\r" not in out


@pytest.mark.parametrize("argv", [
    ["simulate", "--count", "2000", "--seed", "5", "--base", "bernstein"],
    ["density", "--resolution", "20", "--base", "wc-shuffle"],
    ["var", "--count", "20000", "--seed", "5", "--family", "poisson", "--a", "6"],
    ["taildep", "--t", "0.95", "--count", "5000", "--seed", "2"],
])
def test_byte_identical_reruns(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(*argv, "--out", str(a))[0] == 0
    assert run(*argv, "--out", str(b), "--workers", "2")[0] == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_var_artifacts(tmp_path):
    code, out, _ = run("var", "--count", "10000", "--seed", "3", "--out", str(tmp_path))
    assert code == 0
    echo = json.loads(out)
    assert echo["artifacts"] == ["var_report.json", "quantiles.csv"]
    report = json.loads((tmp_path / "var_report.json").read_text())
    assert report["seed"] == 3 and report["count"] == 10000 and "config_hash" in report
    assert report["comparator"] == pytest.approx(sum(report["marginal_var"]))
    _, rows = read_csv((tmp_path / "quantiles.csv").read_text())
    q = [float(r["quantile"]) for r in rows]
    assert list(rows[0]) == ["p", "quantile"] and q == sorted(q)


def test_reproduce_small(tmp_path):
    code, _, _ = run("reproduce-paper", "--count", "5000", "--seed", "1", "--out", str(tmp_path))
    assert code == 0
    comp = json.loads((tmp_path / "comparison.json").read_text())
    rows = {r["configuration"]: r for r in comp["rows"]}
    assert rows.keys() == REFERENCE_TABLE.keys()
    assert rows["NB 5"]["reference"] == 8.8474
    assert rows["Po 6 WC"]["reference"] == 9.1402
    assert {r["reference_comparator"] for r in rows.values()} == {8.9174}
    for r in rows.values():
        assert r["abs_diff"] == pytest.approx(abs(r["estimate"] - r["reference"]))
    assert len(list(tmp_path.glob("quantiles_*.csv"))) == 13
    margs = json.loads((tmp_path / "marginals.json").read_text())
    assert [m["reference_var"] for m in margs["marginals"]] == [6.8190, 2.0984]
