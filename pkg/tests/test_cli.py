import csv
import io
import json

import pytest

from seqcert.cli import EXIT_CERT, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, SWEEP_COLUMNS, main, make_grid


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def parse(text):
    return dict(line.split(" ", 1) for line in text.strip().splitlines() if " " in line)


def test_chain_output():
    code, text = run("chain", "--n-max", "6")
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [int(r["n"]) for r in rows] == [2, 3, 4, 5, 6]
    assert float(rows[0]["delta_max"]) == pytest.approx(0.29560, abs=1e-4)


def test_confidence():
    code, text = run("confidence", "--delta", "0.5", "--r", "0.8")
    vals = parse(text)
    assert code == EXIT_OK
    assert float(vals["C_max"]) == pytest.approx(0.877964, abs=1e-6)
    assert float(vals["difference"]) < 1e-6


def test_bound_trivial():
    code, text = run("bound", "--target", "bob", "--delta", "0", "--r", "1", "--conf", "1", "--inc", "0")
    vals = parse(text)
    assert code == EXIT_OK
    assert float(vals["hmin"]) == pytest.approx(0.0, abs=1e-7)
    assert float(vals["guessing_prob"]) == pytest.approx(1.0, abs=1e-7)
    assert "gap" in vals and "margin" in vals


def test_bound_save_and_check(tmp_path):
    cert = tmp_path / "c.json"
    code, text = run("bound", "--target", "charlie", "--delta", "0.5", "--r", "1", "--q", "0.9", "--save-cert", str(cert))
    assert code == EXIT_OK
    assert float(parse(text)["hmin"]) == pytest.approx(0.326052, abs=1e-5)
    code, text = run("certify-check", str(cert))
    assert code == EXIT_OK and text.startswith("PASS")

    # an optimistic claim must be refused
    doc = json.loads(cert.read_text())
    doc["certificate"]["certified_value"] -= 1e-3
    cert.write_text(json.dumps(doc))
    code, text = run("certify-check", str(cert))
    assert code == EXIT_CERT and text.startswith("FAIL")

    # so must infeasible multipliers
    doc["certificate"]["certified_value"] += 1e-3
    doc["certificate"]["multipliers"]["R"] = [[0.0, 0.0], [0.0, 0.0]]
    cert.write_text(json.dumps(doc))
    code, _ = run("certify-check", str(cert))
    assert code == EXIT_CERT


def test_shannon_bound_and_check(tmp_path):
    cert = tmp_path / "s.json"
    code, text = run("bound", "--target", "bob", "--kind", "shannon", "--m", "4", "--delta", "0.5", "--r", "1", "--q", "0.55", "--save-cert", str(cert))
    assert code == EXIT_OK
    assert float(parse(text)["h"]) > 0.5
    assert run("certify-check", str(cert))[0] == EXIT_OK


def test_usage_errors(tmp_path):
    assert run()[0] == EXIT_USAGE
    assert run("bogus")[0] == EXIT_USAGE
    assert run("bound", "--target", "bob")[0] == EXIT_USAGE
    assert run("bound", "--target", "bob", "--delta", "0.5", "--r", "1", "--q", "0.2")[0] == EXIT_USAGE
    assert run("bound", "--target", "joint", "--delta", "0.5", "--r", "1", "--conf", "1", "--inc", "0.6")[0] == EXIT_USAGE
    assert run("bound", "--target", "charlie-trusted", "--kind", "shannon", "--delta", "0.5", "--r", "1", "--q", "0.9")[0] == EXIT_USAGE
    assert run("chain", "--n-max", "40")[0] == EXIT_USAGE
    assert run("certify-check", str(tmp_path / "missing.json"))[0] == EXIT_USAGE
    assert run("sweep", "--delta", "0.5", "--r", "1", "--q-start", "0.1", "--output", str(tmp_path / "x.csv"))[0] == EXIT_USAGE
    assert run("--help")[0] == EXIT_OK


def test_unphysical_stats_exit_code():
    code, _ = run("bound", "--target", "bob", "--delta", "0.5", "--r", "1", "--conf", "1", "--inc", "0.3")
    assert code == EXIT_SOLVER


def test_make_grid():
    assert make_grid(0.5, 1.0, 0.1) == [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    assert make_grid(0.25, 1.0, 0.005)[-1] == 1.0
    assert len(make_grid(0.25, 1.0, 0.005)) == 151


def test_sweep_csv_and_sidecar(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"delta": 0.5, "r": 1.0, "q_grid": [0.5, 0.6, 0.7], "m": 3, "output": str(tmp_path / "a.csv")}))
    code, _ = run("sweep", "--config", str(cfg))
    assert code == EXIT_OK
    text = (tmp_path / "a.csv").read_text(encoding="utf-8")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert tuple(rows[0].keys()) == SWEEP_COLUMNS
    assert [r["Q"] for r in rows] == ["0.500000000", "0.600000000", "0.700000000"]
    assert all(r["certificates"] == "valid" for r in rows)
    assert float(rows[2]["hmin_bob"]) == 0.0
    side = json.loads((tmp_path / "a.csv.plot.json").read_text())
    assert side["x"]["column"] == "Q" and len(side["series"]) == 7

    # flags override the file, and the parallel run is byte identical
    monkeypatch.setenv("SEQCERT_WORKERS", "2")
    code, _ = run("sweep", "--config", str(cfg), "--output", str(tmp_path / "b.csv"), "--targets", "bob,joint", "--kinds", "min-entropy")
    assert code == EXIT_OK
    rows_b = list(csv.DictReader(io.StringIO((tmp_path / "b.csv").read_text())))
    assert [r["hmin_bob"] for r in rows_b] == [r["hmin_bob"] for r in rows]
    assert all(r["h_bob"] == "" and r["hmin_charlie"] == "" for r in rows_b)


def test_bad_worker_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SEQCERT_WORKERS", "many")
    code, _ = run("sweep", "--delta", "0.5", "--r", "1", "--q-step", "0.5", "--output", str(tmp_path / "c.csv"))
    assert code == EXIT_USAGE
