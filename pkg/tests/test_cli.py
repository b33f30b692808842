import json

import pytest

from theonlab.cli import main
from theonlab.relational import parse_model


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_list_text_and_json(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in ("qr-tournamon", "skew-graphon", "dev-not-uinduce", "sep-uinduce-ucouple"):
        assert name in out
    assert main(["list", "--json"]) == 0
    data = _json(capsys)
    assert {"theories", "theons", "interpretations", "experiments"} <= set(data)


def test_usage_errors_exit_2(capsys, tmp_path):
    assert main(["frobnicate"]) == 2
    assert main([]) == 2
    assert main(["density", "--theon", "qr-tournamon:k=2", "--model", str(tmp_path / "missing.mod")]) == 2
    assert main(["sample", "--theon", "no-such-theon", "--n", "3"]) == 2
    assert main(["run", "no-such-experiment"]) == 2
    assert main(["run", "sep-uinduce-ucouple", "--ell", "2"]) == 2
    assert main(["sample", "--theon", "qr-graphon", "--n", "3", "--bogus"]) == 2
    err = capsys.readouterr().err
    assert "error" in err


def test_model_parse_errors_report_position(capsys, tmp_path):
    bad = tmp_path / "bad.mod"
    bad.write_text("n=3\nE: (1,2\n")
    assert main(["density", "--theon", "qr-tournamon:k=2", "--model", str(bad), "--samples", "100"]) == 2
    assert "line 2" in capsys.readouterr().err


def test_sample_complete_graph(capsys):
    assert main(["sample", "--theon", "qr-graphon:p=1", "--n", "4", "--seed", "1"]) == 0
    m = parse_model(capsys.readouterr().out)
    assert m.n == 4 and len(m.relations["E"]) == 12


def test_density_of_directed_triangle(capsys, tmp_path):
    f = tmp_path / "c3.mod"
    f.write_text("n=3\nE: (1,2);(2,3);(3,1)\n")
    assert main(["density", "--theon", "qr-tournamon:k=2", "--model", str(f), "--samples", "2e5", "--seed", "7"]) == 0
    r = _json(capsys)
    est = {e["name"]: e for e in r["estimates"]}
    assert abs(est["unlabeled"]["value"] - 0.25) < 4 * est["unlabeled"]["stderr"] + 1e-9
    assert r["seed"] == 7 and r["decision"] == "estimate" and r["n_samples"] == 200_000


def test_weak_independence_of_order_rejects(capsys):
    code = main(["test", "--property", "weak-independence", "--theon", "linear-order", "--level", "1",
                 "--m", "2", "--samples", "20000"])
    assert code == 1 and _json(capsys)["decision"] == "reject"


def test_property_passes_exit_0(capsys):
    assert main(["test", "--property", "independence", "--theon", "constant-graphon:p=0.3", "--level", "1",
                 "--trials", "2000"]) == 0
    assert _json(capsys)["decision"] == "pass"
    assert main(["test", "--property", "locality", "--theon", "linear-order", "--sets", "1,2;2,3",
                 "--samples", "50000"]) == 1
    assert main(["test", "--property", "independence", "--theon", "linear-order"]) == 2


def test_seed_resolution(capsys, monkeypatch):
    args = ["run", "alternating-census", "--k", "2"]
    monkeypatch.delenv("THEONLAB_SEED", raising=False)
    assert main(args) == 0
    assert _json(capsys)["seed"] == 0
    monkeypatch.setenv("THEONLAB_SEED", "42")
    main(args)
    assert _json(capsys)["seed"] == 42
    main(args + ["--seed", "5"])
    assert _json(capsys)["seed"] == 5
    monkeypatch.setenv("THEONLAB_SEED", "x")
    assert main(args) == 2


def test_census_through_cli(capsys):
    assert main(["run", "alternating-census", "--k", "2"]) == 0
    r = _json(capsys)
    assert r["details"]["histogram"] == {"0": 24, "1": 16, "2": 24}


def test_run_replays_from_embedded_config(capsys):
    argv = ["run", "sep-uinduce-ucouple", "--ell", "1", "--p", "0.5", "--samples", "1e5", "--seed", "11"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    r = json.loads(first)
    replay = ["run", "sep-uinduce-ucouple", "--samples", str(r["n_samples"]), "--seed", str(r["seed"]),
              "--threads", "1"] + [x for k, v in r["params"].items() for x in (f"--{k}", str(v))]
    assert main(replay) == 0
    assert capsys.readouterr().out == first


def test_samples_accepts_scientific_notation(capsys):
    assert main(["test", "--property", "rank", "--theon", "linear-order", "--level", "1", "--trials", "1e3"]) == 0
    assert _json(capsys)["n_samples"] == 1000
    assert main(["test", "--property", "rank", "--theon", "linear-order", "--level", "1", "--trials", "1.5"]) == 2
