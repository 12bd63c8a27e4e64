from __future__ import annotations

import csv
import io
import json

import pytest

from orbitlab.cli import main
from orbitlab.experiments import DEFAULT_CONFIGS, SCHEMAS, run
from orbitlab.fields import CatalogEntry, builtin_catalog
from orbitlab.homogeneous import QuarticMatrix, h_quartic


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_defaults_validate():
    import jsonschema

    for name, cfg in DEFAULT_CONFIGS.items():
        jsonschema.validate(cfg, SCHEMAS[name])


def test_su_verify_identity_exit_zero(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"params": {"n": 3, "matrices": [QuarticMatrix.identity(3).to_json()]}})
    assert main(["su-verify", "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "certified" and out["payload"]["members"] == 1
    assert out["payload"]["alpha_sigma_alpha"] == [1, 0, 0, 0]


def test_failed_check_exit_one(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"params": {"n": 3, "matrices": [h_quartic(3).to_json()]}})
    assert main(["su-verify", "--config", cfg]) == 1
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "failed"
    assert out["payload"]["failures"][0]["witness"] is not None


def test_small_N_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"params": {"primes": [2, 3], "N": 3, "eps": "1/1000"}})
    assert main(["torus-nondensity", "--config", cfg]) == 2
    assert "smallest admissible N is 4" in capsys.readouterr().err


@pytest.mark.parametrize("doc", [
    {"params": {"primes": [2, 3], "N": 4}},
    {"params": {"primes": [2, 3], "N": 4, "eps": "1/1000", "bogus": 1}},
    {"params": {"primes": [2, 3], "N": 4, "eps": "0.7"}},
    {"params": {"primes": [2, 3], "N": 4, "eps": "x"}},
])
def test_schema_errors(tmp_path, doc):
    assert main(["torus-nondensity", "--config", write(tmp_path, "c.json", doc)]) == 2


def test_missing_file_and_seed(tmp_path):
    assert main(["systole", "--config", str(tmp_path / "nope.json")]) == 2
    cfg = write(tmp_path, "c.json", {"params": {"field": "cubic-81"}})
    assert main(["density-probe", "--config", cfg]) == 2
    cfg = write(tmp_path, "d.json", {"params": {"n": 3, "random_products": 2}})
    assert main(["su-verify", "--config", cfg]) == 2


def test_unknown_field(tmp_path):
    cfg = write(tmp_path, "c.json", {"params": {"field": "quintic"}})
    assert main(["compact-orbit", "--config", cfg]) == 2


def test_torus_nondensity_rows(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"params": {"primes": [2, 3], "N": 4, "eps": 0.001, "window": 2},
                                     "output": {"report": str(tmp_path / "r.json"), "rows": str(tmp_path / "r.csv")}})
    assert main(["torus-nondensity", "--config", cfg, "--emit-rows"]) == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    for key in ("params", "eps", "L", "checked_count", "worst_margin", "status"):
        assert key in rep["payload"]
    assert isinstance(rep["payload"]["worst_margin"], str)
    rows = list(csv.DictReader(io.StringIO((tmp_path / "r.csv").read_text())))
    assert len(rows) == rep["payload"]["checked_count"]
    assert list(rows[0])[0] == "experiment" and list(rows[0])[-3:] == ["value_lo", "value_hi", "status"]


def test_planted_relation_via_cli(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"params": {"primes": [2, 3], "N": 4, "H": 3, "plant": {"index": 1, "value": "1/2"}}})
    assert main(["torus-independence", "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["payload"]["relation"] == [2, 0, 0, 0, 1]
    cfg = write(tmp_path, "d.json", {"params": {"primes": [2, 3], "N": 4, "H": 3, "expect": "independent",
                                                "plant": {"index": 1, "value": "1/2"}}})
    assert main(["torus-independence", "--config", cfg]) == 1


def test_systole_from_file(tmp_path, capsys):
    (tmp_path / "l.txt").write_text("2\n2 0\n0 1/2\n")
    cfg = write(tmp_path, "c.json", {"params": {"lattice": str(tmp_path / "l.txt")}})
    assert main(["systole", "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["payload"] == {"length_lo": 0.5, "length_hi": 0.5, "vector": [0, 1]}


def test_deterministic_reports():
    cfg = {"params": {"n1": 3, "n2": 3, "samples": 4, "length": 4}, "seed": 7}
    a = run("su-inclusion", cfg).to_json(with_timing=False)
    b = run("su-inclusion", cfg).to_json(with_timing=False)
    assert a == b
    cfg = {"params": {"field": "cubic-81", "sizes": [1, 3], "targets": 2}, "seed": 3}
    assert run("density-probe", cfg).to_json(False) == run("density-probe", cfg).to_json(False)
    assert run("density-probe", cfg).status == "statistical"


def test_workers_do_not_change_output():
    cfg = {"params": {"fields": ["cubic-81", "cubic-49"], "s_min": -1, "s_max": 1, "s_step": 1,
                      "d_values": [0, 1], "net_grid": 2, "net_t_steps": 2}}
    assert run("avoidance", cfg, workers=1).to_json(False) == run("avoidance", cfg, workers=2).to_json(False)


def test_catalog(capsys):
    assert main(["catalog"]) == 0
    assert "x**3 - 3*x - 1" in capsys.readouterr().out
    assert main(["catalog", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    entries = [CatalogEntry.from_json(e) for e in doc["fields"]]
    assert entries == list(builtin_catalog().values())
    assert "torus-nondensity" in doc["defaults"]


def test_precision_cap_from_config(monkeypatch):
    monkeypatch.delenv("ORBITLAB_PRECISION_CAP", raising=False)
    import os

    run("compact-orbit", {"params": {"field": "cubic-81", "grid": 1}, "precision_cap": 512})
    assert os.environ["ORBITLAB_PRECISION_CAP"] == "512"
    monkeypatch.delenv("ORBITLAB_PRECISION_CAP")
