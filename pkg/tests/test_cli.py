import json

import numpy as np
import pytest

from sslh import cli
from sslh.harness import read_results


@pytest.fixture
def planted(tmp_path):
    prefix = tmp_path / "g"
    assert cli.main(["generate", "--n", "900", "--avg-degree", "10", "--h", "8", "--dist", "powerlaw:0.3",
                     "--seed", "4", "--label-fraction", "0.1", "--out-prefix", str(prefix)]) == 0
    return prefix


def last_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_generate_writes_files(planted, capsys):
    for ext in (".edges", ".labels", ".meta.json", ".obs"):
        assert planted.with_name(planted.name + ext).exists()
    obs = planted.with_name("g.obs").read_text().splitlines()
    assert len(obs) == 90


def test_estimate_then_propagate(planted, tmp_path, capsys):
    capsys.readouterr()
    hpath = tmp_path / "H.json"
    assert cli.main(["estimate", "--graph", f"{planted}.edges", "--labels", f"{planted}.obs", "--k", "3",
                     "--method", "dhe", "--out", str(hpath)]) == 0
    H = np.array(last_json(capsys)["values"])
    assert H.shape == (3, 3) and np.allclose(H.sum(axis=1), 1.0)
    out = tmp_path / "beliefs.tsv"
    assert cli.main(["propagate", "--graph", f"{planted}.edges", "--labels", f"{planted}.obs",
                     "--H", str(hpath), "--s", "0.5", "--r", "10", "--ec", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "node\tf_0\tf_1\tf_2\tpredicted" and len(lines) == 901


def test_propagate_homophily_preset_needs_no_H(planted, tmp_path):
    out = tmp_path / "b.tsv"
    assert cli.main(["propagate", "--graph", f"{planted}.edges", "--labels", f"{planted}.obs",
                     "--preset", "hf", "--epsilon", "1.0", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 901


def test_spectral(planted, tmp_path, capsys):
    capsys.readouterr()
    hpath = tmp_path / "H.json"
    hpath.write_text(json.dumps({"form": "doubly_stochastic",
                                 "values": [[0.1, 0.8, 0.1], [0.8, 0.1, 0.1], [0.1, 0.1, 0.8]]}))
    assert cli.main(["spectral", "--graph", f"{planted}.edges", "--H", str(hpath), "--epsilon", "0.01"]) == 0
    rep = last_json(capsys)
    assert rep["epsilon_star"] == pytest.approx(1 / rep["rho"])
    assert rep["converges"] is (0.01 < rep["epsilon_star"])


def test_experiment_requires_seed(tmp_path):
    cfg = tmp_path / "x.toml"
    cfg.write_text('f = 0.05\n[graph]\nn = 300\navg_degree = 8\nh = 8\n')
    with pytest.raises(SystemExit):
        cli.main(["experiment", "--config", str(cfg)])
    out = tmp_path / "res.csv"
    assert cli.main(["experiment", "--config", str(cfg), "--seed", "1", "--repetitions", "2",
                     "--out", str(out)]) == 0
    with open(out) as fh:
        rows = read_results(fh)
    assert len(rows) == 2 and rows[0]["status"] == "ok"


def test_config_file_with_overrides(tmp_path, capsys):
    cfg = tmp_path / "g.toml"
    cfg.write_text('[graph]\nn = 300\navg_degree = 8\nh = 8\nseed = 2\n')
    assert cli.main(["generate", "--config", str(cfg), "--n", "450", "--out-prefix", str(tmp_path / "a")]) == 0
    assert last_json(capsys)["n"] == 450


def test_library_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.edges"
    bad.write_text("0\t1\nnot an edge\n")
    lab = tmp_path / "l"
    lab.write_text("0\t0\n1\t1\n")
    assert cli.main(["estimate", "--graph", str(bad), "--labels", str(lab), "--method", "mhe"]) == 2
    assert "bad.edges:2:" in capsys.readouterr().err
