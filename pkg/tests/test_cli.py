"""End-to-end command line checks on temporary files."""

import json

import numpy as np
import pytest

from tomobench._linalg import matrix_from_json
from tomobench.cli import main
from tomobench.design import pauli_design
from tomobench.qstate import random_rank_r_state
from tomobench.sampling import save_dataset, simulate_counts


@pytest.fixture()
def dataset_files(tmp_path):
    rng = np.random.default_rng(31)
    des = pauli_design(2)
    rho = random_rank_r_state(4, 2, rng)
    paths = []
    for i in range(5):
        ds = simulate_counts(rho, des, 100, rng)
        path = tmp_path / f"batch{i}.csv"
        save_dataset(ds, path, seed=31)
        paths.append(path)
    design_path = tmp_path / "design.json"
    design_path.write_text(json.dumps(des.to_json()))
    return tmp_path, paths, design_path, rho


@pytest.mark.parametrize("method", ["ls", "pls", "gls", "posls", "posgls", "ml"])
def test_estimate_single_dataset(dataset_files, method):
    tmp_path, paths, design_path, rho = dataset_files
    out = tmp_path / f"{method}.json"
    code = main(
        [
            "estimate", "--method", method,
            "--data", str(paths[0]),
            "--design", str(design_path),
            "--out", str(out),
        ]
    )
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["method"] == method
    mat = matrix_from_json(payload["matrix"])
    assert abs(np.trace(mat).real - 1.0) < 1e-8
    if method in ("posls", "posgls", "ml"):
        assert payload["converged"] is True
        assert payload["iterations"] >= 1
    err = np.max(np.abs(mat - rho.matrix))
    assert err < 0.5


@pytest.mark.parametrize("method", ["tls", "tgls"])
def test_estimate_batched_methods(dataset_files, method):
    tmp_path, paths, design_path, _ = dataset_files
    out = tmp_path / f"{method}.json"
    argv = ["estimate", "--method", method, "--design", str(design_path), "--out", str(out)]
    for p in paths:
        argv += ["--data", str(p)]
    assert main(argv) == 0
    payload = json.loads(out.read_text())
    assert 0.0 <= payload["threshold_constant"] <= 1.0
    mat = matrix_from_json(payload["matrix"])
    assert np.linalg.eigvalsh(mat).min() > -1e-10


def test_predict_formula(capsys):
    assert main(["predict", "--formula", "ml_bures_mixed", "--d", "8", "--N", "1e5"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert abs(payload["value"] - 0.0014175) < 1e-7


def test_predict_epsilon(capsys):
    assert main(["predict", "--formula", "epsilon", "--d", "256", "--r", "1"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert abs(payload["value"] - 0.82) < 0.02


def test_bench_predict_alias(capsys):
    assert main(["bench", "predict", "--formula", "ls_frobenius", "--d", "2", "--r", "1"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["value"] == 4.0


def test_bench_run_and_seed_override(tmp_path, monkeypatch):
    config = {
        "d": 2,
        "ranks": [1],
        "design": {"kind": "pauli"},
        "m": 40,
        "trials": 3,
        "estimators": ["ls", "pls"],
        "metrics": ["frobenius"],
        "seed": 5,
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    assert main(["bench", "run", "--config", str(cfg_path), "--out", str(out_a)]) == 0
    assert main(["bench", "run", "--config", str(cfg_path), "--out", str(out_b)]) == 0
    assert out_a.read_text() == out_b.read_text()
    assert out_a.read_text().splitlines()[0] == "estimator,metric,d,r,k,m,N,trials,mean,stderr"

    monkeypatch.setenv("TOMO_SEED", "99")
    out_c = tmp_path / "c.csv"
    assert main(["bench", "run", "--config", str(cfg_path), "--out", str(out_c)]) == 0
    assert out_c.read_text() != out_a.read_text()


def test_bench_reproduce(tmp_path):
    out = tmp_path / "fig.csv"
    code = main(
        [
            "bench", "reproduce", "--figure", "fig3a",
            "--trials", "3", "--d", "4", "--shots", "2000",
            "--out", str(out),
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "estimator,metric,d,r,k,m,N,trials,mean,stderr,predicted"
    assert len(lines) > 1
