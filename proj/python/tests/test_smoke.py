import json
import math
from pathlib import Path

import jsonschema
import pytest

import doseband

SCHEMA = Path(__file__).resolve().parents[2] / "schemas" / "coverage_report.schema.json"


def tiny_config(epochs=5):
    cfg = doseband.DensityModelConfig()
    cfg.hidden_units = 16
    cfg.depth = 2
    cfg.n_components = 4
    cfg.batch_size = 32
    cfg.learning_rate = 3e-3
    cfg.optimizer = "adam"
    cfg.epochs = epochs
    return cfg


@pytest.fixture(scope="module")
def data():
    return doseband.generate(doseband.SyntheticConfig(n=300, seed=3))


@pytest.fixture(scope="module")
def model(data):
    return doseband.train(data, tiny_config(10))


def test_generate_shapes(data):
    assert len(data) == 300
    assert data.dim == 1
    assert len(data.u) == 300
    assert all(0.0 <= t <= 1.0 for t in data.t)


def test_hermite_rule_sums_to_sqrt_pi():
    nodes, weights = doseband.hermite_rule(32)
    assert len(nodes) == 32
    assert math.isclose(sum(weights), math.sqrt(math.pi), rel_tol=1e-12)


def test_quantile_and_oracles():
    assert doseband.quantile([3.0, 1.0, 2.0], 0.5) == 2.0
    assert doseband.true_capo(1.0, 0.0) == 1.0
    assert doseband.lambda_star(0.5, 1.0, 0, doseband.SyntheticConfig(gamma_t=0.0)) == 1.0


def test_bounds_collapse_and_nest(model):
    spec = doseband.BoundSpec()
    at_one = doseband.capo_bounds(model, [1.0], 0.5, 1.0, spec)
    assert at_one["lower"] == at_one["upper"] == at_one["mu_tilde"]
    narrow = doseband.capo_bounds(model, [1.0], 0.5, 1.2, spec)
    wide = doseband.capo_bounds(model, [1.0], 0.5, 1.6, spec)
    assert wide["lower"] <= narrow["lower"] <= narrow["upper"] <= wide["upper"]
    apo = doseband.apo_bounds(model, [0.5, 1.0, 1.5], 0.5, 1.6, spec)
    assert apo["lower"] <= apo["mu_tilde"] <= apo["upper"]


def test_errors_map_to_python(model):
    with pytest.raises(ValueError):
        doseband.capo_bounds(model, [1.0, 2.0], 0.5, 1.6)
    with pytest.raises(ValueError):
        doseband.quantile([], 0.5)


def test_ensemble_ci(data, tmp_path):
    ens = doseband.fit_ensemble(data, tiny_config(3), 4, 11)
    ens.save(str(tmp_path / "ens"))
    back = doseband.Ensemble.load(str(tmp_path / "ens"))
    assert back.digest() == ens.digest()
    ci = doseband.apo_ci(back, [0.5, 1.0], 0.5, 1.6, 0.1)
    assert ci["lower"] <= ci["upper"]


def test_cli_coverage_report_matches_schema(tmp_path):
    d = str(tmp_path / "d.csv")
    code, _, err = doseband.run_cli(
        ["generate", "--n", "200", "--seed", "5", "--out", d, "--oracle-treatments", "0,0.5,1"]
    )
    assert code == 0, err
    m = str(tmp_path / "m.json")
    code, out, err = doseband.run_cli(
        ["train", "--data", d, "--out", m, "--hidden", "16", "--depth", "2",
         "--components", "4", "--optimizer", "adam", "--lr", "3e-3", "--epochs", "5"]
    )
    assert code == 0, err
    report = str(tmp_path / "cov.json")
    code, out, err = doseband.run_cli(
        ["coverage", "--oracle", str(tmp_path / "d_oracle.csv"), "--model", m, "--out", report]
    )
    assert code == 0, err
    doc = json.loads(Path(report).read_text())
    jsonschema.validate(doc, json.loads(SCHEMA.read_text()))
    assert doc["n_points"] == 600


def test_cli_exit_codes(tmp_path):
    code, _, err = doseband.run_cli(["train", "--data", str(tmp_path / "missing.csv"),
                                     "--out", str(tmp_path / "m.json")])
    assert code == 1
    assert err
