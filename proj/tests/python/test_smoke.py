import json
import math
from pathlib import Path

import numpy as np
import pytest

import dualstop

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def tiny_config(tmp_path, **method):
    config = {
        "model": {"type": "gbm", "spot": [36.0], "rate": 0.06, "sigma": [0.2]},
        "grid": {"maturity": 1.0, "exercise_dates": 5},
        "payoff": {"kind": "put", "strike": 40.0},
        "method": {
            "name": "one",
            "variations": ["V1", "V4", "V5"],
            "phi_hidden": [8, 8],
            "psi_hidden": [8, 8],
            "train": {"max_epochs": 3, "batch_size": 64},
        },
        "simulation": {"paths": 2000},
        "evaluation": {"paths": 2000, "hedge_paths": 1000},
        "seeds": {"master": 3},
        "output": {"directory": str(tmp_path / "run")},
    }
    config["method"].update(method)
    return config


def test_oracles():
    assert dualstop.black_scholes_put(36, 40, 0.06, 0.2, 1.0) == pytest.approx(3.8443, abs=1e-4)
    bermudan = dualstop.binomial_bermudan_put(36, 40, 0.06, 0.2, 1.0, 50, 2000)
    assert 4.47 < bermudan < 4.49
    put = dualstop.heston_european_put(100, 0.01, 0.1, 2.0, 0.1, 0.2, -0.3, 100, 1.0)
    assert put == pytest.approx(0.935270065824, abs=1e-9)


def test_resolve_bundled_config():
    resolved = dualstop.resolve_config(CONFIGS / "bs1d_put_method1.json")
    assert resolved["grid"]["exercise_dates"] == 50
    assert resolved["method"]["variations"] == ["V1", "V4", "V5"]


def test_invalid_variation_is_reported(tmp_path):
    config = tiny_config(tmp_path, name="two")
    with pytest.raises(dualstop.ConfigError, match="V1"):
        dualstop.resolve_config(config)


def test_simulate_shapes_and_drift(tmp_path):
    config = tiny_config(tmp_path)
    config["model"]["sigma"] = [1e-12]
    states, increments = dualstop.simulate(config, 4, 1)
    assert states.shape == (4, 6, 1)
    assert increments.shape == (4, 5, 1)
    assert np.allclose(states[:, -1, 0], 36.0 * math.exp(0.06), rtol=1e-9)


def test_run_and_report(tmp_path):
    config = tiny_config(tmp_path)
    result = dualstop.run(config)
    assert result["n_eval"] == 2000
    assert result["lower_mean"] <= result["upper_mean"] + 3 * result["gap_se"]
    report = dualstop.render_report(result["directory"])
    bounds = json.loads((Path(result["directory"]) / "bounds.json").read_text())
    assert json.dumps(bounds["lower_mean"]) in report
    assert "n/a" in report

    evaluated = dualstop.evaluate_policy(Path(result["directory"]) / "policy", config, 500, 9)
    assert evaluated["lower"].shape == (500,)
    assert len(evaluated["stop_date"]) == 500
