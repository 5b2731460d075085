import json

import pytest

from genlab import run_experiment
from genlab.errors import ConfigError
from genlab.harness import (
    EXIT_CONFIG_ERROR,
    EXIT_FAIL_VERDICT,
    EXIT_OK,
    drift_sweep,
    main,
    tabular_rows,
    validate_config,
)


def base_config(**overrides):
    config = {
        "kind": "evaluate",
        "seed": 7,
        "family": {"kind": "mdp", "chain_length": 2, "slip_grid": [0.0, 1.0]},
        "distribution": {"goals": [{"slip": 0.0}, {"slip": 1.0}], "weights": [0.6, 0.4]},
        "agent": {"kind": "scripted", "behavior": "always_forward"},
        "plan": {"mode": "exact", "n_rollouts": 50},
    }
    config.update(overrides)
    return config


def test_evaluate_dirac_equals_per_task():
    config = base_config(distribution={"goals": [{"slip": 0.0}]})
    report = run_experiment(config)
    generality = report.results["generality"]
    assert generality["mean"] == 1.0
    assert list(generality["per_task"].values())[0][0] == 1.0


def test_config_roundtrip_through_json():
    config = base_config()
    assert json.loads(json.dumps(config)) == config


def test_reports_are_byte_identical():
    config = base_config(tail_delta=0.3, failure_theta=0.5)
    a = run_experiment(config)
    b = run_experiment(json.loads(json.dumps(config)))
    assert a.numeric_payload() == b.numeric_payload()


def test_validation_field_paths():
    with pytest.raises(ConfigError) as err:
        validate_config({"kind": "mystery"})
    assert "kind" in str(err.value)
    with pytest.raises(ConfigError) as err:
        validate_config({"kind": "fragility", "family": {"kind": "mdp"}, "distribution": {}})
    assert "eta" in str(err.value)


def test_axioms_experiment_and_verdict():
    config = base_config(
        kind="axioms",
        distribution={"goals": [{"slip": 0.0}]},
        axioms=["G1", "A4"],
    )
    report = run_experiment(config)
    assert report.results["overall_verdict"] == "pass"
    rows = tabular_rows("axioms", report.results)
    assert {row["axiom"] for row in rows} == {"G1", "A4"}


def test_fragility_experiment_report():
    config = base_config(kind="fragility", eta=0.3)
    report = run_experiment(config)
    cert = report.results["certificate"]
    assert report.results["overall_verdict"] == "pass"
    assert cert["valid"] is True
    assert cert["tv"] <= 0.3 + 1e-12
    assert cert["post_verdict"]["verdict"] == "fail"


def test_worst_case_experiment():
    config = base_config(kind="worst-case", eta=0.5)
    report = run_experiment(config)
    assert report.results["value"] == 0.0
    assert report.results["tv_constrained"]["value"] <= 0.6


def test_robustness_experiment():
    config = base_config(
        kind="robustness",
        distribution={"goals": [{"slip": 0.0}, {"slip": 1.0}], "weights": [0.4, 0.6]},
        perturbations={"noise_level": 1.0, "only": ["slip_increment"]},
    )
    report = run_experiment(config)
    assert report.results["counterexample"]["event_mass"] == pytest.approx(0.4, abs=1e-12)
    assert report.results["overall_verdict"] == "fail"


def test_transfer_experiment_memorizer_preset():
    config = {
        "kind": "transfer",
        "seed": 0,
        "setup": {"preset": "memorizer", "support": 2, "n": 1},
    }
    report = run_experiment(config)
    tb = report.results["transfer_bound"]
    assert tb["gap"] == pytest.approx(-0.5, abs=1e-12)
    assert tb["satisfied"] is True
    assert report.results["lemma_correlated"]["gap"] == pytest.approx(0.5, abs=1e-12)


def test_externality_experiment_config():
    config = base_config(
        kind="externality",
        distribution={"goals": [{"slip": 0.0}]},
        tau_bad={"slip": 1.0},
        epsilon=0.2,
        n=3,
        trials=400,
        rules=["always_one"],
    )
    report = run_experiment(config)
    r = report.results["reports"][0]
    assert r["p0_declare"] == 1.0 and r["correct_sum"] == pytest.approx(1.0)


def test_relativity_experiment():
    config = base_config(
        kind="relativity",
        family={"kind": "mdp", "chain_length": 2, "slip_grid": [0.0, 0.9]},
        plan={"mode": "exact", "n_rollouts": 400},
    )
    report = run_experiment(config)
    assert report.results["overall_verdict"] == "pass"


def test_drift_constant_and_flip():
    constant = base_config(
        kind="drift",
        distribution={"goals": [{"slip": 0.0}, {"slip": 1.0}], "weights": [0.95, 0.05]},
        distribution_end={"goals": [{"slip": 0.0}, {"slip": 1.0}], "weights": [0.95, 0.05]},
        steps=3,
        inner="axioms",
        axioms=["G1"],
    )
    reports = drift_sweep(constant)
    assert len(reports) == 3
    verdicts = [r.results["overall_verdict"] for r in reports]
    assert verdicts == ["pass"] * 3

    flipping = dict(constant)
    flipping["distribution_end"] = {"goals": [{"slip": 0.0}, {"slip": 1.0}], "weights": [0.2, 0.8]}
    flipping["steps"] = 4
    verdicts = [r.results["overall_verdict"] for r in drift_sweep(flipping)]
    assert verdicts[0] == "pass" and verdicts[-1] == "fail"
    assert "pass" in verdicts and "fail" in verdicts


def test_drift_two_steps_two_reports():
    config = base_config(
        kind="drift",
        distribution_end={"goals": [{"slip": 0.0}, {"slip": 1.0}], "weights": [0.4, 0.6]},
        steps=2,
    )
    report = run_experiment(config)
    assert report.results["n_steps"] == 2


def test_cli_exit_codes(tmp_path):
    good = base_config(kind="axioms", distribution={"goals": [{"slip": 0.0}]}, axioms=["G1"])
    path = tmp_path / "good.json"
    path.write_text(json.dumps(good))
    out = tmp_path / "report.json"
    assert main(["axioms", "--config", str(path), "--out", str(out)]) == EXIT_OK
    written = json.loads(out.read_text())
    assert written["results"]["overall_verdict"] == "pass"

    bad = base_config(kind="axioms", distribution={"goals": [{"slip": 1.0}]}, axioms=["G1"])
    path.write_text(json.dumps(bad))
    assert main(["axioms", "--config", str(path), "--out", str(out)]) == EXIT_FAIL_VERDICT

    path.write_text(json.dumps({"agent": {"kind": "scripted"}}))
    assert main(["fragility", "--config", str(path), "--out", str(out)]) == EXIT_CONFIG_ERROR


def test_cli_seed_override_and_tabular(tmp_path):
    config = base_config()
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(config))
    out = tmp_path / "rows.csv"
    code = main(["evaluate", "--config", str(path), "--seed", "99", "--out", str(out), "--format", "tabular"])
    assert code == EXIT_OK
    text = out.read_text().splitlines()
    assert text[0].startswith("estimate") or "estimate" in text[0]
    assert len(text) == 3  # header + one row per support task


def test_report_embeds_config_and_fingerprint():
    report = run_experiment(base_config())
    assert report.config["family"]["kind"] == "mdp"
    assert report.fingerprint["tool"] == "genlab"
    assert "seconds" in report.timing
    payload = json.loads(report.numeric_payload())
    assert "timing" not in payload
