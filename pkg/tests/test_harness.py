import csv
import math

import numpy as np
import pytest
import yaml

from finmix import dgp, presets
from finmix.errors import ConfigError, DataIOError
from finmix.harness import load_config, parse_config, run_montecarlo, true_targets
from finmix.harness.cli import main
from finmix.harness.montecarlo import aggregate


def _doc(**extra):
    doc = {
        "version": 1,
        "model": {"preset": "gm1"},
        "design": {"n": [2000], "replications": 2, "seed": 3,
                   "covariate_law": {"kind": "uniform", "low": -3.0, "high": 3.5}},
        "tuning": {"eps": 0.12, "beta": 0.12, "c_t": 1 / 1.5, "c_s": 2.0},
        "points": {"x0": 0.0, "x1": 0.5},
        "output": {"figures": False},
    }
    for k, v in extra.items():
        doc[k] = v
    return doc


def _write(tmp_path, doc, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return p


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# config ------------------------------------------------------------------------


def test_unknown_key_names_its_path():
    with pytest.raises(ConfigError, match=r"design\.covariate_law\.width: unknown key"):
        parse_config(_doc(design={"n": [10], "covariate_law": {"kind": "uniform", "width": 1}}))


def test_weights_must_sum_to_one():
    model = {"covariate_dim": 1, "weights": [0.5, 0.4], "components": [
        {"regression": {"coefficients": [0, 1]}, "error": {"family": "gaussian", "sigma": 1}},
        {"regression": {"coefficients": [1, 0]}, "error": {"family": "gaussian", "sigma": 1}},
    ]}
    with pytest.raises(ConfigError, match="model.weights"):
        parse_config(_doc(model=model))


def test_explicit_model_matches_preset():
    model = {"covariate_dim": 1, "weights": [0.6, 0.4], "components": [
        {"regression": {"coefficients": [1, 2]}, "error": {"family": "gaussian", "sigma": 1.5}},
        {"regression": {"coefficients": [-1, 1]}, "error": {"family": "gaussian", "sigma": 0.5}},
    ]}
    cfg = parse_config(_doc(model=model))
    from finmix import model_core as mc

    for t in (-1.0, 2.0):
        assert mc.pop_cond_mgf(cfg.model, t, 0.3) == mc.pop_cond_mgf(presets.gm1(), t, 0.3)


def test_version_and_point_checks():
    with pytest.raises(ConfigError, match="version"):
        parse_config(_doc(version=2))
    with pytest.raises(ConfigError):
        parse_config(_doc(points={"x0": 0.5, "x1": 0.5}))
    with pytest.raises(ConfigError):
        parse_config(_doc(design={"n": [100, 50]}))


def test_load_errors(tmp_path):
    with pytest.raises(DataIOError):
        load_config(tmp_path / "none.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("version: [1\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_seed_override_range():
    cfg = parse_config(_doc())
    assert cfg.with_overrides(seed=9).seed == 9
    with pytest.raises(ConfigError):
        cfg.with_overrides(seed=-1)


# monte carlo -----------------------------------------------------------------------


def test_truth_labels_the_upper_tail_component_first():
    t = true_targets(presets.gm1(), 0.0, 0.5)
    assert t.values == {"delta": 1.0, "nabla": 0.5, "lambda": 0.6, "m1_x0": 1.0, "m2_x0": -1.0}
    s = true_targets(presets.gm1().permuted([1, 0]), 0.0, 0.5)
    assert s.values == t.values


def test_rate_rows_match_hand_statistics():
    cfg = parse_config(_doc(design={"n": [1000, 2000], "replications": 3, "seed": 5,
                                    "covariate_law": {"kind": "uniform", "low": -3.0, "high": 3.5}}))
    rep = run_montecarlo(cfg)
    truth = true_targets(cfg.model, cfg.x0, cfg.x1)
    rows = {(e, n, s): v for e, n, s, v in rep.rates}
    for n in (1000, 2000):
        recs = [r for r in rep.records if r.n == n and r.estimates]
        for e in ("delta", "lambda"):
            err = np.array([r.estimates[e] - truth.values[e] for r in recs])
            assert rows[(e, n, "bias")] == pytest.approx(err.mean(), abs=1e-15)
            assert rows[(e, n, "rmse")] == pytest.approx(math.sqrt(np.mean(err**2)), abs=1e-15)
            assert rows[(e, n, "median_abs")] == pytest.approx(np.median(np.abs(err)), abs=1e-15)
            assert rows[(e, n, "succeeded")] + rows[(e, n, "failed")] == 3
    slope = np.polyfit(np.log([1000, 2000]), np.log(rep.series("rmse")["delta"]), 1)[0]
    assert rep.slope("delta") == pytest.approx(slope, abs=1e-12)


def test_replications_are_isolated():
    # one replication's result depends only on its own derived seed
    cfg = parse_config(_doc())
    full = run_montecarlo(cfg)
    one = parse_config(_doc(design={"n": [2000], "replications": 1, "seed": 3,
                                    "covariate_law": {"kind": "uniform", "low": -3.0, "high": 3.5}}))
    single = run_montecarlo(one)
    assert single.records[0].estimates == full.records[0].estimates
    assert full.records[0].seed == dgp.derive_seed(3, 0, 0)


def test_failures_are_counted_not_aggregated():
    cfg = parse_config(_doc())
    rep = run_montecarlo(cfg)
    bad = rep.records[1]
    bad.estimates, bad.status = {}, "SingularSystem"
    truth = true_targets(cfg.model, cfg.x0, cfg.x1)
    rows = {(e, n, s): v for e, n, s, v in aggregate(rep.records, cfg.n_grid, 2, truth, rep.estimands)}
    assert rows[("delta", 2000, "failed")] == 1
    assert rows[("delta", 2000, "bias")] == pytest.approx(rep.records[0].estimates["delta"] - 1.0, abs=1e-15)


# cli -----------------------------------------------------------------------------


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml")]) == 4
    bad = _write(tmp_path, _doc(version=7))
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "ConfigError" in capsys.readouterr().err


def test_cli_simulate_then_estimate(tmp_path, capsys):
    cfg = _write(tmp_path, _doc(output={"dir": str(tmp_path / "o"), "figures": False}))
    assert main(["simulate", "--config", str(cfg)]) == 0
    sample = tmp_path / "o" / "sample.csv"
    assert sample.exists()
    assert main(["estimate", "--config", str(cfg), "--data", str(sample)]) == 0
    scal = {r["name"]: r["value"] for r in _read_csv(tmp_path / "o" / "fit_scalars.csv")}
    assert abs(float(scal["delta_hat"]) - 1.0) < 0.5
    assert scal["n"] == "2000"


def test_cli_estimate_rejects_dimension_mismatch(tmp_path):
    d = dgp.Dataset(np.ones((5, 2)), np.arange(5.0))
    data = tmp_path / "d.csv"
    d.to_csv(data)
    cfg = _write(tmp_path, _doc(output={"dir": str(tmp_path / "o"), "figures": False}))
    assert main(["estimate", "--config", str(cfg), "--data", str(data)]) == 2


def test_cli_montecarlo_tables(tmp_path):
    doc = _doc(design={"n": [2000], "replications": 1, "seed": 1,
                       "covariate_law": {"kind": "uniform", "low": -3.0, "high": 3.5}},
               output={"dir": str(tmp_path / "mc"), "figures": False})
    assert main(["montecarlo", "--config", str(_write(tmp_path, doc))]) == 0
    rates = _read_csv(tmp_path / "mc" / "rates.csv")
    got = {r["estimand"] for r in rates}
    assert got == {"delta", "nabla", "lambda", "m1_x0", "m2_x0"}
    assert all(r["n"] == "" for r in rates if r["statistic"] == "rmse_loglog_slope")
    assert len(_read_csv(tmp_path / "mc" / "replications.csv")) == 1


def _verdicts(folder):
    return {r["condition"]: r["outcome"] for r in _read_csv(folder / "verdicts.csv")}


def test_cli_diagnose_routes(tmp_path):
    out = tmp_path / "gm1"
    doc = _doc(output={"dir": str(out), "figures": False})
    assert main(["diagnose", "--config", str(_write(tmp_path, doc))]) == 0
    v = _verdicts(out)
    assert v["Cond1"] == "fails" and v["Cond3"] == "holds"

    out = tmp_path / "deg"
    doc = _doc(model={"preset": "degenerate"}, output={"dir": str(out), "figures": False})
    assert main(["diagnose", "--config", str(_write(tmp_path, doc, "deg.yaml"))]) == 0
    assert _verdicts(out)["Cond1"] == "holds"

    out = tmp_path / "gm3"
    doc = _doc(model={"preset": "gm3"}, points={"x0": 1.0, "x1": 1.1, "X": [1.1, 0.8]},
               output={"dir": str(out), "figures": False})
    assert main(["diagnose", "--config", str(_write(tmp_path, doc, "gm3.yaml")), "--detect-j"]) == 0
    report = dict(line.split(" = ", 1) for line in (out / "report.txt").read_text().splitlines())
    assert report["J_detected"] == "3"
