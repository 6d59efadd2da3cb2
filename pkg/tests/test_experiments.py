import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankone import cli, designs, experiments, linalg
from rankone.errors import ConfigError, FormatError


def phase_cfg(**kw):
    base = {"kind": "phase_diagram", "grid": {"n": [6], "r": [1], "m": [6, 18, 36]}, "trials": 8, "seed": 3}
    base.update(kw)
    return experiments.config_from_dict(base)


@pytest.mark.parametrize(
    "patch",
    [
        {"trials": 0},
        {"grid": {"n": [0], "r": [1], "m": [4]}},
        {"grid": {"n": [4], "r": [1]}},
        {"grid": {"n": [4], "r": [1], "m": [4], "m_per_rn": [2]}},
        {"grid": {"n": [4], "r": [5], "m": [4]}},
        {"eta": [-0.1]},
        {"seed": -1},
        {"mode": "trace"},
        {"measurement": "design"},
        {"kind": "bogus"},
        {"colour": "red"},
        {"solver": {"tol_primal": 0}},
        {"solver": {"step": 1}},
    ],
)
def test_config_validation(patch):
    with pytest.raises(ConfigError):
        phase_cfg(**patch)


def test_config_cells_and_scalars():
    cfg = experiments.config_from_dict(
        {"kind": "phase_diagram", "grid": {"n": [16], "r": [1, 2, 3], "m_per_rn": [6]}, "eta": 0.0})
    assert cfg.cells() == [(16, 1, 96), (16, 2, 192), (16, 3, 288)]
    assert cfg.eta == (0.0,)


def test_load_config_errors(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{oops")
    with pytest.raises(ConfigError):
        experiments.load_config(path)
    with pytest.raises(ConfigError):
        experiments.load_config(tmp_path / "missing.json")


def test_trial_seeds():
    a = experiments.trial_seed(1, 16, 1, 96, 0)
    assert a == experiments.trial_seed(1, 16, 1, 96, 0)
    assert len({experiments.trial_seed(1, 16, 1, 96, t) for t in range(100)}) == 100
    assert a != experiments.trial_seed(2, 16, 1, 96, 0)
    assert 0 <= a < 2**64


def test_phase_diagram_monotone_and_deterministic():
    cfg = phase_cfg()
    first = experiments.run_phase_diagram(cfg)
    second = experiments.run_phase_diagram(cfg)
    assert first.to_csv() == second.to_csv()
    lines = first.to_csv().splitlines()
    assert lines[0] == "n,r,m,eta,seed,trial,rel_error,success,iterations,wall_ms"
    assert len(lines) == 1 + 3 * 8
    assert all(line.endswith(",") for line in lines[1:])
    rates = [c["success_rate"] for c in first.summary["cells"]]
    assert rates == sorted(rates) and rates[-1] == 1.0
    assert first.summary["monotone_in_m"]["pass"]
    assert first.summary["minimality_witness"]["pass"]
    for rec in first.records:
        assert rec.success == (rec.relative_error <= cfg.success_threshold)


def test_grid_extension_keeps_cells():
    small = experiments.run_phase_diagram(phase_cfg(grid={"n": [6], "r": [1], "m": [36]}, trials=3))
    large = experiments.run_phase_diagram(phase_cfg(grid={"n": [6], "r": [1], "m": [18, 36]}, trials=3))
    assert small.to_csv().splitlines()[1:] == large.to_csv().splitlines()[4:]


def test_full_rank_complete_measurements():
    cfg = phase_cfg(grid={"n": [4], "r": [4], "m": [16]}, trials=5)
    result = experiments.run_phase_diagram(cfg)
    assert result.summary["cells"][0]["success_rate"] == 1.0


def test_timing_column():
    result = experiments.run_phase_diagram(phase_cfg(grid={"n": [4], "r": [1], "m": [16]}, trials=2, timing=True))
    rows = result.to_csv().splitlines()[1:]
    assert all(float(r.rsplit(",", 1)[1]) >= 0 for r in rows)


def test_worker_pool_matches_serial(monkeypatch):
    cfg = phase_cfg(grid={"n": [5], "r": [1], "m": [20, 30]}, trials=3)
    monkeypatch.setenv("R1_THREADS", "1")
    serial = experiments.run_phase_diagram(cfg).to_csv()
    monkeypatch.setenv("R1_THREADS", "2")
    assert experiments.run_phase_diagram(cfg).to_csv() == serial
    monkeypatch.setenv("R1_THREADS", "zero")
    with pytest.raises(ConfigError):
        experiments.run_phase_diagram(cfg)


def test_noise_sweep():
    cfg = experiments.config_from_dict({
        "kind": "noise_sweep", "grid": {"n": [6], "r": [1], "m_per_rn": [8]}, "trials": 6, "seed": 1,
        "eta": [0.0, 1e-3, 1e-2, 1e-1],
    })
    result = experiments.run_noise_sweep(cfg)
    assert all(rec.relative_error >= 0 for rec in result.records)
    zero = [r for r in result.records if r.eta == 0]
    assert all(r.success for r in zero)
    per_eta = result.summary["per_eta"]
    assert per_eta[0]["median_ratio"] is None
    assert all(c["median_ratio"] > 0 for c in per_eta[1:])
    assert result.summary["noise_scaling"][0]["pass"]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
def test_renormalized_density(seed, n):
    x = linalg.random_hermitian(n, np.random.default_rng(seed))
    rho = experiments.renormalize_density(x)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert linalg.eigvalsh(rho)[-1] >= -1e-12


def test_tomography_pure_states():
    cfg = experiments.tomography_config(n=(8,), r=(1,), m=(48,), trials=5, seed=2)
    result = experiments.run_tomography(cfg)
    assert all(r.success for r in result.records)
    assert all(r.fidelity > 1 - 1e-3 for r in result.records)
    assert all(abs(r.estimate_trace - 1) <= 1e-12 and r.estimate_min_eigenvalue >= -1e-12 for r in result.records)
    assert result.summary["cells"][0]["median_fidelity_proxy"] > 0.999


def test_tomography_maximally_mixed():
    cfg = experiments.tomography_config(n=(4,), r=(4,), m=(16,), trials=3, signal="maximally_mixed")
    result = experiments.run_tomography(cfg)
    assert all(r.relative_error <= 1e-8 for r in result.records)


def test_design_measurement_experiment(design_n2, tmp_path):
    path = tmp_path / "d2.json"
    designs.save_design(design_n2, path)
    cfg = experiments.config_from_dict({"kind": "phase_diagram", "grid": {"n": [2], "r": [1], "m": [12]},
                                        "trials": 3, "measurement": "design", "design_file": str(path)})
    assert all(r.success for r in experiments.run_phase_diagram(cfg).records)
    bad = experiments.config_from_dict({"kind": "phase_diagram", "grid": {"n": [3], "r": [1], "m": [12]},
                                        "measurement": "design", "design_file": str(path)})
    with pytest.raises(ConfigError):
        experiments.run_phase_diagram(bad)


def test_design_report(design_n2, tmp_path):
    path = tmp_path / "d2.json"
    designs.save_design(design_n2, path, seed=11)
    report = experiments.run_design_report(path, 4)
    assert report["pass"] and report["usable"]
    assert report["vector_count"] == design_n2.size
    for row in report["accuracy"]:
        assert row["theta_inf"] <= 1e-8 and row["ordering_holds"]
    assert report["tight_frame_gap"] <= 1 / 2
    obj = json.loads(path.read_text())
    obj["weights"] = "heavy"
    path.write_text(json.dumps(obj))
    with pytest.raises(FormatError) as info:
        experiments.run_design_report(path)
    assert info.value.field == "weights"


def test_schemas_accept_outputs(design_n2, tmp_path):
    designs.save_design(design_n2, tmp_path / "d.json")
    jsonschema.validate(json.loads((tmp_path / "d.json").read_text()), experiments.load_schema("design"))
    config_schema = experiments.load_schema("config")
    jsonschema.validate({"kind": "phase_diagram", "grid": {"n": [16], "r": [1], "m": [96]}, "trials": 50},
                        config_schema)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"kind": "phase_diagram", "trials": 0}, config_schema)


def test_cli_phase(tmp_path, capsys):
    cfg = tmp_path / "phase.json"
    cfg.write_text(json.dumps({"kind": "phase_diagram", "grid": {"n": [5], "r": [1], "m": [30]}, "trials": 2}))
    assert cli.main(["phase", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "9"]) == 0
    assert cli.main(["phase", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "9"]) == 0
    assert (tmp_path / "a" / "phase.csv").read_bytes() == (tmp_path / "b" / "phase.csv").read_bytes()
    summary = json.loads((tmp_path / "a" / "phase_summary.json").read_text())
    assert summary["config"]["seed"] == 9


def test_cli_noise_and_tomo(tmp_path):
    noise = tmp_path / "noise.json"
    noise.write_text(json.dumps({"kind": "noise_sweep", "grid": {"n": [5], "r": [1], "m_per_rn": [8]},
                                 "trials": 2, "eta": [0.001, 0.01]}))
    assert cli.main(["noise", "--config", str(noise), "--out", str(tmp_path)]) == 0
    tomo = tmp_path / "tomo.json"
    tomo.write_text(json.dumps({"kind": "tomography", "grid": {"n": [4], "r": [1], "m": [24]}, "trials": 2,
                                "signal": "density", "mode": "psd_trace"}))
    assert cli.main(["tomo", "--config", str(tomo), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "tomo.csv").exists()


def test_cli_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"kind": "phase_diagram", "trials": 0}))
    assert cli.main(["phase", "--config", str(cfg)]) == 2
    assert "trials" in capsys.readouterr().err
    assert cli.main(["design", "certify", str(tmp_path / "missing.json")]) == 2
    with pytest.raises(SystemExit):
        cli.main(["bogus"])


def test_cli_design_build_and_certify(tmp_path, capsys):
    out = tmp_path / "d.json"
    assert cli.main(["design", "build", "--n", "2", "--t", "2", "--candidates", "200", "--seed", "4",
                     "--out", str(out)]) == 0
    capsys.readouterr()
    # orders beyond the declared one are reported, not failed
    assert cli.main(["design", "certify", str(out), "--k-max", "3"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert [row["within_tol"] for row in report["accuracy"]] == [True, True, False]
    assert cli.main(["design", "certify", str(out), "--k-max", "2", "--out", str(tmp_path / "r.json")]) == 0
    assert cli.main(["design", "build", "--n", "2", "--t", "4", "--candidates", "20", "--out", str(out)]) == 2
    assert cli.main(["design", "build", "--n", "2", "--t", "2", "--candidates", "10", "--tol", "1e-300",
                     "--out", str(out)]) == 1
    exact = designs.construct_weighted_design(2, 2, 200, np.random.default_rng(4))
    rough = designs.perturb_design(exact, 0.05, np.random.default_rng(5))
    designs.save_design(rough, out)
    assert cli.main(["design", "certify", str(out), "--k-max", "2"]) == 1


def test_cli_verify_quick(tmp_path):
    out = tmp_path / "verify.json"
    assert cli.main(["verify", "--quick", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    jsonschema.validate(report, experiments.load_schema("report"))
    assert report["pass"]
    quantities = [c["quantity"] for c in report["checks"]]
    assert any(q.startswith("sym_moment vs tensor trace") for q in quantities)


def test_documented_configs_validate():
    from pathlib import Path

    docs = Path(__file__).resolve().parents[1] / "docs"
    schema = experiments.load_schema("config")
    assert json.loads((docs / "config.schema.json").read_text()) == schema
    for path in sorted((docs / "configs").glob("*.json")):
        jsonschema.validate(json.loads(path.read_text()), schema)
        experiments.load_config(path)


@pytest.mark.slow
def test_phase_threshold_example():
    cfg = experiments.config_from_dict({"kind": "phase_diagram", "grid": {"n": [16], "r": [1], "m": [16, 48, 96, 160]},
                                        "trials": 50, "seed": 7})
    result = experiments.run_phase_diagram(cfg)
    rates = {c["m"]: c["success_rate"] for c in result.summary["cells"]}
    assert result.summary["monotone_in_m"]["pass"]
    assert [rates[m] for m in sorted(rates)] == sorted(rates.values())
    assert rates[96] >= 0.9
