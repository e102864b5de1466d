import math
import os

import numpy as np
import pytest

import hotspot_sim as hs


def test_kernel_values():
    p = hs.SeppParams(mu_bar=5.0, theta=1.0, omega=0.1, sigma_x=1.0, sigma_y=1.0)
    assert hs.triggering(p, 1.0, 0.0, 0.0) == pytest.approx(0.1 * math.exp(-0.1))
    assert hs.offspring_mean(p) == pytest.approx(2 * math.pi)
    with pytest.raises(ValueError):
        hs.triggering(p, 0.0, 0.0, 0.0)


def test_background_peak():
    p = hs.SeppParams(mu_bar=2 * math.pi * 225, theta=0.1, omega=0.1, sigma_x=0.1, sigma_y=0.1)
    assert hs.background_intensity(p, 0.0, 0.0) == pytest.approx(1.0)


def test_intensity_and_cell_integral():
    p = hs.SeppParams(8.0, hs.theta_for_offspring_mean(0.3, 0.2, 0.2), 0.2, 0.2, 0.2)
    d = hs.SpatialDomain.centered(4, 4, 1, 10)
    history = np.array([[0.1, 0.1, 1.0], [-0.3, 0.2, 2.5]])
    total = sum(hs.cell_integral(p, history, d, c, 3.0) for c in range(d.cell_count))
    assert total > 0
    assert hs.conditional_intensity(p, history, 0.1, 0.1, 3.0) > hs.conditional_intensity(
        p, np.empty((0, 3)), 0.1, 0.1, 3.0
    )
    with pytest.raises(ValueError):
        hs.conditional_intensity(p, history[::-1].copy(), 0.0, 0.0, 3.0)


def test_fit_recovers_parameters():
    truth = hs.SeppParams(8.0, hs.theta_for_offspring_mean(0.3, 0.1, 0.1), 0.2, 0.1, 0.1)
    d = hs.SpatialDomain.centered(30, 29, 1, 500)
    events = hs.sample_events(truth, d, 500.0, 99)
    assert events.shape[1] == 3
    assert np.all(np.diff(events[:, 2]) >= 0)
    init = hs.default_initial_params(len(events), d, 0.0, 500.0)
    report = hs.fit(events, d, 0.0, 500.0, init)
    assert report.converged
    assert np.all(np.diff(report.loglik) >= -1e-8 * np.abs(report.loglik[:-1]))
    assert report.params.mu_bar == pytest.approx(truth.mu_bar, rel=0.2)
    assert report.params.omega == pytest.approx(truth.omega, rel=0.3)


def test_mavg_bandwidth():
    counts = [[1.0, 2.0, 0.0]] * 6
    grid = hs.default_beta_grid()
    assert len(grid) == 25
    assert hs.mavg_fit_bandwidth(counts, grid) == grid[0]
    assert hs.mavg_forecast_mse(counts, 0.5) == pytest.approx(0.0)


def test_spearman():
    assert hs.spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)


def test_config_round_trip():
    c = hs.ExperimentConfig.defaults()
    assert c.runs == 50
    assert c.models == ["S1", "S2", "S3", "M1", "M2", "M3"]
    assert c.eval_start == 2000
    back = hs.ExperimentConfig.from_json(c.to_json())
    assert back.to_json() == c.to_json()
    with pytest.raises(hs.ConfigError):
        hs.ExperimentConfig.from_json('{"runz": 1}')


def test_smoke_experiment(tmp_path):
    data = os.environ.get("HOTSPOT_TEST_DATA")
    if not data:
        pytest.skip("HOTSPOT_TEST_DATA not set")
    c = hs.ExperimentConfig.load(os.path.join(data, "smoke.json"))
    c.runs = 1
    c.models = "S2,M2"
    assert hs.run_experiment(c, tmp_path, sanity=True) == 0
    for name in ["relative_counts.csv", "thresholds.csv", "sanity.csv", "manifest.json"]:
        assert (tmp_path / name).exists()
    header = (tmp_path / "relative_counts.csv").read_text().splitlines()[0]
    assert header == "run,day,district,model,true_hotspots,predicted_hotspots,value,sentinel"
