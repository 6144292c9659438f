from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from hqv.harness import (
    ConfigError,
    DistanceReport,
    ExperimentReport,
    config_from_dict,
    distance_report,
    ks_to_gaussian,
    load_config,
    load_report,
    loglog_slope,
    persist_report,
    replication_normals,
    resolve_workers,
    run_blocks,
    run_experiment,
    w1_floor,
    wasserstein1_to_gaussian,
)

BASE = {"kind": "estimator", "q": 1, "hurst": 0.7, "sweep": [8, 10], "replications": 1200, "seed": 5}


# ---------------------------------------------------------------- distances


@pytest.mark.parametrize("M", [10, 1000, 20_000])
@pytest.mark.parametrize("sigma", [0.5, 1.0, math.sqrt(2)])
def test_w1_of_midrank_quantiles(M, sigma):
    x = sigma * stats.norm.ppf((np.arange(M) + 0.5) / M)
    assert wasserstein1_to_gaussian(x, sigma) < 2 * sigma / M


def test_w1_of_point_mass():
    assert wasserstein1_to_gaussian(np.zeros(100), 1.0) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-4)


@given(st.floats(-3, 3), st.integers(0, 2**31))
def test_w1_translation(c, seed):
    x = np.random.default_rng(seed).standard_normal(500)
    assert abs(wasserstein1_to_gaussian(x + c, 1.0) - wasserstein1_to_gaussian(x, 1.0)) <= abs(c) + 1e-12


def test_w1_input_checks():
    with pytest.raises(ValueError):
        wasserstein1_to_gaussian([1.0], 1.0)
    with pytest.raises(ValueError):
        wasserstein1_to_gaussian([1.0, 2.0], 0.0)


def test_ks_range(rng):
    assert 0.0 <= ks_to_gaussian(rng.standard_normal(100), 1.0) <= 1.0
    assert ks_to_gaussian(np.full(10, 100.0), 1.0) == pytest.approx(1.0)


def test_pipeline_on_exact_gaussian_draws():
    rng = np.random.default_rng(99)
    M, sigma = 10_000, math.sqrt(2)
    floor = w1_floor(M, sigma, seed=1)
    crit = 1.358 / math.sqrt(M)
    w1s, below = [], 0
    for _ in range(100):
        x = sigma * rng.standard_normal(M)
        w1s.append(wasserstein1_to_gaussian(x, sigma))
        below += ks_to_gaussian(x, sigma) < crit
    assert below >= 90
    assert np.mean(w1s) == pytest.approx(floor, rel=0.25)
    assert np.mean(w1s) < 3 * sigma / math.sqrt(M)


def test_loglog_slope():
    x = np.array([32, 128, 512])
    assert loglog_slope(x, 3 * x**-0.5) == pytest.approx(-0.5)


# ---------------------------------------------------------------- seeding and blocks


def test_replication_streams_are_block_invariant():
    whole = replication_normals(7, 0, 0, 10, 4)
    parts = np.vstack([replication_normals(7, 0, 0, 3, 4), replication_normals(7, 0, 3, 10, 4)])
    assert whole.tobytes() == parts.tobytes()
    assert not np.array_equal(replication_normals(7, 1, 0, 10, 4), whole)


def _square_task(start, stop):
    return {"x": replication_normals(3, 0, start, stop, 2)}


def test_run_blocks_order(monkeypatch):
    monkeypatch.delenv("HQV_WORKERS", raising=False)
    a = run_blocks(_square_task, 1234, workers=1, block=100)["x"]
    b = run_blocks(_square_task, 1234, workers=2, block=100)["x"]
    assert a.shape == (1234, 2)
    assert a.tobytes() == b.tobytes()


def test_workers_env(monkeypatch):
    monkeypatch.setenv("HQV_WORKERS", "3")
    assert resolve_workers(1) == 3
    monkeypatch.setenv("HQV_WORKERS", "many")
    with pytest.raises(ConfigError):
        resolve_workers()


def test_report_independent_of_workers(monkeypatch, tmp_path):
    monkeypatch.delenv("HQV_WORKERS", raising=False)
    outs = []
    for w in (1, 2):
        rep = run_experiment(config_from_dict({**BASE, "workers": w}))
        rep.config.workers = None
        persist_report(rep, tmp_path / f"r{w}.json")
        outs.append((tmp_path / f"r{w}.json").read_bytes())
    assert outs[0] == outs[1]


# ---------------------------------------------------------------- configuration


def test_missing_field_is_named():
    with pytest.raises(ConfigError, match="missing required field 'sweep'"):
        config_from_dict({"kind": "clt", "replications": 100})


def test_unknown_kind_lists_options():
    with pytest.raises(ConfigError, match="expected one of") as info:
        config_from_dict({**BASE, "kind": "bootstrap"})
    assert "clt" in str(info.value) and "hou" in str(info.value)


@pytest.mark.parametrize(
    "patch,needle",
    [
        ({"sweep": [10, 8]}, "strictly increasing"),
        ({"kind": "clt", "replications": 50}, ">= 100"),
        ({"mode": "exact", "q": 2}, "q = 1"),
        ({"schema_version": 2}, "schema_version"),
        ({"colour": "red"}, "unknown field 'colour'"),
        ({"hurst": 1.2}, "Hurst index"),
    ],
)
def test_config_validation(patch, needle):
    with pytest.raises(ConfigError, match=needle):
        config_from_dict({**BASE, **patch})


def test_toml_and_json_configs(tmp_path):
    (tmp_path / "c.toml").write_text(
        'kind = "clt"\nq = 1\nsweep = [32, 128]\nsweep_by = "cardinality"\nmode = "iid-dominant"\nreplications = 200\n'
    )
    cfg = load_config(tmp_path / "c.toml")
    assert cfg.sweep == [32, 128] and cfg.schema_version == 1
    (tmp_path / "c.json").write_text(json.dumps(BASE))
    assert load_config(tmp_path / "c.json").kind == "estimator"


def test_malformed_json_has_line(tmp_path):
    (tmp_path / "bad.json").write_text('{\n  "kind": "clt",\n  "sweep": [1, 2\n}\n')
    with pytest.raises(ConfigError, match="line 4"):
        load_config(tmp_path / "bad.json")


def test_malformed_toml_has_line(tmp_path):
    (tmp_path / "bad.toml").write_text('kind = "clt"\nsweep = [1, 2\n')
    with pytest.raises(ConfigError, match="line"):
        load_config(tmp_path / "bad.toml")


# ---------------------------------------------------------------- reports


def test_distance_report_round_trip(tmp_path, rng):
    rep = distance_report(rng.standard_normal(500) * 1.4, 2.0, label="x", cardinality=32)
    persist_report(rep, tmp_path / "d.json")
    back = load_report(tmp_path / "d.json", DistanceReport)
    assert back == rep
    assert back.w1 >= 0 and 0 <= back.ks <= 1


def test_single_point_smoke(tmp_path):
    cfg = config_from_dict(
        {"kind": "clt", "q": 1, "sweep": [32], "sweep_by": "cardinality", "mode": "iid-dominant", "replications": 100}
    )
    rep = run_experiment(cfg)
    assert len(rep.distances) == 1
    d = rep.distances[0].model_dump()
    assert all(math.isfinite(v) for v in d.values() if isinstance(v, float))
    assert any("not reachable" in n for n in rep.notes)
    files = persist_report(rep, tmp_path / "clt.json")
    assert (tmp_path / "clt.csv").exists() and any(f.suffix == ".dat" for f in files)
    assert load_report(tmp_path / "clt.json") == rep


def test_chaos_report_has_parts():
    cfg = config_from_dict(
        {"kind": "clt", "q": 2, "sweep": [8], "mode": "chaos", "replications": 2000, "seed": 1}
    )
    d = run_experiment(cfg).distances[0].extras
    assert d["mean_abs_v2"] < d["sd_v1"]
    assert d["mean_abs_v3"] < d["sd_v1"]


def test_estimator_rows():
    rows = run_experiment(config_from_dict(BASE)).rows
    assert [r["N"] for r in rows] == [8, 10]
    assert all(abs(r["plugin_bias"]) <= 4 * np.finfo(float).eps for r in rows)
    assert all(r["sigma2"] == 2.0 for r in rows)


def test_remainders_need_chaos():
    with pytest.raises(ConfigError):
        run_experiment(config_from_dict({**BASE, "kind": "remainders"}))


def test_experiment_report_schema(tmp_path):
    rep = ExperimentReport(kind="estimator", config=config_from_dict(BASE), rows=[{"N": 8, "bias": 0.1}])
    persist_report(rep, tmp_path / "e.json")
    assert (tmp_path / "e_bias.dat").read_text() == "8 0.1\n"
    (tmp_path / "e.json").write_text('{"kind": 3}')
    with pytest.raises(ConfigError):
        load_report(tmp_path / "e.json")
