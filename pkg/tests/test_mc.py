import json
import math

import numpy as np
import pytest

from edfsim.corrmodels import model_spec
from edfsim.errors import ConfigError, ParameterError
from edfsim.mc import (
    BLOCK_REPS,
    ExperimentConfig,
    config_from_dict,
    figure1_data,
    jackknife_cov_se,
    load,
    persist,
    run_edf_experiment,
    summary_from_dict,
)

EQUI_SPEC = model_spec("equi", 80, rho=0.05)


def _small_config(**overrides):
    base = dict(
        model=EQUI_SPEC,
        reps=256,
        master_seed=21,
        grid_size=17,
        scaling="sqrt_m",
        target="exact_cov",
        workers=1,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ParameterError):
        _small_config(reps=99)
    with pytest.raises(ParameterError):
        _small_config(scaling="log_m")
    with pytest.raises(ParameterError):
        _small_config(target="kernel")
    with pytest.raises(ParameterError):
        _small_config(target="limit_kernel")  # theta missing
    with pytest.raises(ParameterError):
        _small_config(target="limit_kernel", theta=-2.0)
    with pytest.raises(ParameterError):
        _small_config(compare_points=(0.5, 0.25))
    with pytest.raises(ParameterError):
        _small_config(compare_points=(0.0, 0.5))
    with pytest.raises(ParameterError):
        _small_config(workers=0)
    _small_config(target="limit_kernel", theta=math.inf)  # fine


def test_config_json_round_trip():
    cfg = _small_config()
    again = config_from_dict(cfg.as_dict())
    assert again == cfg
    with pytest.raises(ConfigError, match="model"):
        config_from_dict({"reps": 200, "master_seed": 0})
    with pytest.raises(ConfigError, match="unexpected"):
        config_from_dict({**cfg.as_dict(), "extra_field": 1})


def test_jackknife_cov_se_matches_direct_loop():
    rng = np.random.default_rng(17)
    x = rng.standard_normal(60)
    y = 0.3 * x + rng.standard_normal(60)
    cov, se = jackknife_cov_se(x, y)
    assert cov == pytest.approx(float(np.cov(x, y, ddof=1)[0, 1]), abs=1e-13)
    # direct delete-one recomputation
    n = len(x)
    loo = np.array(
        [float(np.cov(np.delete(x, i), np.delete(y, i), ddof=1)[0, 1]) for i in range(n)]
    )
    want_se = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    assert se == pytest.approx(want_se, rel=1e-10)
    with pytest.raises(ParameterError):
        jackknife_cov_se(x[:2], y[:2])


def test_run_experiment_basic_output():
    cfg = _small_config()
    s = run_edf_experiment(cfg)
    assert s.schema == "v1"
    assert s.m == 80 and s.reps == 256
    assert len(s.grid) == 17 and len(s.mean) == 17
    assert s.scale == pytest.approx(math.sqrt(80))
    # paths are centered: the mean path is small everywhere
    assert np.max(np.abs(s.mean)) < 4.0 * math.sqrt(max(s.variance) / 256) + 1e-9
    # 6 unordered pairs from 3 compare points, each with a target and z
    assert len(s.pairs) == 6
    assert all(p.target is not None and p.z is not None for p in s.pairs)
    assert s.max_abs_z == pytest.approx(max(abs(p.z) for p in s.pairs))


def test_scaling_variants():
    s_rate = run_edf_experiment(_small_config(scaling="rate", target="none"))
    s_sqrt = run_edf_experiment(_small_config(scaling="sqrt_m", target="none"))
    s_gam = run_edf_experiment(_small_config(scaling="inv_sqrt_gamma", target="none"))
    g = s_rate.gamma_m
    assert s_rate.scale == pytest.approx((1 / 80 + abs(g)) ** -0.5)
    assert s_gam.scale == pytest.approx(abs(g) ** -0.5)
    # identical replications, different scale: paths are proportional
    ratio = (s_rate.scale / s_sqrt.scale) ** 2
    assert np.allclose(
        np.asarray(s_rate.variance), ratio * np.asarray(s_sqrt.variance), rtol=1e-9
    )
    with pytest.raises(ParameterError):
        run_edf_experiment(
            _small_config(model=model_spec("equi", 80, rho=0.0), scaling="inv_sqrt_gamma")
        )


def test_worker_count_does_not_change_results():
    base = run_edf_experiment(_small_config(reps=300, workers=1))
    multi = run_edf_experiment(_small_config(reps=300, workers=4))
    # the summary omits the worker count entirely, so equality is exact
    assert json.dumps(base.as_dict()) == json.dumps(multi.as_dict())


def test_block_structure_is_invisible():
    # reps that do not divide evenly into blocks still give one value per rep
    cfg = _small_config(reps=BLOCK_REPS * 2 + 7, target="none")
    s = run_edf_experiment(cfg)
    assert s.reps == BLOCK_REPS * 2 + 7


def test_persist_load_round_trip(tmp_path):
    s = run_edf_experiment(_small_config())
    path = tmp_path / "summary.json"
    persist(s, path)
    s2 = load(path)
    assert s2 == s
    persist(s2, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()
    with pytest.raises(ConfigError):
        summary_from_dict({"schema": "v0"})


def test_exact_cov_target_tracks_empirical(tmp_path):
    # moderate scale so this stays quick; 4 sigma with slack for 2000 reps
    cfg = ExperimentConfig(
        model=model_spec("equi", 100, rho=0.04),
        reps=2000,
        master_seed=33,
        grid_size=17,
        scaling="sqrt_m",
        target="exact_cov",
        workers=2,
    )
    s = run_edf_experiment(cfg)
    assert s.max_abs_z < 5.0


def test_figure1_records():
    recs = figure1_data(m=600, m_gamma_targets=(0.0, 2.0), master_seed=1, grid_size=65)
    assert [r.label for r in recs] == ["0", "2"]
    for r in recs:
        assert r.rho == pytest.approx(r.m_gamma_target / 599)
        assert len(r.path) == 65
        assert r.path[0] == 0.0 and r.path[-1] == 0.0
    again = figure1_data(m=600, m_gamma_targets=(0.0, 2.0), master_seed=1, grid_size=65)
    assert again == recs
    # per-target streams: dropping the first target leaves later paths alone
    only_second = figure1_data(m=600, m_gamma_targets=(2.0,), master_seed=1, grid_size=65)
    assert only_second[0].path != recs[1].path  # stream index differs by design
