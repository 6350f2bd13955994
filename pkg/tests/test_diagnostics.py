import math

import numpy as np
import pytest

from edfsim.corrmodels import (
    build_alternate,
    build_equi,
    build_long_range,
    build_sample_corr,
    build_weak_range,
    model_spec,
    to_dense,
)
from edfsim.diagnostics import (
    assess,
    gamma_m,
    moment_sequence,
    moment_sum,
    rate,
    report,
)
from edfsim.errors import ParameterError


def _brute_offdiag_power(c, p):
    g = to_dense(c)
    off = g - np.diag(np.diag(g))
    return float(np.sum(off**p)) / c.m**2


def test_gamma_equi_closed_form():
    for m, rho in ((10, 0.3), (200, 0.05), (15, -1.0 / 14.0)):
        assert gamma_m(build_equi(m, rho)) == pytest.approx(
            rho * (m - 1) / m, abs=1e-14
        )
    assert gamma_m(build_equi(50, 0.0)) == 0.0


def test_gamma_alternate_sign():
    # even m: m * gamma_m = -rho exactly
    for m in (6, 100):
        assert m * gamma_m(build_alternate(m, 0.2)) == pytest.approx(-0.2, abs=1e-13)
    # odd m: (1 - m) rho / m^2
    assert gamma_m(build_alternate(7, 0.2)) == pytest.approx(0.2 * (1 - 7) / 49, abs=1e-15)


def test_gamma_matches_brute_force_all_reps():
    rng = np.random.default_rng(3)
    cases = [
        build_equi(40, 0.17),
        build_alternate(33, 0.4),
        build_weak_range(60, 0.7, 0.45),
        build_long_range(25, 0.5, check_psd=False),
        build_sample_corr(30, 400, rng),
    ]
    for c in cases:
        assert gamma_m(c) == pytest.approx(_brute_offdiag_power(c, 1), abs=1e-13)


def test_rate_formula():
    c = build_equi(100, 0.04)
    g = gamma_m(c)
    assert rate(c) == pytest.approx((1 / 100 + abs(g)) ** -0.5, abs=1e-13)
    # identity: rate is sqrt(m)
    assert rate(build_equi(400, 0.0)) == pytest.approx(20.0, abs=1e-12)


def test_moment_sum_matches_brute_force():
    rng = np.random.default_rng(5)
    cases = [
        build_equi(40, 0.17),
        build_equi(40, -1.0 / 39.0),
        build_alternate(33, 0.4),
        build_weak_range(60, 0.7, 0.45),
        build_long_range(25, 0.5, check_psd=False),
        build_sample_corr(30, 400, rng),
    ]
    for c in cases:
        for p in (2, 4):
            assert moment_sum(c, p) == pytest.approx(
                _brute_offdiag_power(c, p), rel=1e-10, abs=1e-15
            )
    with pytest.raises(ParameterError):
        moment_sum(cases[0], 0)


def test_moment_sum_factor_model_fast_path():
    # exercises the k > 1 low-rank Gram / Khatri-Rao branches
    from edfsim.corrmodels import build_factor, three_factor_loadings

    m = 16
    p = three_factor_loadings(m)
    c = build_factor(m, 0.3, np.array([0.4, 0.3, 0.3]) * m, p)
    for q in (2, 4):
        assert moment_sum(c, q) == pytest.approx(_brute_offdiag_power(c, q), rel=1e-10)


def test_moment_sequence_equi():
    m, rho = 50, 0.3
    seq = moment_sequence(build_equi(m, rho))
    for l, got in enumerate(seq, start=1):
        want = rho**l * (m - 1) / m + 1.0 / m
        assert got == pytest.approx(want, abs=1e-14)
    # the tail is settled at the diagonal level 1/m
    assert abs(seq[-1] - 1.0 / m) < 1e-12
    assert abs(seq[-2] - 1.0 / m) < 1e-12


def test_moment_sequence_constant_matrix():
    seq = moment_sequence(build_equi(20, 1.0))
    assert np.allclose(seq, 1.0, atol=1e-14)


def test_report_fields():
    c = build_equi(100, 0.05)
    rep = report(c, epsilon0=0.1)
    g = 0.05 * 99 / 100
    assert rep.m == 100
    assert rep.gamma_m == pytest.approx(g, abs=1e-14)
    assert rep.m_gamma == pytest.approx(100 * g, abs=1e-12)
    r = (1 / 100 + g) ** -0.5
    assert rep.cond_vanish2 == pytest.approx(r**2 * moment_sum(c, 2), rel=1e-12)
    assert rep.cond_h1 == pytest.approx(r**4.1 * moment_sum(c, 4), rel=1e-12)
    assert rep.cond_h3 == pytest.approx(r**2.1 * moment_sum(c, 2), rel=1e-12)
    assert rep.cond_h4 == pytest.approx(100 * g**1.1, rel=1e-12)


def test_report_h4_undefined_for_nonpositive_gamma():
    assert report(build_equi(50, 0.0)).cond_h4 is None
    assert report(build_alternate(50, 0.2)).cond_h4 is None  # negative gamma


def test_assess_finite_regime():
    spec = model_spec("equi", 100, rho={"coef": 2.0, "exponent": -1.0})
    trend = assess(spec, [100, 1000, 10000])
    assert trend.regime == "finite-theta"
    assert trend.theta_estimate == pytest.approx(2.0, abs=0.05)


def test_assess_finite_negative_theta():
    # alternate with constant rho: m gamma_m = -rho for even m
    spec = model_spec("alternate", 100, rho=0.3)
    trend = assess(spec, [100, 1000, 10000])
    assert trend.regime == "finite-theta"
    assert trend.theta_estimate == pytest.approx(-0.3, abs=1e-10)


def test_assess_infinite_regime():
    spec = model_spec("equi", 100, rho={"coef": 1.0, "exponent": -2.0 / 3.0})
    trend = assess(spec, [100, 1000, 10000])
    assert trend.regime == "infinite-theta"
    assert trend.theta_estimate == math.inf
    assert trend.slopes["m_gamma"] == pytest.approx(1.0 / 3.0, abs=0.05)


def test_assess_long_range_is_infinite():
    # gamma_m decays like m^-d for d < 1, so m gamma_m still diverges
    spec = model_spec("long_range", 100, d=0.4)
    trend = assess(spec, [100, 400, 1600, 6400])
    assert trend.regime == "infinite-theta"


def test_assess_slowly_vanishing_theta_is_conservative():
    # m gamma_m -> 0 like m^-1/2: neither stabilized on this grid nor
    # growing, so the verdict is "undetermined" rather than a guess
    spec = model_spec("equi", 100, rho={"coef": 1.0, "exponent": -1.5})
    trend = assess(spec, [100, 400, 1600])
    assert trend.regime == "undetermined"
    assert trend.theta_estimate is None
    # a much faster decay settles at level ~0 and reads as finite
    fast = model_spec("equi", 100, rho={"coef": 1.0, "exponent": -2.0})
    trend2 = assess(fast, [100, 400, 1600])
    assert trend2.regime == "finite-theta"
    assert abs(trend2.theta_estimate) < 1e-2


def test_assess_grid_validation():
    spec = model_spec("equi", 100, rho=0.1)
    with pytest.raises(ParameterError):
        assess(spec, [100])
    with pytest.raises(ParameterError):
        assess(spec, [100, 100, 200])
    with pytest.raises(ParameterError):
        assess(spec, [200, 100])


def test_trend_report_as_dict_round_trips_to_json():
    import json

    spec = model_spec("equi", 50, rho=0.1)
    trend = assess(spec, [50, 100])
    text = json.dumps(trend.as_dict())
    data = json.loads(text)
    assert data["regime"] == trend.regime
    assert len(data["reports"]) == 2
