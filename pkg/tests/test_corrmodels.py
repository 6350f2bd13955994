import numpy as np
import pytest

from edfsim.corrmodels import (
    DENSE_CAP,
    FAMILIES,
    LowRankRep,
    ToeplitzRep,
    build_alternate,
    build_dense,
    build_equi,
    build_factor,
    build_from_spec,
    build_long_range,
    build_sample_corr,
    build_sign_factor,
    build_weak_range,
    max_abs_offdiag,
    model_spec,
    resolve_rule,
    spec_from_json_dict,
    spec_to_json_dict,
    three_factor_loadings,
    to_dense,
)
from edfsim.errors import (
    ConfigError,
    DenseCapError,
    NotPositiveSemidefiniteError,
    ParameterError,
)


def test_equi_dense_matches_formula():
    m, rho = 7, 0.3
    c = build_equi(m, rho)
    want = (1.0 - rho) * np.eye(m) + rho * np.ones((m, m))
    assert np.allclose(to_dense(c), want, atol=1e-15)
    assert isinstance(c.rep, LowRankRep)  # rho >= 0 stays rank-one


def test_equi_negative_rho_boundary():
    m = 10
    c = build_equi(m, -1.0 / (m - 1))  # PSD boundary: smallest eigenvalue 0
    g = to_dense(c)
    assert np.allclose(np.diag(g), 1.0)
    assert np.linalg.eigvalsh(g)[0] > -1e-10
    # below the boundary the range precondition fires before any PSD check
    with pytest.raises(ParameterError):
        build_equi(m, -1.0 / (m - 1) - 1e-3)
    with pytest.raises(ParameterError):
        build_equi(m, 1.2)


def test_alternate_pattern():
    c = build_alternate(6, 0.4)
    g = to_dense(c)
    xi = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
    want = 0.4 * np.outer(xi, xi)
    np.fill_diagonal(want, 1.0)
    assert np.allclose(g, want, atol=1e-15)


def test_alternate_offdiag_sum_telescopes():
    # even m: sum_{i != j} xi_i xi_j = -m, so m * gamma_m = -rho: the
    # rho-sized entries nearly cancel in aggregate
    for m in (6, 40):
        g = to_dense(build_alternate(m, 0.3))
        off = g.sum() - m
        assert off == pytest.approx(-0.3 * m, abs=1e-12)
    # odd m: (sum xi)^2 - m = 1 - m
    g = to_dense(build_alternate(7, 0.3))
    assert g.sum() - 7 == pytest.approx(0.3 * (1 - 7), abs=1e-12)


def test_sign_factor_validation():
    with pytest.raises(ParameterError):
        build_sign_factor(4, 0.2, [1, 1, 2, 1])
    with pytest.raises(ParameterError):
        build_sign_factor(4, 0.2, [1, 1, 1])  # wrong length


def test_long_range_is_not_psd_for_m_at_least_3():
    # unit-lag entry is 1^-d = 1 while longer lags are below 1: indefinite
    with pytest.raises(NotPositiveSemidefiniteError):
        build_long_range(50, 0.4)
    c = build_long_range(50, 0.4, check_psd=False)
    assert isinstance(c.rep, ToeplitzRep)
    g = to_dense(c)
    assert g[0, 1] == 1.0
    assert g[0, 10] == pytest.approx(10.0**-0.4, abs=1e-15)


def test_weak_range_is_psd_and_matches_formula():
    c = build_weak_range(100, 1.0, 0.5)
    g = to_dense(c)
    assert np.linalg.eigvalsh(g)[0] > -1e-8
    assert g[3, 10] == pytest.approx(0.5 / 7.0, abs=1e-15)
    with pytest.raises(ParameterError):
        build_weak_range(10, -0.2, 0.5)


def test_three_factor_loadings_orthonormal():
    p = three_factor_loadings(16)
    assert p.shape == (16, 3)
    assert np.allclose(p.T @ p, np.eye(3), atol=1e-14)
    with pytest.raises(ParameterError):
        three_factor_loadings(18)  # needs m divisible by 4


def test_factor_balanced_weights_unit_diagonal():
    m = 16
    p = three_factor_loadings(m)
    h = np.array([0.4, 0.3, 0.3]) * m  # fractions sum to 1 -> exact unit diagonal
    c = build_factor(m, 0.2, h, p)
    g = to_dense(c)
    assert np.allclose(np.diag(g), 1.0, atol=1e-12)
    assert np.linalg.eigvalsh(g)[0] > -1e-10


def test_factor_unbalanced_weights_need_repair():
    m = 16
    p = three_factor_loadings(m)
    h = np.array([0.4, 0.3, 0.6]) * m  # fractions sum to 1.3
    with pytest.raises(ParameterError):
        build_factor(m, 0.2, h, p)
    c = build_factor(m, 0.2, h, p, repair="normalize-diagonal")
    g = to_dense(c)
    assert np.allclose(np.diag(g), 1.0, atol=1e-12)
    assert np.linalg.eigvalsh(g)[0] > -1e-10


def test_sample_corr_structure():
    rng = np.random.default_rng(11)
    c = build_sample_corr(20, 500, rng)
    g = to_dense(c)
    assert np.allclose(np.diag(g), 1.0, atol=0.0)
    assert np.allclose(g, g.T, atol=0.0)
    assert np.linalg.eigvalsh(g)[0] > -1e-10
    # entries shrink like 1/sqrt(n)
    assert max_abs_offdiag(c) < 0.5
    with pytest.raises(ParameterError):
        build_sample_corr(20, 1, rng)


def test_dense_validation():
    good = np.array([[1.0, 0.2], [0.2, 1.0]])
    c = build_dense(good)
    assert np.allclose(to_dense(c), good)
    with pytest.raises(ParameterError):
        build_dense(np.array([[1.0, 0.2], [0.3, 1.0]]))  # asymmetric
    with pytest.raises(ParameterError):
        build_dense(np.array([[0.9, 0.2], [0.2, 1.0]]))  # bad diagonal
    with pytest.raises(NotPositiveSemidefiniteError) as err:
        build_dense(np.array([[1.0, 0.8, -0.8], [0.8, 1.0, 0.8], [-0.8, 0.8, 1.0]]))
    assert err.value.min_eigenvalue < 0.0


def test_to_dense_cap():
    c = build_equi(100, 0.1)
    with pytest.raises(DenseCapError):
        to_dense(c, cap=50)
    assert DENSE_CAP >= 10000


def test_max_abs_offdiag():
    assert max_abs_offdiag(build_equi(10, 0.25)) == pytest.approx(0.25, abs=1e-15)
    assert max_abs_offdiag(build_weak_range(50, 1.0, 0.4)) == pytest.approx(0.4, abs=1e-15)
    assert max_abs_offdiag(build_equi(10, 0.0)) == 0.0


def test_model_spec_round_trip():
    spec = model_spec("equi", 100, rho={"coef": 2.0, "exponent": -1.0})
    again = spec_from_json_dict(spec_to_json_dict(spec))
    assert again == spec
    assert resolve_rule(spec.params["rho"], 100) == pytest.approx(0.02)
    assert resolve_rule(0.3, 12345) == 0.3
    sized = spec.with_m(1000)
    assert sized.m == 1000 and sized.family == "equi"


def test_model_spec_errors_name_the_field():
    with pytest.raises(ConfigError, match="family"):
        spec_from_json_dict({"m": 10, "rho": 0.1})
    with pytest.raises(ConfigError, match="'m'"):
        spec_from_json_dict({"family": "equi", "m": 1, "rho": 0.1})
    with pytest.raises(ConfigError, match="rho"):
        spec_from_json_dict({"family": "equi", "m": 10})
    with pytest.raises(ConfigError, match="unknown model family"):
        spec_from_json_dict({"family": "mystery", "m": 10})
    with pytest.raises(ConfigError, match="unexpected"):
        spec_from_json_dict({"family": "equi", "m": 10, "rho": 0.1, "shape": 2})


def test_build_from_spec_all_families():
    specs = [
        model_spec("equi", 12, rho=0.2),
        model_spec("alternate", 12, rho=0.2),
        model_spec("sign_factor", 12, rho=0.2, signs=[1, -1, -1, 1] * 3),
        model_spec("long_range", 12, d=0.5),
        model_spec("weak_range", 12, d=1.0, rho=0.5),
        model_spec(
            "factor",
            12,
            rho=0.3,
            weight_fractions=[0.4, 0.3, 0.3],
            loadings="three-pattern",
        ),
        model_spec("sample_corr", 12, n=200, seed=5),
    ]
    assert {s.family for s in specs} == set(FAMILIES)
    for spec in specs:
        check = spec.family != "long_range"
        c = build_from_spec(spec, check_psd=check)
        assert c.m == 12


def test_build_from_spec_rules_scale_with_m():
    spec = model_spec("equi", 100, rho={"coef": 2.0, "exponent": -1.0})
    c = build_from_spec(spec)
    g = to_dense(c)
    assert g[0, 1] == pytest.approx(0.02, abs=1e-15)
    c2 = build_from_spec(spec.with_m(400))
    assert to_dense(c2)[0, 1] == pytest.approx(0.005, abs=1e-15)


def test_sample_corr_spec_is_seed_reproducible():
    spec = model_spec("sample_corr", 15, n=300, seed=9)
    a = to_dense(build_from_spec(spec))
    b = to_dense(build_from_spec(spec))
    assert np.array_equal(a, b)
    other = to_dense(build_from_spec(model_spec("sample_corr", 15, n=300, seed=10)))
    assert not np.array_equal(a, other)
