import numpy as np
import pytest

from edfsim.edf import (
    DEFAULT_GRID_SIZE,
    ProcessGrid,
    detrended_indicator,
    edf,
    modified_path,
    rescaled_path,
)
from edfsim.errors import ParameterError
from edfsim.hermite import c1_values
from edfsim.normal import upper_quantile

H_AT_10_HALF = -3.489422804014327  # h_{0.5}(10) = 1 - 0.5 - c1(0.5)*10, frozen


def test_default_grid():
    grid = ProcessGrid.default()
    assert len(grid) == DEFAULT_GRID_SIZE == 513
    assert grid.points[0] == 0.0 and grid.points[-1] == 1.0
    small = ProcessGrid.default(5)
    assert np.allclose(small.points, [0.0, 0.25, 0.5, 0.75, 1.0])


def test_grid_validation():
    with pytest.raises(ParameterError):
        ProcessGrid(np.array([0.0, 1.0]))  # too short
    with pytest.raises(ParameterError):
        ProcessGrid(np.array([0.0, 0.5, 0.9]))  # does not end at 1
    with pytest.raises(ParameterError):
        ProcessGrid(np.array([0.0, 0.6, 0.4, 1.0]))  # not increasing
    with pytest.raises(ParameterError):
        ProcessGrid(np.array([0.0, np.nan, 1.0]))


def test_edf_hand_example():
    # choose y so the p-values are exactly 0.2, 0.4, 0.6, 0.8
    p = np.array([0.2, 0.4, 0.6, 0.8])
    y = upper_quantile(p)
    grid = ProcessGrid(np.array([0.0, 0.1, 0.2, 0.4, 0.5, 0.79, 0.8, 1.0]))
    got = edf(y, grid)
    # ties count: at t = 0.4 both 0.2 and 0.4 are <= t
    want = np.array([0.0, 0.0, 0.25, 0.5, 0.5, 0.75, 1.0, 1.0])
    assert np.allclose(got, want, atol=0.0)


def test_edf_batch_rows_match_single():
    rng = np.random.default_rng(12)
    y = rng.standard_normal((5, 40))
    grid = ProcessGrid.default(33)
    batch = edf(y, grid)
    assert batch.shape == (5, 33)
    for i in range(5):
        assert np.array_equal(batch[i], edf(y[i], grid))
    with pytest.raises(ParameterError):
        edf(y[None, ...], grid)


def test_edf_is_monotone_from_zero_to_one():
    rng = np.random.default_rng(4)
    grid = ProcessGrid.default(65)
    for _ in range(20):
        f = edf(rng.standard_normal(30), grid)
        assert f[0] == 0.0 or f[0] >= 0.0
        assert f[-1] == 1.0
        assert np.all(np.diff(f) >= 0.0)


def test_rescaled_path_pins_endpoints():
    rng = np.random.default_rng(8)
    y = rng.standard_normal(100)
    grid = ProcessGrid.default(17)
    path = rescaled_path(y, grid, 10.0)
    assert path[0] == 0.0 and path[-1] == 0.0
    inner = 10.0 * (edf(y, grid) - grid.points)
    assert np.array_equal(path[1:-1], inner[1:-1])


def test_modified_path_subtracts_c1_component():
    rng = np.random.default_rng(9)
    y = rng.standard_normal((3, 50))
    grid = ProcessGrid.default(9)
    scale = 5.0
    base = rescaled_path(y, grid, scale)
    mod = modified_path(y, grid, scale)
    c1 = np.asarray(c1_values(grid.points))
    for i in range(3):
        want = base[i] - c1 * scale * y[i].mean()
        assert np.allclose(mod[i], want, atol=1e-14)


def test_detrended_indicator_values():
    assert detrended_indicator(10.0, 0.5) == pytest.approx(H_AT_10_HALF, abs=1e-15)
    # upper_tail(-10) ~ 1 > 0.5, so the indicator is 1 at x = 10
    assert detrended_indicator(-10.0, 0.5) == pytest.approx(
        0.0 - 0.5 + float(c1_values(0.5)) * 10.0, abs=1e-15
    )
    # at t = 0 the indicator and c1 both vanish
    assert detrended_indicator(3.0, 0.0) == 0.0
    x = np.linspace(-3, 3, 7)
    out = detrended_indicator(x, 0.25)
    assert out.shape == x.shape
    with pytest.raises(ParameterError):
        detrended_indicator(0.0, 1.5)


def test_detrended_indicator_is_mean_of_modified_path():
    # mean over the sample of h_t(Y_i) equals (modified path)/scale at interior t
    rng = np.random.default_rng(21)
    y = rng.standard_normal(64)
    grid = ProcessGrid(np.array([0.0, 0.3, 0.7, 1.0]))
    scale = 8.0
    mod = modified_path(y, grid, scale)
    for j, t in enumerate((0.3, 0.7), start=1):
        want = scale * float(np.mean(detrended_indicator(y, t)))
        assert mod[j] == pytest.approx(want, abs=1e-12)
