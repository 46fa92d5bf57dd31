import numpy as np
import pytest

from greencancel.rmt import ks_distance, make_rng
from greencancel.tw import TW1, ExtrapolationError, fredholm_f1, tw1_cdf


@pytest.fixture(scope="module")
def tw():
    return TW1()


def test_limits(tw):
    assert tw.cdf(8.0) > 1 - 1e-7
    assert tw.cdf(-10.0) < 1e-12


def test_known_value_range(tw):
    # F1 has mean about -1.21 and median about -1.27
    assert 0.45 < tw.cdf(-1.27) < 0.55


def test_self_convergence_on_window():
    grid = np.linspace(-5, 3, 33)
    a = np.array([fredholm_f1(r, 48) for r in grid])
    b = np.array([fredholm_f1(r, 96) for r in grid])
    assert np.max(np.abs(a - b)) < 1e-8


def test_monotone_on_grid(tw):
    grid = np.arange(-8, 6, 0.05)
    v = tw.cdf(grid)
    assert np.all(np.diff(v) >= -1e-12)


def test_right_tail_log_concave():
    hi = TW1(nodes=128)
    grid = np.linspace(1, 4, 31)
    tail = 1 - hi.cdf(grid)
    assert np.all(np.diff(tail) < 0)
    assert np.all(np.diff(np.log(tail), 2) < 0)


def test_extrapolation_refused(tw):
    with pytest.raises(ExtrapolationError):
        tw.cdf(-11)
    with pytest.raises(ExtrapolationError):
        tw1_cdf(9)
    assert tw.cdf(-11, clip=True) == tw.cdf(-10)


def test_ks_harness_consistent(tw):
    rng = make_rng(11, 0)
    ks = []
    for M in (400, 6400):
        ks.append(ks_distance(tw.sample(M, rng), tw, -4.0)[0])
    assert ks[1] < ks[0]
    assert ks[1] < 3 / np.sqrt(6400)


def test_spline_matches_direct_evaluation(tw):
    grid = np.linspace(-6, 4, 23) + 0.0037
    assert np.max(np.abs(tw.fast_cdf(grid) - tw.cdf(grid))) < 1e-9
