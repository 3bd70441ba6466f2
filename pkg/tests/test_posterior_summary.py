import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.errors import EmptySamples, LengthMismatch
from artifact.posterior_summary import (
    HPDInterval,
    coverage_and_rmse,
    hpd,
    significance,
    summarize,
)


def hpd_oracle(samples, prob):
    """Exhaustive window scan."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    m = int(np.ceil(prob * n))
    best = None
    for i in range(n - m + 1):
        w = x[i + m - 1] - x[i]
        if best is None or w < best[0] - 1e-300:
            if best is None or w < best[0]:
                best = (w, x[i], x[i + m - 1])
    return best[1], best[2]


def test_constant_samples():
    iv = hpd([3.0] * 10, 0.95)
    assert iv.lower == iv.upper == 3.0


def test_uniform_grid_tie_break():
    iv = hpd(np.arange(100.0), 0.95)
    assert iv.lower == 0.0 and iv.upper == 94.0  # width 94, first window wins


def test_standard_normal_quantiles():
    rng = np.random.default_rng(42)
    x = rng.standard_normal(10**6)
    iv = hpd(x, 0.95)
    assert iv.lower == pytest.approx(-1.96, abs=0.02)
    assert iv.upper == pytest.approx(1.96, abs=0.02)


@given(
    st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=200),
    st.floats(0.05, 0.99),
)
@settings(max_examples=100, deadline=None)
def test_hpd_matches_exhaustive_scan(samples, prob):
    iv = hpd(samples, prob)
    lo, hi = hpd_oracle(samples, prob)
    assert iv.lower == lo and iv.upper == hi


def test_hpd_contains_median_unimodal():
    rng = np.random.default_rng(7)
    for draw in (rng.standard_normal(2000), rng.gamma(3.0, 2.0, 2000)):
        iv = hpd(draw, 0.95)
        med = np.median(draw)
        assert iv.lower <= med <= iv.upper


def test_hpd_width_monotone_in_prob():
    x = np.random.default_rng(1).standard_normal(5000)
    w90 = hpd(x, 0.90)
    w99 = hpd(x, 0.99)
    assert (w99.upper - w99.lower) >= (w90.upper - w90.lower)


def test_errors_and_flags():
    with pytest.raises(EmptySamples):
        hpd([], 0.95)
    with pytest.raises(ValueError):
        hpd([1.0, 2.0], 1.5)
    assert significance(HPDInterval(0.5, 2.0, 0.95)) == "positive"
    assert significance(HPDInterval(-2.0, -0.5, 0.95)) == "negative"
    assert significance(HPDInterval(-1.0, 1.0, 0.95)) == "none"
    med, iv, flag = summarize(np.linspace(1, 2, 101), alpha=0.05)
    assert med == pytest.approx(1.5)
    assert flag == "positive"


def test_coverage_and_rmse():
    truth = np.array([1.0, 2.0, 3.0])
    est = {"f": (truth.copy(), truth.copy(), truth.copy())}
    m = coverage_and_rmse(est, {"f": truth})
    assert m.rmse["f"] == 0.0 and m.coverage["f"] == 1.0

    est = {"f": (truth + 1, truth + 0.5, truth + 1.5)}
    m = coverage_and_rmse(est, {"f": truth})
    assert m.rmse["f"] == pytest.approx(1.0)
    assert m.coverage["f"] == 0.0

    with pytest.raises(LengthMismatch):
        coverage_and_rmse({"f": (truth, truth, truth)}, {"f": truth[:2]})
