import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from bpve.ks import exp_cdf, ks_exponential, ks_exponential_sample


def test_matches_scipy_on_continuous_samples():
    rng = np.random.default_rng(0)
    for scale in (1.0, 1.3, 0.7):
        x = rng.exponential(scale, 5000)
        assert ks_exponential_sample(x) == pytest.approx(stats.kstest(x, "expon").statistic, abs=1e-12)


@given(st.lists(st.floats(0, 20, allow_nan=False), min_size=1, max_size=300))
def test_matches_scipy_with_ties(values):
    # scipy treats the sample as continuous; with ties the step CDF is the same
    x = np.array(values)
    assert ks_exponential_sample(x) == pytest.approx(stats.kstest(x, "expon").statistic, abs=1e-12)


def test_discretised_exponential_is_close():
    a = 500.0
    j = np.arange(1, 40001)
    masses = exp_cdf(j / a) - exp_cdf((j - 1) / a)
    d = ks_exponential(j / a, masses)
    assert d <= 1 / a + 1e-12


def test_tail_deficit_counts():
    # the jump at 1 leaves G(1) - F(1-) = 1 - e^-1 as the largest gap
    assert ks_exponential([1.0], [0.5]) == pytest.approx(exp_cdf(1.0))
    assert ks_exponential([0.01], [0.5]) == pytest.approx(0.5)
    assert ks_exponential([0.01], [0.5], include_tail=False) == pytest.approx(0.5 - exp_cdf(0.01))


def test_validation():
    with pytest.raises(ValueError):
        ks_exponential([2.0, 1.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        ks_exponential_sample([])
