import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dool.errors import ConfigurationError
from dool.inverse import RHO, golden_budget, golden_section_search


def test_budget_for_standard_interval():
    assert golden_budget(0.0, 0.1, 1e-4) == 17
    calls = []
    res = golden_section_search(lambda x: calls.append(x) or (x - 0.037) ** 2, 0.0, 0.1, 1e-4)
    assert res.n_evals == len(calls) == 17
    assert abs(res.x - 0.037) <= 1e-4


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 10), st.floats(0.0, 1.0), st.floats(1e-6, 1e-1))
def test_brackets_shrink_and_hold_minimum(a, width, frac, tol):
    b = a + width
    x0 = a + frac * width
    res = golden_section_search(lambda x: abs(x - x0) ** 1.5, a, b, tol)
    lo, hi = res.brackets[-1]
    assert hi - lo <= tol * (1 + 1e-9)
    assert lo - 1e-12 <= x0 <= hi + 1e-12 or min(abs(x0 - lo), abs(x0 - hi)) < 1e-9
    widths = np.diff(np.array(res.brackets), axis=1).ravel()
    assert np.allclose(widths[1:] / widths[:-1], RHO)
    assert res.n_evals == golden_budget(a, b, tol)


def test_budget_formula():
    for tol in (1e-2, 1e-3, 1e-5):
        n = math.ceil(math.log(1.0 / tol) / math.log(1 / RHO))
        assert golden_budget(0, 1, tol) == n + 2


def test_reversed_interval_rejected():
    with pytest.raises(ConfigurationError):
        golden_section_search(lambda x: x, 1.0, 0.0)
