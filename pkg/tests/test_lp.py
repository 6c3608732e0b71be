import numpy as np
import pytest
from scipy.optimize import linprog as scipy_linprog

from spreadnet.errors import InfeasibleError
from spreadnet.lp import UnboundedError, linprog


def test_simple_minimum():
    # min x + 2y  s.t.  x + y >= 3, x <= 2
    res = linprog([1, 2], [[-1, -1]], [-3], [(0, 2), (0, np.inf)])
    np.testing.assert_allclose(res.x, [2, 1], atol=1e-12)
    assert res.fun == pytest.approx(4)


def test_no_constraints_sits_at_lower_bounds():
    res = linprog([1.0, 3.0], bounds=[(0.5, 4), (2, 5)])
    np.testing.assert_allclose(res.x, [0.5, 2])


def test_fixed_variable():
    res = linprog([1, 1], [[-1, -1]], [-7], [(5, 5), (0, 10)])
    np.testing.assert_allclose(res.x, [5, 2], atol=1e-12)


def test_infeasible_certificate():
    with pytest.raises(InfeasibleError) as info:
        linprog([1, 1], [[-1, 0], [0, -1]], [-1, -20], [(0, 10), (0, 10)])
    assert info.value.certificate == (1,)


def test_unbounded():
    with pytest.raises(UnboundedError):
        linprog([-1, 0], [[0, 1]], [1])


def test_matches_scipy_on_random_problems():
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(300):
        n, m = rng.integers(1, 5), rng.integers(1, 6)
        c = rng.uniform(0.1, 5, n)
        A = -rng.uniform(0, 3, (m, n))
        b = -rng.uniform(0, 10, m)
        lo = rng.uniform(0, 2, n)
        bounds = list(zip(lo, lo + rng.uniform(0, 6, n)))
        ref = scipy_linprog(c, A, b, bounds=bounds, method="highs")
        if ref.status == 2:
            with pytest.raises(InfeasibleError):
                linprog(c, A, b, bounds)
            continue
        res = linprog(c, A, b, bounds)
        assert res.fun == pytest.approx(ref.fun, rel=1e-7, abs=1e-9)
        assert np.all(A @ res.x <= b + 1e-7)
        checked += 1
    assert checked > 50
