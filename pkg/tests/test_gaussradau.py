import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqcert.gaussradau import radau_quadrature


def test_two_nodes_closed_form():
    q = radau_quadrature(2)
    assert np.allclose(q.nodes, [1 / 3, 1], atol=1e-12, rtol=0)
    assert np.allclose(q.weights, [3 / 4, 1 / 4], atol=1e-12, rtol=0)
    # only the interior node contributes: (3/4) / ((1/3) ln 2)
    assert q.c_m == pytest.approx(2.25 / math.log(2), abs=1e-12)


@pytest.mark.parametrize("m", range(2, 17))
def test_structure(m):
    q = radau_quadrature(m)
    assert q.nodes[-1] == 1.0
    assert np.all(q.weights > 0)
    assert np.all((q.nodes > 0) & (q.nodes <= 1))
    assert np.all(np.diff(q.nodes) > 0)
    assert q.weights.sum() == pytest.approx(1.0, abs=1e-13)


@pytest.mark.parametrize("m", range(2, 17))
def test_monomial_exactness(m):
    q = radau_quadrature(m)
    for k in range(2 * m - 1):
        assert q.integrate(lambda t: t**k) == pytest.approx(1 / (k + 1), abs=1e-12)


def test_c_m_increasing():
    c = [radau_quadrature(m).c_m for m in range(2, 17)]
    assert all(b > a for a, b in zip(c, c[1:]))


def test_rejects_bad_m():
    for bad in (0, 1, 65, 2.5):
        with pytest.raises(ValueError):
            radau_quadrature(bad)


@given(st.integers(2, 16), st.lists(st.floats(-3, 3, allow_nan=False), min_size=31, max_size=31))
def test_random_polynomial_exactness(m, coeffs):
    c = np.array(coeffs[: 2 * m - 1])
    q = radau_quadrature(m)
    exact = float(sum(ck / (k + 1) for k, ck in enumerate(c)))
    assert q.integrate(lambda t: np.polyval(c[::-1], t)) == pytest.approx(exact, abs=1e-11 * (1 + np.abs(c).sum()))
