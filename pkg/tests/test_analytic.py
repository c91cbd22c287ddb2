import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqcert.analytic import (
    chain_feasible,
    critical_rates,
    delta_curve,
    delta_threshold,
    deterministic_povms,
    deterministic_strategy_rate,
    min_entropy_bits,
)
from seqcert.quantum import ScenarioParams, build_preparations


def test_deterministic_rate_examples():
    assert deterministic_strategy_rate(ScenarioParams(0.5, 1.0), 1.0) == pytest.approx(0.625, abs=1e-12)
    assert deterministic_strategy_rate(ScenarioParams(0.3, 0.7), 2.0) == pytest.approx(1.0, abs=1e-12)
    assert deterministic_strategy_rate(ScenarioParams(0.5, 0.8), 1.5) == pytest.approx(0.79, abs=1e-12)
    for bad in (0.9, 2.1):
        with pytest.raises(ValueError):
            deterministic_strategy_rate(ScenarioParams(0.5, 1.0), bad)


@given(st.floats(0, 1), st.floats(0.01, 1), st.floats(1, 2), st.sampled_from([0, 1]))
def test_deterministic_povms_are_valid_and_silent(delta, r, c, lam):
    p = ScenarioParams(delta, r)
    M = deterministic_povms(p, c, lam)
    assert np.allclose(M.sum(0), np.eye(2), atol=1e-12)
    assert all(np.linalg.eigvalsh(e).min() >= -1e-12 for e in M)
    # the strategy never outputs lam, and both strategies give the same rate
    assert np.abs(M[lam]).max() == 0
    assert deterministic_strategy_rate(p, c, 0) == pytest.approx(deterministic_strategy_rate(p, c, 1), abs=1e-12)
    x2 = p.x**2
    assert deterministic_strategy_rate(p, c) == pytest.approx(x2 + (1 - x2) * c / 2, abs=1e-12)


def test_deterministic_range_endpoints():
    p = ScenarioParams(0.4, 0.9)
    assert deterministic_strategy_rate(p, 1.0) == pytest.approx(critical_rates(p).q_crit_bob)
    assert deterministic_strategy_rate(p, 2.0) == pytest.approx(1.0)


def test_critical_rates_examples():
    cr = critical_rates(ScenarioParams(0.5, 1.0))
    assert (cr.q_crit_bob, cr.q_crit_charlie) == pytest.approx((0.625, 0.8))
    assert cr.window is None
    cr = critical_rates(ScenarioParams(0.25, 1.0))
    assert (cr.q_crit_bob, cr.q_crit_charlie) == pytest.approx((0.53125, 0.470588), abs=1e-6)
    assert cr.window == pytest.approx((0.470588, 0.53125), abs=1e-6)
    cr = critical_rates(ScenarioParams(0.0, 0.6))
    assert (cr.q_crit_bob, cr.q_crit_charlie) == (0.5, 0.0)


def test_chain_examples():
    assert chain_feasible(2, 0.25).feasible
    assert not chain_feasible(2, 0.5).feasible
    assert chain_feasible(2, 0.2955).feasible and not chain_feasible(2, 0.2957).feasible
    for bad in ((1, 0.2), (13, 0.2), (2, 1.5)):
        with pytest.raises(ValueError):
            chain_feasible(*bad)
    with pytest.raises(ValueError):
        chain_feasible(2, 0.2, mode="other")


def test_literal_mode_exposed():
    res = chain_feasible(2, 0.5, mode="literal")
    assert res.feasible
    q1, q2 = res.rates
    assert q1 * q2 == pytest.approx(0.5, abs=1e-10)


@given(st.integers(2, 12), st.floats(0, 1))
def test_witness_rates(n, x):
    res = chain_feasible(n, x)
    if res.feasible:
        assert len(res.rates) == n
        assert all(x - 1e-12 <= q <= 1 + 1e-12 for q in res.rates)
        assert res.rates[-1] == pytest.approx(x / np.prod(res.rates[:-1]), abs=1e-10)


def test_two_party_chain_matches_window():
    for x in np.round(np.arange(0, 1.0005, 1e-3), 6):
        cr = critical_rates(ScenarioParams(float(x), 1.0))
        assert chain_feasible(2, float(x)).feasible == (cr.window is not None), x


def test_delta_threshold_values():
    assert delta_threshold(2) == pytest.approx(0.29560, abs=1e-4)
    assert delta_threshold(3) == pytest.approx(0.13161, abs=1e-4)
    assert delta_threshold(4) == pytest.approx(0.06352, abs=1e-4)
    # n = 2 root of x^3 + x^2 + 3x - 1
    x = delta_threshold(2)
    assert x**3 + x**2 + 3 * x - 1 == pytest.approx(0, abs=1e-8)
    curve = delta_curve(12)
    values = [d for _, d in curve]
    assert [n for n, _ in curve] == list(range(2, 13))
    assert all(b < a for a, b in zip(values, values[1:]))


def test_min_entropy_bits():
    assert min_entropy_bits(0.5) == pytest.approx(1.0)
    assert min_entropy_bits(1.2) == 0.0
