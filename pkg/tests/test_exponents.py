from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from imethod_lab.exponents import (
    ALL_MONOMIALS, INF, Exponent, budget_from, exponent_table, gwp_threshold, interpolation_solve,
    lambda_exponent, pair_between, pointwise_gap_exponent, section6_consistency, theorem51_budget,
    theta_of_q,
)


def labels(ms):
    return sorted(m.label() for m in ms)


def test_budget_at_default_theta0():
    b = theorem51_budget(F(-7, 8))
    assert b.exponents["1"].value == F(-9, 8)
    assert b.exponents["M2"].value == F(-17, 8)
    assert b.exponents["M1"].value == F(-25, 8)
    assert labels(b.binding["1"]) == ["theta0^-1*N^-2"]
    assert labels(b.binding["M2"]) == ["theta0^-1*M2*N^-3"]
    assert labels(b.binding["M1"]) == ["theta0*M1*N^-9/4", "theta0^-1*M1*N^-4"]
    # the M-tags sit exactly one and two powers of N below tag 1
    assert b.exponents["M2"].value == b.exponents["1"].value - 1
    assert b.exponents["M1"].value == b.exponents["1"].value - 2


def test_budget_at_theta0_one():
    b = theorem51_budget(0)
    assert b.exponents["1"].value == F(-1, 2)
    assert labels(b.binding["1"]) == ["theta0*N^-1/2"]


def test_budget_rejects_positive_exponent():
    with pytest.raises(ValueError):
        theorem51_budget(F(1, 10))


def test_default_exponent_minimizes_combined_bound():
    best = theorem51_budget(F(-7, 8)).combined()
    assert best == F(-9, 8)
    for delta in (F(1, 100), F(-1, 100)):
        assert theorem51_budget(F(-7, 8) + delta).combined() > best


def test_pointwise_gap():
    assert pointwise_gap_exponent(F(-7, 8)) == F(-1, 8)


def test_interpolation():
    th, r, e = interpolation_solve("theta_of_q", q=4)
    assert (th, r, e) == (0, 3, F(-3, 4))
    th, r, e = interpolation_solve("theta_of_q", q=INF)
    assert (th, r, e) == (1, 2, -1)
    assert interpolation_solve("pair_between", p0=(INF, 2), p1=(2, 6), a=F(1, 2)) == (4, 3)
    assert pair_between((INF, 2), (2, 6), 0) == (INF, 2)
    with pytest.raises(ValueError):
        theta_of_q(2)
    with pytest.raises(ValueError):
        pair_between((INF, 2), (2, 6), F(3, 2))
    with pytest.raises(ValueError):
        interpolation_solve("nope")


def test_gwp_threshold_and_consistency():
    assert gwp_threshold() == F(49, 74)
    assert lambda_exponent(F(49, 74)) * F(24, 25) == 2
    rep = section6_consistency()
    assert rep["growth_exponent"] == F(24, 25) and rep["growth_matches"] and rep["threshold_closes"]
    assert F(3, 2) - F(27, 50) == F(24, 25)
    with pytest.raises(ZeroDivisionError):
        lambda_exponent(F(1, 2))


def test_slack_comparisons():
    a_plus = Exponent(F(-1, 2), 1)
    assert not a_plus.at_most(Exponent(F(-1, 2)))
    assert a_plus.at_most(Exponent(F(-1, 3)))
    assert Exponent(F(-1, 2)).at_most(Exponent(F(-1, 2)))
    assert str(a_plus + Exponent(1)) == "1/2+"
    assert str(-a_plus) == "1/2-"
    with pytest.raises(ValueError):
        Exponent(F(1), 1) + Exponent(F(1), -1)


def test_exponent_table_is_exact():
    rows = dict(exponent_table())
    assert rows["gwp_threshold"] == F(49, 74)
    assert all(isinstance(v, F) for v in rows.values())


@given(st.permutations(list(ALL_MONOMIALS)), st.fractions(F(-2), F(0)))
def test_budget_order_independent(perm, t):
    a = budget_from(ALL_MONOMIALS, t)
    b = budget_from(perm, t)
    assert a.exponents == b.exponents
    assert {k: labels(v) for k, v in a.binding.items()} == {k: labels(v) for k, v in b.binding.items()}
