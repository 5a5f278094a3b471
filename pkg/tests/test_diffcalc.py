from math import comb, factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sympy import Rational, symbols, diff as sdiff

from qedmbpt.diffcalc import (
    EnergyFunction,
    PolynomialFunction,
    degenerate_limit,
    diff_ratio,
    diff_ratio_n,
    divided_difference,
    leibniz_expand,
    veff_power_diff,
)
from qedmbpt.errors import DegenerateEnergies


def complete_homogeneous(energies, degree):
    """h_degree(energies): the divided difference of E^(degree + n)."""
    if degree < 0:
        return 0.0
    if not energies:
        return 1.0 if degree == 0 else 0.0
    head, rest = energies[0], energies[1:]
    return sum(head ** i * complete_homogeneous(rest, degree - i) for i in range(degree + 1))


def test_first_ratio_of_linear_function():
    f = PolynomialFunction([[[1.0]], [[2.0]]])
    assert diff_ratio(f, (0.3, 0.7))[0, 0] == pytest.approx(2.0)


def test_ratio_of_constant_vanishes():
    assert np.all(diff_ratio(np.eye(2), (0.1, 0.4)) == 0.0)


def test_degenerate_pair_rejected():
    with pytest.raises(DegenerateEnergies):
        diff_ratio(lambda E: E * E, (1.0, 1.0 + 1e-12))
    with pytest.raises(DegenerateEnergies):
        diff_ratio_n(lambda E: E, (0.0, 0.5, 0.5))


@pytest.mark.parametrize("m", range(6))
@pytest.mark.parametrize("n", range(4))
def test_powers_give_complete_homogeneous_polynomials(m, n):
    es = [0.3, -0.7, 1.1, 0.45][: n + 1]
    coeffs = [0.0] * m + [1.0]
    f = PolynomialFunction(coeffs)
    assert divided_difference(f, es)[0, 0] == pytest.approx(complete_homogeneous(es, m - n),
                                                              abs=1e-12)


def test_degenerate_limit_matches_symbolic_derivative():
    x = symbols("x")
    expr = 3 * x ** 5 - 2 * x ** 3 + x - 4
    f = PolynomialFunction([-4, 1, 0, -2, 0, 3])
    E0 = Rational(7, 10)
    for n in range(4):
        ref = float(sdiff(expr, x, n).subs(x, E0)) / factorial(n)
        assert degenerate_limit(f, 0.7, n)[0, 0] == pytest.approx(ref, abs=1e-12)
        assert divided_difference(f, [0.7] * (n + 1))[0, 0] == pytest.approx(ref, abs=1e-12)


def test_finite_difference_limit_for_opaque_function():
    f = EnergyFunction(lambda E: np.array([[np.exp(E), np.sin(E)], [E ** 3, 1 / (2 - E)]]))
    E = 0.4
    exact = {1: [[np.exp(E), np.cos(E)], [3 * E * E, 1 / (2 - E) ** 2]],
             2: [[np.exp(E) / 2, -np.sin(E) / 2], [3 * E, 1 / (2 - E) ** 3]]}
    for n, ref in exact.items():
        res = degenerate_limit(f, E, n, return_error=True)
        assert not res.analytic
        assert np.max(np.abs(res.value - np.array(ref))) < 1e-8


def test_near_degenerate_tuple_joins_smoothly():
    f = PolynomialFunction([0, 0, 0, 1.0])
    exact = divided_difference(f, [0.5, 0.5, 0.9])[0, 0]
    near = divided_difference(f, [0.5, 0.5 + 1e-5, 0.9])[0, 0]
    assert near == pytest.approx(exact, abs=1e-4)


def _random_poly(rng, degree, shape=(3, 3)):
    return PolynomialFunction([rng.normal(size=shape) for _ in range(degree + 1)])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 5), st.integers(0, 5), st.integers(0, 3),
       st.lists(st.floats(-1.5, 1.5), min_size=4, max_size=4), st.integers(0, 2 ** 31))
def test_leibniz_rule_property(da, db, n, energies, seed):
    rng = np.random.default_rng(seed)
    A, B = _random_poly(rng, da), _random_poly(rng, db)
    es = sorted(energies)[: n + 1]
    lhs = divided_difference(A * B, es)
    rhs = leibniz_expand(n, A, B, es)
    scale = max(1.0, float(np.max(np.abs(lhs))))
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * scale


def test_leibniz_with_repeated_energies():
    rng = np.random.default_rng(3)
    A, B = _random_poly(rng, 4), _random_poly(rng, 5)
    es = [0.2, 0.2, 0.2, 0.9]
    assert np.max(np.abs(divided_difference(A * B, es) - leibniz_expand(3, A, B, es))) < 1e-12
    with pytest.raises(ValueError):
        leibniz_expand(2, A, B, [0.1, 0.2])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3, unique=True))
def test_divided_difference_is_symmetric(es):
    if min(abs(a - b) for i, a in enumerate(es) for b in es[:i]) < 1e-3:
        return
    f = PolynomialFunction([0.3, -1.0, 0.5, 2.0, 0.1])
    a = divided_difference(f, es)[0, 0]
    b = divided_difference(f, es[::-1])[0, 0]
    assert a == pytest.approx(b, abs=1e-12)
    assert diff_ratio_n(f, es)[0, 0] == pytest.approx(a, abs=1e-12)


def test_veff_power_diff_freezes_left_factors():
    V1 = np.array([[1.0, 0.5], [0.5, 2.0]])
    V2 = PolynomialFunction([np.eye(2), np.ones((2, 2))])
    out = veff_power_diff([V1, V2], (0.1, 0.6))
    assert np.allclose(out, V1 @ np.ones((2, 2)))
    with pytest.raises(ValueError):
        veff_power_diff([], (0.1, 0.2))


def test_binomial_identity_for_degenerate_power():
    # n-th ratio of E^m at a single point is C(m, n) E^(m-n)
    f = PolynomialFunction([0, 0, 0, 0, 0, 1.0])
    for n in range(4):
        assert divided_difference(f, [1.3] * (n + 1))[0, 0] == pytest.approx(
            comb(5, n) * 1.3 ** (5 - n), abs=1e-12)


def test_generic_recursion_agrees_with_exact_polynomial_path():
    rng = np.random.default_rng(5)
    P = _random_poly(rng, 5)
    opaque = EnergyFunction(P, derivative=P.derivative)
    for es in ([0.1, 0.6, -0.4, 1.2], [0.3, 0.3, 0.9, -0.2], [0.5, 0.5, 0.5, 0.5]):
        assert np.max(np.abs(divided_difference(opaque, es) - P.divided_difference(es))) < 1e-12
