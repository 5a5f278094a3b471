import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qedmbpt.errors import NoConvergence, SingularResolvent
from qedmbpt.modelspace import (
    MatrixModel,
    build_projectors,
    wave_operator_identity_check,
    fold_series_check,
    match_eigenvalues,
    omega_bar_function,
    random_model,
    resolvent,
    rs_orders,
    solve_bloch_instantaneous,
)


def test_model_validation():
    with pytest.raises(ValueError):
        MatrixModel(np.zeros(3), np.ones((2, 2)), (0,))
    with pytest.raises(ValueError):
        MatrixModel(np.zeros(2), np.array([[0, 1.0], [0, 0]]), (0,))
    with pytest.raises(ValueError):
        MatrixModel(np.zeros(2), np.zeros((2, 2)), ())


def test_projectors_and_resolvent():
    m = MatrixModel(np.array([0.0, 1.0, 2.0]), np.zeros((3, 3)), (0,))
    pr = build_projectors(m)
    assert np.allclose(pr.P + pr.Q, np.eye(3))
    assert np.allclose(np.diag(resolvent(0.5, m)), [0.0, -2.0, -2 / 3])
    with pytest.raises(SingularResolvent):
        resolvent(1.0, m)


def test_single_state_reproduces_rayleigh_schroedinger():
    h0 = np.array([0.0, 1.0, 1.5])
    V = 0.05 * np.array([[1.0, 1.0, 0.5], [1.0, 0.0, 0.3], [0.5, 0.3, 0.0]])
    m = MatrixModel(h0, V, (0,))
    omega, veff = solve_bloch_instantaneous(m)
    exact = np.linalg.eigvalsh(m.H)[0]
    assert veff.matrix[0, 0] == pytest.approx(exact, abs=1e-12)
    _, veffs = rs_orders(m, 2)
    second = V[0, 1] ** 2 / (0 - 1.0) + V[0, 2] ** 2 / (0 - 1.5)
    assert veffs[2][0, 0] == pytest.approx(second, abs=1e-15)


def test_strong_coupling_raises():
    h0 = np.array([0.0, 0.1])
    V = np.array([[0.0, 3.0], [3.0, 0.0]])
    with pytest.raises(NoConvergence):
        solve_bloch_instantaneous(MatrixModel(h0, V, (0,)), max_iter=200)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_heff_eigenvalues_are_exact(seed):
    m = random_model(np.random.default_rng(seed))
    omega, veff = solve_bloch_instantaneous(m)
    for heff_ev, exact_ev, overlap in match_eigenvalues(m, omega, veff):
        assert heff_ev == pytest.approx(exact_ev, abs=1e-10)
        assert overlap > 0.5


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_intermediate_normalization(seed):
    m = random_model(np.random.default_rng(seed))
    omega, _ = solve_bloch_instantaneous(m)
    assert np.allclose(omega.matrix[list(m.model)], np.eye(2), atol=1e-14)


def test_fold_series_identities():
    m = random_model(np.random.default_rng(7))
    rep = fold_series_check(m, 3)
    assert rep.order_deviation < 1e-10
    assert rep.diffcalc_deviation < 1e-8
    # the truncated series converges geometrically to the exact wave operator
    assert rep.deviations[-1] < rep.deviations[0]
    full = fold_series_check(m, 60)
    assert full.deviation < 1e-10
    assert wave_operator_identity_check(m, 60).deviation < 1e-9


def test_omega_bar_derivatives_are_exact():
    m = random_model(np.random.default_rng(11))
    f = omega_bar_function(m, 0)
    E, h = 0.05, 1e-5
    fd = (f(E + h) - f(E - h)) / (2 * h)
    assert np.max(np.abs(fd - f.derivative(E, 1))) < 1e-8
