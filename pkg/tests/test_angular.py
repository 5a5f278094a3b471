import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import spherical_jn

from qedmbpt.angular import (
    GAUNT,
    SCALAR_RETARDATION,
    Multipole,
    bessel_derivative_identity_check,
    bessel_j,
    bessel_j_all,
    bessel_transform_matrix,
    c_reduced,
    coulomb_gauge_f_assemble,
    coulomb_kernel,
    coulomb_kernel_point,
    coupled_two_body,
    gaunt_components,
    gaunt_potential_rme,
    scalar_retardation_rme,
    sph_wave_expansion_check,
    sr_components,
)
from qedmbpt.radial import make_grid
from qedmbpt.wigner import wigner_6j


@pytest.mark.parametrize("l", [0, 1, 2, 5, 10, 20])
def test_bessel_matches_scipy(l):
    x = np.concatenate([np.logspace(-6, 0, 20), np.linspace(1, 200, 300)])
    ref = spherical_jn(l, x)
    assert np.max(np.abs(bessel_j(l, x) - ref)) < 1e-13
    assert np.max(np.abs(bessel_j_all(l, x)[l] - ref)) < 1e-13


def test_bessel_argument_checks():
    with pytest.raises(ValueError):
        bessel_j(-1, 1.0)
    with pytest.raises(ValueError):
        bessel_j(0, -1.0)
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(3, 0.0) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 20), st.floats(0.01, 3), st.floats(0.01, 3), st.floats(-1, 1))
def test_plane_wave_addition_theorem(k, r1, r2, cos_t):
    assert sph_wave_expansion_check(k, r1, r2, cos_t, 80) < 1e-10


@pytest.mark.parametrize("l", [0, 1, 3])
def test_bessel_ladder_identities(l):
    first, second = bessel_derivative_identity_check(l, 2.3, 0.7)
    assert first < 1e-8 and second < 1e-8


def test_c_reduced_known_values():
    # <kappa||C^0||kappa> = sqrt(2j+1)
    assert c_reduced(-1, 0, -1) == pytest.approx(np.sqrt(2))
    assert c_reduced(-2, 0, -2) == pytest.approx(2.0)
    # parity and triangle selection
    assert c_reduced(-1, 1, -1) == 0.0
    assert c_reduced(-1, 2, 1) == 0.0
    assert c_reduced(-1, 1, 1) == pytest.approx(-np.sqrt(2 / 3))


@pytest.mark.parametrize("ka", [-1, 1, -2, 2, -3, 3])
@pytest.mark.parametrize("kb", [-1, 1, -2, 2, -3, 3])
def test_c_reduced_from_orbital_recoupling(ka, kb):
    # spin-spectator recoupling of the orbital C^k element
    from qedmbpt.angular import _c_orbital
    from qedmbpt.radial import kappa_to_j, kappa_to_l

    la, lb, ja, jb = kappa_to_l(ka), kappa_to_l(kb), kappa_to_j(ka), kappa_to_j(kb)
    for k in range(6):
        phase = (-1) ** int(round(la + 0.5 + jb + k))
        ref = phase * np.sqrt((2 * ja + 1) * (2 * jb + 1)) * wigner_6j(la, ja, 0.5, jb, lb, k) \
            * _c_orbital(la, k, lb)
        assert c_reduced(ka, k, kb) == pytest.approx(ref, abs=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([-1, 1, -2, 2, -3, 3]), st.integers(0, 5), st.sampled_from([-1, 1, -2, 2, -3, 3]))
def test_c_reduced_hermiticity(ka, k, kb):
    ja, jb = abs(ka) - 0.5, abs(kb) - 0.5
    phase = (-1) ** int(round(ja - jb))
    assert c_reduced(kb, k, ka) == pytest.approx(phase * c_reduced(ka, k, kb), abs=1e-14)


def test_coupled_two_body_is_a_6j():
    v = coupled_two_body(0.5, 1.5, 0.5, 1.5, 1, 1)
    assert abs(v) == pytest.approx(abs(wigner_6j(0.5, 1.5, 1, 1.5, 0.5, 1)))


def test_coulomb_kernel_hydrogenic_slater_integral():
    # F^0(1s,1s) = 5 Z / 8 for 4 Z^3 r^2 exp(-2 Z r)
    Z = 1.0
    g = make_grid(150, 1e-6, 60.0)
    rho = 4 * Z ** 3 * g.r ** 2 * np.exp(-2 * Z * g.r)
    gs = rho * np.sqrt(g.r)
    assert gs @ coulomb_kernel(g, 0) @ gs == pytest.approx(5 * Z / 8, rel=1e-9)
    # the point-sampled kernel is only first-order accurate
    w = g.w
    point = (rho * w) @ coulomb_kernel_point(g, 0) @ (rho * w)
    assert point == pytest.approx(5 * Z / 8, rel=1e-2)


def test_coulomb_kernel_is_symmetric_positive():
    g = make_grid(80, 1e-6, 30.0)
    for L in range(4):
        K = coulomb_kernel(g, L)
        assert np.allclose(K, K.T)
        assert np.linalg.eigvalsh(K).min() > -1e-12


def test_bessel_transform_closed_form():
    g = make_grid(150, 1e-6, 80.0)
    k = np.array([0.01, 0.5, 2.0, 10.0, 40.0])
    rho = g.r ** 2 * np.exp(-g.r)
    T = bessel_transform_matrix(0, k, g)
    assert np.max(np.abs(T @ (rho * np.sqrt(g.r)) - 2.0 / (1 + k * k) ** 2)) < 1e-9
    # l = 1: int r^2 e^-r j_1(kr) dr = 8k / (1 + k^2)^3 / ... checked against quadrature
    T1 = bessel_transform_matrix(1, k, g)
    from scipy.integrate import quad
    ref = [quad(lambda r: r * r * np.exp(-r) * spherical_jn(1, kk * r), 0, 80, limit=400)[0]
           for kk in k]
    assert np.max(np.abs(T1 @ (rho * np.sqrt(g.r)) - ref)) < 1e-8
    with pytest.raises(ValueError):
        bessel_transform_matrix(0, [0.0], g)


def test_multipole_validation():
    with pytest.raises(ValueError):
        Multipole(-1, 1.0, GAUNT)
    with pytest.raises(ValueError):
        Multipole(1, 0.0, SCALAR_RETARDATION)
    with pytest.raises(ValueError):
        Multipole(1, 1.0, "Magnetic")


def test_vertex_selection_rules():
    # s -> s needs an odd-parity spin-angle tensor
    assert gaunt_components(-1, -1, 0) == []
    assert [c[0] for c in gaunt_components(-1, -1, 1)] == [0, 1]
    assert sr_components(-1, -1, 0) != []
    assert all(c[0] == 2 for c in sr_components(-1, 1, 2))


def test_single_particle_elements(spectrum10, grid10):
    a = spectrum10.orbital(1, -1)
    b = spectrum10.orbital(2, -1)
    el = gaunt_potential_rme(a, b, 1, 0.3, grid10, L=1)
    assert set(el.components) == {1} and np.isfinite(el.value)
    assert gaunt_potential_rme(a, b, 0, 0.3, grid10).value == 0.0
    sr = scalar_retardation_rme(a, b, 1, 0.3, grid10)
    assert np.isfinite(sr.value)
    # small k: the elements vanish with the Bessel functions
    tiny = scalar_retardation_rme(a, b, 2, 1e-4, grid10)
    assert abs(tiny.value) < 1e-6


def test_coulomb_gauge_weights():
    terms = coulomb_gauge_f_assemble(2, 137.0)
    assert len(terms) == 6
    gaunt = [w for kind, l, w in terms if kind == GAUNT]
    sr = [w for kind, l, w in terms if kind == SCALAR_RETARDATION]
    assert all(w < 0 for w in gaunt) and all(w > 0 for w in sr)
    assert gaunt[1] == pytest.approx(-3 * 137.0 / np.pi)
    with pytest.raises(ValueError):
        coulomb_gauge_f_assemble(-1, 137.0)
