import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from qedmbpt.angular import GAUNT, SCALAR_RETARDATION
from qedmbpt.errors import InvalidGrid, NoConvergence, PoleOnGrid, SingularDenominator
from qedmbpt.pairsolver import (
    CHARGE,
    PairBasis,
    TwoElectronChannel,
    _denominators,
    apply_coulomb,
    ci_energy,
    coulomb_element,
    coulomb_matrix,
    correlated_photon_energy,
    emit_photon_pair,
    l_tail,
    make_kgrid,
    one_photon_matrix_element,
    operator_parity,
    pair_channels,
    pair_model_state,
    photon_sector,
    photon_terms,
    retarded_energy,
    second_order_pair,
    sector_retarded_energy,
    solve_coulomb_pair,
    vdot,
    vertex_components,
)
from qedmbpt.radial import build_spectrum, make_grid

Z = 10.0


@pytest.fixture(scope="module")
def spec():
    g = make_grid(70, 1e-6 / Z, 60.0 / Z)
    return build_spectrum(Z, [-1, 1, -2], g)


@pytest.fixture(scope="module")
def basis(spec):
    return PairBasis(spec, 0, 1, l_max=1, n_orbitals=8)


@pytest.fixture(scope="module")
def basis_triplet(spec):
    return PairBasis(spec, 1, 1, l_max=1, n_orbitals=8)


@pytest.fixture(scope="module")
def kgrid():
    return make_kgrid(40)


def _orb(basis, kappa, i):
    return basis.orbitals[kappa].orbital(i)


def _ground(basis):
    return pair_model_state(basis, (1, -1), (2, -1))


# ---------------------------------------------------------------- k grid

def test_kgrid_validation():
    with pytest.raises(InvalidGrid):
        make_kgrid(10)
    with pytest.raises(InvalidGrid):
        make_kgrid(40, k0=0.0)
    kg = make_kgrid(20)
    with pytest.raises(PoleOnGrid):
        make_kgrid(20, poles=[kg.k[3]])


def test_kgrid_integrates_on_half_line():
    kg = make_kgrid(60, k0=2.0)
    assert kg.integrate(np.exp(-kg.k)) == pytest.approx(1.0, abs=1e-12)
    assert kg.integrate(1.0 / (1.0 + kg.k) ** 2) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("kp", [0.05, 0.7, 3.0, 25.0])
def test_principal_value_matches_cauchy_quadrature(kp):
    kg = make_kgrid(120, k0=2.0)

    def g(k):
        return k * np.exp(-k)

    # scipy's Cauchy weight computes PV int f / (x - kp)
    ref = -quad(g, 0, 80, weight="cauchy", wvar=kp)[0]
    assert kg.pv(g(kg.k), kp, g(kp)) == pytest.approx(ref, abs=1e-10)


def test_resolvent_integral_both_signs():
    kg = make_kgrid(120, k0=2.0)
    c = 3.0
    g = np.exp(-kg.k)
    delta = np.array([-2.0, 1.5])
    out = kg.resolvent_integral(np.vstack([g, g]), delta, c, g_at_pole=np.exp(-delta / c))
    ref0 = quad(lambda k: np.exp(-k) / (-2.0 - c * k), 0, np.inf)[0]
    ref1 = -quad(lambda k: np.exp(-k) / c, 0, 80, weight="cauchy", wvar=0.5)[0]
    assert out[0] == pytest.approx(ref0, abs=1e-12)
    assert out[1] == pytest.approx(ref1, abs=1e-10)
    with pytest.raises(ValueError):
        kg.resolvent_integral(np.vstack([g]), np.array([1.0]), c)


# ---------------------------------------------------------------- channels and basis

def test_channel_rules():
    with pytest.raises(ValueError):
        TwoElectronChannel(-1, -1, 2)
    ch = TwoElectronChannel(-1, 1, 1)
    assert ch.parity == -1
    assert ch.exchange_phase == 1.0
    assert TwoElectronChannel(-1, -1, 0).exchange_phase == -1.0
    assert ch.swapped() == TwoElectronChannel(1, -1, 1)
    chans = pair_channels(0, 1, [-1, 1, -2])
    assert {(c.kappa1, c.kappa2) for c in chans} == {(-1, -1), (1, 1), (-2, -2)}


def test_swap_is_an_involution(basis, rng):
    vec = [rng.normal(size=basis.shape(i)) for i in range(len(basis.channels))]
    back = basis.swap(basis.swap(vec))
    assert all(np.allclose(a, b) for a, b in zip(vec, back))
    flat = basis.unflatten(basis.flatten(vec))
    assert all(np.array_equal(a, b) for a, b in zip(vec, flat))


def test_coulomb_operator_is_hermitian_and_exchange_symmetric(basis, rng):
    x = [rng.normal(size=basis.shape(i)) for i in range(len(basis.channels))]
    y = [rng.normal(size=basis.shape(i)) for i in range(len(basis.channels))]
    assert vdot(x, apply_coulomb(basis, y)) == pytest.approx(vdot(apply_coulomb(basis, x), y),
                                                            rel=1e-11)
    a = basis.swap(apply_coulomb(basis, x))
    b = apply_coulomb(basis, basis.swap(x))
    assert max(np.max(np.abs(p - q)) for p, q in zip(a, b)) < 1e-11
    V = coulomb_matrix(basis)
    assert np.allclose(V @ basis.flatten(x), basis.flatten(apply_coulomb(basis, x)), atol=1e-11)


def test_coulomb_elements_match_orbital_level(basis):
    # <1s 2s; 0| V |1s 2s; 0> from the operator and from the Slater integral
    ch = basis.channel_index(-1, -1)
    vec = basis.zeros()
    vec[ch][0, 1] = 1.0
    out = apply_coulomb(basis, vec)
    a, b = _orb(basis, -1, 0), _orb(basis, -1, 1)
    assert out[ch][0, 1] == pytest.approx(coulomb_element(a, b, a, b, 0, basis.grid), rel=1e-11)
    assert out[ch][1, 0] == pytest.approx(coulomb_element(b, a, a, b, 0, basis.grid), rel=1e-11)


# ---------------------------------------------------------------- pair equation

def test_first_iterate_is_the_second_order_sum(basis):
    model = _ground(basis)
    chi, e1 = second_order_pair(basis, model)
    a, b = _orb(basis, -1, 0), _orb(basis, -1, 1)
    E0 = a.energy + b.energy
    s = 1 / np.sqrt(2)
    direct = coulomb_element(a, b, a, b, 0, basis.grid)
    exch = coulomb_element(a, b, b, a, 0, basis.grid)
    # J = 0 s^2: |ab> - eta |ba> with eta = -1 gives (|ab> + |ba>) / sqrt 2
    assert e1 == pytest.approx(direct + exch, rel=1e-11)
    for kappa in (-1, 1):
        ch = basis.channel_index(kappa, kappa)
        for r in range(3):
            for t in range(3):
                o1, o2 = _orb(basis, kappa, r), _orb(basis, kappa, t)
                if kappa == -1 and {r, t} <= {0, 1} and r != t:
                    continue
                brute = s * (coulomb_element(o1, o2, a, b, 0, basis.grid)
                             + coulomb_element(o1, o2, b, a, 0, basis.grid))
                assert chi[ch][r, t] == pytest.approx(brute / (E0 - o1.energy - o2.energy),
                                                      rel=1e-9, abs=1e-14)


@pytest.mark.parametrize("which", ["singlet", "triplet"])
def test_pair_equation_equals_ci(which, basis, basis_triplet):
    b = basis if which == "singlet" else basis_triplet
    model = _ground(b)
    pf = solve_coulomb_pair(b, model, tol=1e-12)
    e_ci, overlap = ci_energy(b, model, n_states=None)
    assert pf.energy == pytest.approx(e_ci, abs=1e-9)
    assert overlap > 0.9


def test_pair_function_is_antisymmetric(basis_triplet):
    pf = solve_coulomb_pair(basis_triplet, _ground(basis_triplet))
    rho = pf.rho
    swapped = basis_triplet.swap(rho)
    assert max(np.max(np.abs(p + q)) for p, q in zip(rho, swapped)) < 1e-12


def test_energy_independent_of_reference_ordering(basis):
    p1 = solve_coulomb_pair(basis, pair_model_state(basis, (1, -1), (2, -1)))
    p2 = solve_coulomb_pair(basis, pair_model_state(basis, (2, -1), (1, -1)))
    assert p1.energy == pytest.approx(p2.energy, abs=1e-11)


def test_coulomb_energy_is_analytic_in_coupling(basis):
    model = _ground(basis)
    _, first = second_order_pair(basis, model)
    d = 1e-4
    ep = solve_coulomb_pair(basis, model, scale=d).veff
    em = solve_coulomb_pair(basis, model, scale=-d).veff
    assert (ep - em) / (2 * d) == pytest.approx(first, rel=1e-7)


def test_pair_equation_failure_modes(basis):
    model = _ground(basis)
    with pytest.raises(NoConvergence):
        solve_coulomb_pair(basis, model, max_iter=2)
    ch = basis.channel_index(1, 1)
    with pytest.raises(SingularDenominator):
        _denominators(basis, model, E=basis.pair_energies(ch)[0, 0])
    with pytest.raises(ValueError):
        pair_model_state(PairBasis(basis.spectrum, 1, 1, l_max=0, n_orbitals=4),
                         (1, -1), (1, -1))


# ---------------------------------------------------------------- photon vertices

def test_vertex_rules():
    assert operator_parity(GAUNT, 1) == 1 and operator_parity(SCALAR_RETARDATION, 1) == -1
    assert vertex_components(SCALAR_RETARDATION, 1, 2, -1, -1) == []
    assert vertex_components(CHARGE, 0, 0, -1, -1)[0][3] == pytest.approx(np.sqrt(2))
    with pytest.raises(ValueError):
        vertex_components("Magnetic", 1, 1, -1, -1)
    kinds = [t[0] for t in photon_terms(2, (GAUNT, SCALAR_RETARDATION, CHARGE))]
    assert kinds.count(GAUNT) == 7 and kinds.count(SCALAR_RETARDATION) == 3
    assert kinds.count(CHARGE) == 3


def test_element_argument_checks(basis, kgrid):
    a = _orb(basis, -1, 0)
    with pytest.raises(ValueError):
        one_photon_matrix_element(a, a, a, a, 0, 2 * a.energy, basis.grid, kgrid, 1,
                                  gauge="coulomb", kinds=(CHARGE,))
    with pytest.raises(ValueError):
        one_photon_matrix_element(a, a, a, a, 0, 2 * a.energy, basis.grid, kgrid, 1,
                                  gauge="axial")


def test_pair_level_retarded_energy_equals_orbital_elements(basis, kgrid):
    model = _ground(basis)
    psi0 = model.vector(basis)
    E = model.energy
    a, b = _orb(basis, -1, 0), _orb(basis, -1, 1)
    s = 1 / np.sqrt(2)
    comps = [((a, b), s), ((b, a), s)]
    direct = sum(cb * ck * one_photon_matrix_element(r, q, t, u, 0, E, basis.grid, kgrid, 2)
                 for (r, q), cb in comps for (t, u), ck in comps)
    pair = retarded_energy(basis, psi0, psi0, E, kgrid, 2)
    assert pair == pytest.approx(direct, rel=1e-10)


# ---------------------------------------------------------------- photonic pair functions

@pytest.fixture(scope="module")
def ground_pf(basis):
    return solve_coulomb_pair(basis, _ground(basis))


def _gaunt_sector(basis, crossing):
    # Gaunt l = 1, L = 1 from an even J = 0 pair reaches J' = 1, even parity
    sb = PairBasis(basis.spectrum, 1, 1, l_max=1, n_orbitals=8)
    return photon_sector(sb, crossing)


def test_free_sector_is_a_single_resolvent(ground_pf, basis):
    sec = _gaunt_sector(basis, False)
    k = np.array([0.3, 1.0, 7.0])
    ph = emit_photon_pair(ground_pf, GAUNT, 1, 1, k, sec)
    coef = ph.coefficients()
    flat_e = sec.basis.flatten([sec.basis.pair_energies(i)
                                for i in range(len(sec.basis.channels))])
    ref = ph.numerators / (ground_pf.energy - flat_e[None, :] - sec.basis.c * k[:, None])
    assert np.allclose(coef, ref, rtol=1e-14, atol=0)


def test_interacting_sector_matches_dense_solve(ground_pf, basis):
    sec = _gaunt_sector(basis, True)
    k = np.array([1.0])
    ph = emit_photon_pair(ground_pf, GAUNT, 1, 1, k, sec)
    coef = ph.coefficients()[0]
    sb = sec.basis
    H = coulomb_matrix(sb)
    H[np.diag_indices_from(H)] += sb.flatten([sb.pair_energies(i)
                                              for i in range(len(sb.channels))])
    lhs = (ground_pf.energy - sb.c * 1.0) * np.eye(H.shape[0]) - H
    src = sec.expand(ph.numerators[0])
    brute = np.linalg.solve(lhs, src)
    assert np.max(np.abs(coef - brute)) < 1e-10 * max(1.0, np.max(np.abs(brute)))
    residual = lhs @ coef - src
    assert np.max(np.abs(residual)) < 1e-10 * max(1.0, np.max(np.abs(src)))


def test_large_k_resolvent_scaling(ground_pf, basis):
    sec = _gaunt_sector(basis, True)
    k = np.array([1e4, 1e5])
    ph = emit_photon_pair(ground_pf, GAUNT, 1, 1, k, sec)
    ratio = (ph.numerators / ph.denominators()) * (-sec.basis.c * k[:, None])
    nz = np.abs(ph.numerators) > 1e-30
    assert np.allclose(ratio[nz], ph.numerators[nz], rtol=1e-2)
    with pytest.raises(ValueError):
        emit_photon_pair(ground_pf, GAUNT, 1, 1, [0.0], sec)


def test_absorption_reproduces_the_one_photon_element(basis, kgrid):
    model = _ground(basis)
    bare = solve_coulomb_pair(basis, model, scale=0.0)
    assert bare.veff == 0.0

    def factory(Jp, par):
        return photon_sector(PairBasis(basis.spectrum, Jp, par, l_max=1, n_orbitals=8), False)

    via_sector = sector_retarded_energy(bare, kgrid, 2, factory)
    psi0 = model.vector(basis)
    direct = retarded_energy(basis, psi0, psi0, model.energy, kgrid, 2)
    assert via_sector == pytest.approx(direct, rel=1e-8)


def test_sector_route_reproduces_noncrossing_bilinear(ground_pf, basis, kgrid):
    def factory(Jp, par):
        return photon_sector(PairBasis(basis.spectrum, Jp, par, l_max=1, n_orbitals=8), False)

    via_sector = sector_retarded_energy(ground_pf, kgrid, 2, factory)
    direct = correlated_photon_energy(ground_pf, kgrid, 2, crossing=False)
    assert via_sector == pytest.approx(direct, rel=1e-8)


def test_correlated_photon_energy_is_analytic_at_zero_coupling(basis, kgrid):
    model = _ground(basis)
    psi0 = model.vector(basis)
    undressed = retarded_energy(basis, psi0, psi0, model.energy, kgrid, 2)
    d = 1e-3
    vals = [correlated_photon_energy(solve_coulomb_pair(basis, model, scale=s), kgrid, 2,
                                     crossing=False) for s in (-d, d)]
    assert 0.5 * (vals[0] + vals[1]) == pytest.approx(undressed, rel=1e-5)
    # the crossing correction vanishes with the coupling
    zero = solve_coulomb_pair(basis, model, scale=0.0)
    with_x = correlated_photon_energy(zero, kgrid, 1, crossing=True, sector_l_max=1,
                                      sector_orbitals=6)
    without = correlated_photon_energy(zero, kgrid, 1, crossing=False)
    assert with_x == pytest.approx(without, rel=1e-12)


def test_l_tail():
    assert l_tail([4.0, 2.0, 1.0]) == pytest.approx(1.0)
    assert l_tail([1.0, 2.0]) == 0.0
    assert l_tail([1.0]) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.1, 10.0))
def test_l_tail_is_exact_for_geometric_series(q, a):
    inc = [a * q ** i for i in range(5)]
    assert sum(inc) + l_tail(inc) == pytest.approx(a / (1 - q), rel=1e-12)
