import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qedmbpt.errors import InvalidGrid, SupercriticalZ
from qedmbpt.radial import (
    C_LIGHT,
    build_spectrum,
    dirac_spectrum,
    kappa_to_j,
    kappa_to_l,
    make_grid,
    nvp_filter,
    sommerfeld_energy,
    write_spectrum,
)


def test_kappa_quantum_numbers():
    assert [kappa_to_l(k) for k in (-1, 1, -2, 2, -3)] == [0, 1, 1, 2, 2]
    assert [kappa_to_j(k) for k in (-1, 1, -2, 2)] == [0.5, 0.5, 1.5, 1.5]


def test_grid_validation():
    with pytest.raises(InvalidGrid):
        make_grid(1, 1e-6, 1.0)
    with pytest.raises(InvalidGrid):
        make_grid(50, 1.0, 0.5)
    with pytest.raises(InvalidGrid):
        make_grid(50, 0.0, 1.0)


def test_grid_integrates_exponentials():
    g = make_grid(120, 1e-7, 40.0)
    assert g.integrate(np.exp(-g.r)) == pytest.approx(1.0, abs=1e-10)
    assert g.integrate(g.r ** 2 * np.exp(-2 * g.r)) == pytest.approx(0.25, abs=1e-10)


def test_sinc_interpolation_is_accurate():
    g = make_grid(120, 1e-6, 30.0)
    f_small = g.rs * np.exp(-g.rs)
    moved = g.small_to_large(f_small)
    err = np.abs(moved - g.r * np.exp(-g.r))
    # the truncated sinc series leaves a tail near r_min where r is tiny
    assert g.integrate(err) < 1e-10
    assert np.max(err[g.r > 1e-3]) < 1e-10


def test_supercritical_and_bad_kappa():
    g = make_grid(40, 1e-6, 1.0)
    with pytest.raises(SupercriticalZ):
        dirac_spectrum(140.0, -1, g)
    with pytest.raises(ValueError):
        dirac_spectrum(10.0, 0, g)


@pytest.mark.parametrize("n,kappa", [(1, -1), (2, -1), (2, 1), (2, -2), (3, 2)])
def test_bound_energies_match_sommerfeld(spectrum10, n, kappa):
    e = spectrum10.orbital(n, kappa).energy
    assert e == pytest.approx(sommerfeld_energy(10.0, n, kappa), rel=1e-6)


def test_spectrum_is_orthonormal(spectrum10, grid10):
    s = spectrum10[-1]
    S = s.F @ np.diag(grid10.w) @ s.F.T + s.G @ np.diag(grid10.ws) @ s.G.T
    assert np.max(np.abs(S - np.eye(len(s)))) < 1e-10


def test_spectrum_branches(spectrum10, grid10):
    s = spectrum10[-1]
    assert s.positive.sum() == grid10.n
    assert np.all(s.energies[~s.positive] < -2 * C_LIGHT ** 2 + 1e3)
    orb = spectrum10.orbital(1, -1)
    assert orb.label.startswith("1s") and orb.n == 1


def test_nvp_filter(spectrum10):
    kept = nvp_filter(spectrum10, include_negative=False)
    assert all(kept[k].positive.all() for k in kept)
    assert nvp_filter(spectrum10, include_negative=True) is spectrum10


def test_write_spectrum(tmp_path, spectrum10):
    text = write_spectrum(spectrum10, tmp_path / "s.txt")
    assert (tmp_path / "s.txt").read_bytes() == text.encode()
    assert "[kappa = -1]" in text and "\r" not in text


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=1.0, max_value=60.0))
def test_ground_state_scales_with_z(Z):
    g = make_grid(80, 1e-6 / Z, 60.0 / Z)
    spec = build_spectrum(Z, [-1], g)
    e = spec.orbital(1, -1).energy
    assert e == pytest.approx(sommerfeld_energy(Z, 1, -1), rel=1e-5)
    # relativity binds deeper than the Bohr value, by less than (Z/c)^2
    assert -Z * Z / 2 * (1 + (Z / C_LIGHT) ** 2) < e < -Z * Z / 2
