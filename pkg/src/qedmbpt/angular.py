"""Spherical Bessel functions, spinor angular factors and photon potentials.

Conventions
-----------
A Dirac orbital is psi = (1/r) (P Omega_kappa, i Q Omega_-kappa).  For an
operator alpha*T where T acts on angles and spin, the matrix element between
two orbitals is i times a real number.  All routines here return that real
number (the "real-stripped" element)::

    R = int f(r) [P_a Q_c <kappa_a||T||-kappa_c> - Q_a P_c <-kappa_a||T||kappa_c>] dr

A product of two such elements therefore carries an extra factor i*i = -1
relative to the physical product.  The Coulomb-gauge weights returned by
:func:`coulomb_gauge_f_assemble` already include it.

Spin-angle tensors are coupled orbital-first, {C^l sigma}^L.  For the ranks
that occur in the photon potentials ({alpha C^{l+-1}}^l) the two orders agree,
and for the Gaunt recoupling the phase enters squared.

Radial integrals use the large-component nodes; the small component is moved
there by sinc interpolation (see :meth:`RadialGrid.small_to_large`).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import legval

from .radial import RadialGrid, kappa_to_j, kappa_to_l
from .wigner import triangle, wigner_3j, wigner_6j, wigner_9j

__all__ = [
    "bessel_j",
    "bessel_j_all",
    "bessel_j_series",
    "sph_wave_expansion_check",
    "bessel_derivative_identity_check",
    "c_reduced",
    "sigma_c_reduced",
    "alpha_angular",
    "Multipole",
    "ReducedMatrixElement",
    "gaunt_potential_rme",
    "scalar_retardation_rme",
    "gaunt_components",
    "sr_components",
    "coulomb_kernel",
    "coulomb_kernel_point",
    "bessel_transform_matrix",
    "coulomb_multipole_rme",
    "coupled_two_body",
    "coulomb_gauge_f_assemble",
    "gaunt_recoupling_phase",
]

GAUNT, SCALAR_RETARDATION, COULOMB = "Gaunt", "ScalarRetardation", "Coulomb"


# ---------------------------------------------------------------- Bessel

def bessel_j_series(l: int, x):
    """Ascending power series of j_l(x); accurate for x below ~l/2 + 1."""
    x = np.asarray(x, dtype=float)
    y = -0.5 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for m in range(1, 200):
        term = term * y / (m * (2 * l + 2 * m + 1))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    dfact = 1.0
    for i in range(1, 2 * l + 2, 2):
        dfact *= i
    return x ** l / dfact * total


def _bessel_downward(lmax: int, x):
    """j_0..j_lmax by Miller's downward recursion, normalised with
    sum_n (2n+1) j_n^2 = 1.  ``x`` must be a 1-d array of positive values."""
    nstart = int(max(lmax, x.max()) + 30 + 3 * np.sqrt(max(lmax, x.max())))
    out = np.empty((lmax + 1, x.size))
    f_next = np.zeros_like(x)
    f = np.full_like(x, 1e-30)
    norm = (2 * nstart + 1) * f * f
    for n in range(nstart, 0, -1):
        f_prev = (2 * n + 1) / x * f - f_next
        f_next, f = f, f_prev
        norm += (2 * (n - 1) + 1) * f * f
        if n - 1 <= lmax:
            out[n - 1] = f
        big = np.abs(f) > 1e100
        if np.any(big):
            s = np.where(big, 1e-100, 1.0)
            f = f * s
            f_next = f_next * s
            norm = norm * s * s
            out[: lmax + 1] *= s
    out /= np.sqrt(norm)
    # fix the sign against the closed forms of j_0 and j_1
    j0 = np.sin(x) / x
    j1 = np.sin(x) / (x * x) - np.cos(x) / x
    ref = np.where(np.abs(j0) > np.abs(j1), j0 * out[0], j1 * out[min(1, lmax)] if lmax >= 1 else j0 * out[0])
    if lmax == 0:
        ref = j0 * out[0]
    out *= np.where(ref < 0, -1.0, 1.0)
    return out


def _bessel_upward(lmax: int, x):
    """j_0..j_lmax by upward recursion from the closed forms (stable for x > lmax)."""
    out = np.empty((lmax + 1, x.size))
    out[0] = np.sin(x) / x
    if lmax >= 1:
        out[1] = out[0] / x - np.cos(x) / x
    for n in range(1, lmax):
        out[n + 1] = (2 * n + 1) / x * out[n] - out[n - 1]
    return out


def bessel_j_all(lmax: int, x):
    """Array of shape (lmax+1,) + x.shape with j_0(x) ... j_lmax(x).

    Per order l the ascending series is used below x = l/2, Miller's
    downward recursion up to x = lmax, and upward recursion from the closed
    forms of j_0, j_1 beyond that (where it is stable and avoids starting
    the downward recursion at n ~ x).
    """
    if lmax < 0:
        raise ValueError("lmax must be >= 0")
    xa = np.asarray(x, dtype=float)
    flat = xa.ravel()
    if np.any(flat < 0):
        raise ValueError("x must be non-negative")
    out = np.zeros((lmax + 1, flat.size))
    out[0, flat == 0.0] = 1.0
    big = flat > max(lmax, 1)
    mid = (flat > 0.0) & ~big
    if np.any(big):
        out[:, big] = _bessel_upward(lmax, flat[big])
    if np.any(mid):
        xp = flat[mid]
        vals = _bessel_downward(lmax, xp)
        for l in range(1, lmax + 1):
            small = xp < 0.5 * l
            if np.any(small):
                vals[l, small] = bessel_j_series(l, xp[small])
        out[:, mid] = vals
    return out.reshape((lmax + 1,) + xa.shape)


def bessel_j(l: int, x):
    """Spherical Bessel function of the first kind j_l(x)."""
    if l < 0:
        raise ValueError("l must be >= 0")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("x must be non-negative")
    small = xa < 0.5 * l
    out = np.empty_like(xa)
    if np.any(small):
        out[small] = bessel_j_series(l, xa[small])
    if np.any(~small):
        out[~small] = bessel_j_all(l, xa[~small])[l]
    return out if out.ndim else float(out)


def sph_wave_expansion_check(k, r1, r2, cos_theta, l_max):
    """|k sum_l (2l+1) j_l(k r1) j_l(k r2) P_l(cos) - sin(k r12)/r12|."""
    r12 = np.sqrt(max(r1 * r1 + r2 * r2 - 2 * r1 * r2 * cos_theta, 0.0))
    exact = k if r12 == 0 else np.sin(k * r12) / r12
    ja = bessel_j_all(l_max, k * r1)
    jb = bessel_j_all(l_max, k * r2)
    ls = np.arange(l_max + 1)
    coef = (2 * ls + 1) * ja * jb
    series = k * legval(cos_theta, coef)
    return float(abs(series - exact))


def bessel_derivative_identity_check(l, k, r, step=1e-5):
    """Residuals of (d/dr - l/r) j_l(kr) = -k j_{l+1}(kr) and
    (d/dr + (l+1)/r) j_l(kr) = k j_{l-1}(kr) (second only for l >= 1)."""
    def jl(n, rr):
        return bessel_j(n, k * rr)

    d = (jl(l, r + step) - jl(l, r - step)) / (2 * step)
    first = d - l / r * jl(l, r) + k * jl(l + 1, r)
    if l >= 1:
        second = d + (l + 1) / r * jl(l, r) - k * jl(l - 1, r)
    else:
        second = 0.0
    return float(abs(first)), float(abs(second))


# ---------------------------------------------------------------- angular factors

@lru_cache(maxsize=None)
def c_reduced(kappa_a: int, k: int, kappa_b: int) -> float:
    """<kappa_a || C^k || kappa_b> between spin-angle functions."""
    la, lb = kappa_to_l(kappa_a), kappa_to_l(kappa_b)
    if (la + k + lb) % 2:
        return 0.0
    ja, jb = kappa_to_j(kappa_a), kappa_to_j(kappa_b)
    if not triangle(ja, k, jb):
        return 0.0
    phase = -1.0 if int(ja + 0.5) % 2 else 1.0
    return phase * np.sqrt((2 * ja + 1) * (2 * jb + 1)) * wigner_3j(ja, k, jb, 0.5, 0, -0.5)


@lru_cache(maxsize=None)
def _c_orbital(la: int, k: int, lb: int) -> float:
    # <la || C^k || lb> for ordinary spherical harmonics
    if (la + k + lb) % 2 or not triangle(la, k, lb):
        return 0.0
    phase = -1.0 if la % 2 else 1.0
    return phase * np.sqrt((2 * la + 1) * (2 * lb + 1)) * wigner_3j(la, k, lb, 0, 0, 0)


@lru_cache(maxsize=None)
def sigma_c_reduced(kappa_a: int, l: int, L: int, kappa_b: int) -> float:
    """<kappa_a || {C^l sigma}^L || kappa_b> with orbital-first coupling."""
    la, lb = kappa_to_l(kappa_a), kappa_to_l(kappa_b)
    ja, jb = kappa_to_j(kappa_a), kappa_to_j(kappa_b)
    if not (triangle(ja, L, jb) and triangle(l, 1, L)):
        return 0.0
    co = _c_orbital(la, l, lb)
    if co == 0.0:
        return 0.0
    nine = wigner_9j(la, lb, l, 0.5, 0.5, 1, ja, jb, L)
    return np.sqrt((2 * ja + 1) * (2 * jb + 1) * (2 * L + 1) * 6.0) * nine * co


@lru_cache(maxsize=None)
def alpha_angular(kappa_a: int, l: int, L: int, kappa_c: int):
    """Angular coefficients (A_PQ, A_QP) of alpha {C^l sigma}^L.

    The real-stripped radial element is int f (A_PQ P_a Q_c - A_QP Q_a P_c) dr.
    """
    return sigma_c_reduced(kappa_a, l, L, -kappa_c), sigma_c_reduced(-kappa_a, l, L, kappa_c)


def gaunt_recoupling_phase(l: int, L: int) -> float:
    """(alpha1.alpha2)(C^l(1).C^l(2)) = sum_L phase * T^L(1).T^L(2), T = {C^l sigma}^L alpha-type."""
    return -1.0 if (1 + l - L) % 2 else 1.0


# ---------------------------------------------------------------- single-particle elements

@dataclass(frozen=True)
class Multipole:
    l: int
    k: float
    kind: str

    def __post_init__(self):
        if self.l < 0:
            raise ValueError("l must be >= 0")
        if self.kind not in (GAUNT, SCALAR_RETARDATION, COULOMB):
            raise ValueError(f"unknown interaction kind {self.kind!r}")
        if self.kind != COULOMB and not self.k > 0:
            raise ValueError("retarded multipoles need k > 0")


@dataclass(frozen=True)
class ReducedMatrixElement:
    """Real-stripped reduced element, summed over its tensor components.

    ``components`` maps the coupled spin-angle rank (L for Gaunt, the
    auxiliary C-rank for scalar retardation) to (radial integral, angular
    factor) pairs; ``value`` is the total.  ``reason`` explains exact zeros.
    """

    bra: tuple
    ket: tuple
    multipole: Multipole
    value: float
    components: dict
    reason: str = ""


def _alpha_radial(grid, bra, ket, weight, a_pq, a_qp):
    Qa = grid.small_to_large(bra.G)
    Qc = grid.small_to_large(ket.G)
    return float(np.sum(grid.w * weight * (a_pq * bra.F * Qc - a_qp * Qa * ket.F)))


def _orb_id(o):
    return (o.kappa, o.index, bool(o.positive))


def gaunt_components(kappa_a, kappa_c, l):
    """Tensor ranks L and angular pairs contributing to alpha j_l C^l."""
    out = []
    for L in (l - 1, l, l + 1):
        if L < 0:
            continue
        a_pq, a_qp = alpha_angular(kappa_a, l, L, kappa_c)
        if a_pq != 0.0 or a_qp != 0.0:
            out.append((L, l, 1.0, a_pq, a_qp))
    return out


def sr_components(kappa_a, kappa_c, l):
    """Terms (rank l, C-rank lc, coefficient, A_PQ, A_QP) of the scalar
    retardation potential; the coefficient multiplies j_lc."""
    out = []
    for lc, coef in ((l + 1, np.sqrt((l + 1) * (2 * l + 3))),
                     (l - 1, np.sqrt(l * (2 * l - 1)) if l >= 1 else 0.0)):
        if coef == 0.0 or lc < 0:
            continue
        a_pq, a_qp = alpha_angular(kappa_a, lc, l, kappa_c)
        if a_pq != 0.0 or a_qp != 0.0:
            out.append((l, lc, coef, a_pq, a_qp))
    return out


def gaunt_potential_rme(bra, ket, l, k, grid: RadialGrid, L=None):
    """Reduced element of alpha j_l(kr) C^l, resolved into spin-angle ranks L.

    The potential is a sum of tensors of different rank, so there is no
    single reduced element: ``components`` holds one entry per rank.  With
    ``L`` only that rank is kept and ``value`` is its element; without it
    ``value`` is the element when exactly one rank survives the selection
    rules and NaN otherwise.
    """
    mp = Multipole(l, k, GAUNT)
    jl = bessel_j(l, k * grid.r)
    comps = {}
    for rank, _, _, a_pq, a_qp in gaunt_components(bra.kappa, ket.kappa, l):
        if L is None or rank == L:
            comps[rank] = (_alpha_radial(grid, bra, ket, jl, a_pq, a_qp), (a_pq, a_qp))
    if not comps:
        return ReducedMatrixElement(_orb_id(bra), _orb_id(ket), mp, 0.0, {},
                                    "parity or triangle selection rule")
    value = next(iter(comps.values()))[0] if len(comps) == 1 else float("nan")
    return ReducedMatrixElement(_orb_id(bra), _orb_id(ket), mp, value, comps)


def scalar_retardation_rme(bra, ket, l, k, grid: RadialGrid):
    """Reduced element of V_SR^l(kr), a rank-l spin-angle tensor."""
    mp = Multipole(l, k, SCALAR_RETARDATION)
    comps = {}
    for rank, lc, coef, a_pq, a_qp in sr_components(bra.kappa, ket.kappa, l):
        weight = coef * bessel_j(lc, k * grid.r)
        comps[lc] = (_alpha_radial(grid, bra, ket, weight, a_pq, a_qp), (a_pq, a_qp))
    if not comps:
        return ReducedMatrixElement(_orb_id(bra), _orb_id(ket), mp, 0.0, {},
                                    "parity or triangle selection rule")
    return ReducedMatrixElement(_orb_id(bra), _orb_id(ket), mp,
                                float(sum(v for v, _ in comps.values())), comps)


# ---------------------------------------------------------------- two-electron coupling

def coupled_two_body(ja, jb, jc, jd, J, L) -> float:
    """<ab;J | T^L(1).U^L(2) | cd;J> divided by <a||T||c><b||U||d>."""
    phase = -1.0 if int(round(jb + jc + J)) % 2 else 1.0
    return phase * wigner_6j(ja, jb, J, jd, jc, L)


def coulomb_kernel_point(grid: RadialGrid, L: int):
    """Point-sampled multipole kernel r_<^L / r_>^(L+1) on the large nodes.

    Kept for comparison only: the kink at r1 = r2 limits it to O(h^2).
    """
    r = grid.r
    lo = np.minimum(r[:, None], r[None, :])
    hi = np.maximum(r[:, None], r[None, :])
    return (lo / hi) ** L / hi


@lru_cache(maxsize=8)
def _gauss_legendre(n: int):
    t, w = np.polynomial.legendre.leggauss(n)
    t.flags.writeable = False
    w.flags.writeable = False
    return t, w


@lru_cache(maxsize=64)
def _toeplitz_column(n: int, h: float, L: int, nw: int):
    lam = L + 0.5
    omega_max = np.pi / h
    t, wt = _gauss_legendre(nw)
    om = 0.5 * omega_max * (t + 1.0)
    wo = 0.5 * omega_max * wt
    d = np.arange(n) * h
    col = np.cos(np.outer(d, om)) @ (wo * 2.0 * lam / (lam * lam + om * om))
    col *= h * h / np.pi
    col.flags.writeable = False
    return col


def coulomb_kernel(grid: RadialGrid, L: int, nw: int = 4000):
    """Band-limited multipole kernel acting on g = rho * sqrt(r).

    R^L(ac, bd) = g_ac @ K @ g_bd with g = (P_a P_c + Q_a Q_c) sqrt(r) on the
    large nodes.  In ln r the kernel sqrt(r1 r2) r_<^L / r_>^(L+1) is
    exp(-(L + 1/2)|x1 - x2|); K is its sinc-Galerkin (band-limited to the
    Nyquist frequency pi/h) counterpart, a symmetric Toeplitz matrix.
    """
    col = _toeplitz_column(grid.n, float(grid.h), int(L), int(nw))
    i = np.arange(grid.n)
    return col[np.abs(i[:, None] - i[None, :])]


def _mellin_j(l, s):
    # int_0^inf x^(s-1) j_l(x) dx
    from scipy.special import loggamma

    return np.exp(0.5 * np.log(np.pi) + (s - 2.0) * np.log(2.0)
                  + loggamma(0.5 * (l + s)) - loggamma(0.5 * (l + 3.0 - s)))


@lru_cache(maxsize=256)
def _bessel_table(l: int, h: float, log_rmin: float, n: int, k_bytes: bytes, nw: int):
    k = np.frombuffer(k_bytes)
    omega_max = np.pi / h
    t, wt = _gauss_legendre(nw)
    om = 0.5 * omega_max * (t + 1.0)
    wo = 0.5 * omega_max * wt
    m = _mellin_j(l, 0.5 - 1j * om) * wo / np.pi
    y0 = np.log(k) + log_rmin
    # Psi(y0 + h i) = Re sum_w m_w exp(i w (y0 + h i))
    left = np.exp(1j * np.outer(y0, om)) * m
    right = np.exp(1j * np.outer(om, h * np.arange(n)))
    psi = (left @ right).real
    table = h * psi / np.sqrt(k)[:, None]
    table.flags.writeable = False
    return table


def bessel_transform_matrix(l: int, k, grid: RadialGrid, nw: int = 3000):
    """Matrix T with int rho(r) j_l(k r) dr = T @ (rho * sqrt(r)) for each k.

    The sampled product rho sqrt(r) is treated as band-limited in ln r and
    the transform uses the exact Mellin transform of j_l, so there is no
    aliasing from the oscillating Bessel function at large k r.
    """
    k = np.ascontiguousarray(np.atleast_1d(np.asarray(k, dtype=float)))
    if np.any(k <= 0):
        raise ValueError("k must be positive")
    return _bessel_table(int(l), float(grid.h), float(np.log(grid.r_min)), grid.n,
                         k.tobytes(), int(nw))


def _density(grid, a, c):
    Qa = grid.small_to_large(a.G)
    Qc = grid.small_to_large(c.G)
    return a.F * c.F + Qa * Qc


def coulomb_multipole_rme(bra1, ket1, bra2, ket2, L, grid: RadialGrid):
    """Slater integral R^L times <a||C^L||c><b||C^L||d> for 1/r12 multipole L.

    Returns the product of reduced elements; combine with
    :func:`coupled_two_body` for a coupled two-electron channel.
    """
    ang = c_reduced(bra1.kappa, L, ket1.kappa) * c_reduced(bra2.kappa, L, ket2.kappa)
    if ang == 0.0:
        return 0.0
    sr = np.sqrt(grid.r)
    g1 = _density(grid, bra1, ket1) * sr
    g2 = _density(grid, bra2, ket2) * sr
    return float(ang * (g1 @ coulomb_kernel(grid, L) @ g2))


def coulomb_gauge_f_assemble(l_max: int, c: float):
    """Multipole terms of the Coulomb-gauge retarded interaction.

    Returns a list of (kind, l, weight) where the k-space integrand of a
    real-stripped product of single-particle elements is
    ``weight * k * R1(k) * R2(k)``.  The factor c/pi converts the
    Heaviside-Lorentz e^2/(4 pi^2) to atomic units with k a wave number
    (photon energy c k).  The sign of the real-stripped product is included.
    """
    if l_max < 0:
        raise ValueError("l_max must be >= 0")
    pref = c / np.pi
    terms = []
    for l in range(l_max + 1):
        terms.append((GAUNT, l, -(2 * l + 1) * pref))
        terms.append((SCALAR_RETARDATION, l, pref / (2 * l + 1)))
    return terms
