"""Pair equations with instantaneous Coulomb and one retarded photon.

Two-electron states are expanded in J-coupled straight products |rs; J>
of discrete Dirac orbitals, grouped in channels (kappa_1, kappa_2).  A pair
vector is a list of coefficient matrices, one per channel, indexed
[orbital of electron 1, orbital of electron 2].

The Coulomb interaction is applied without forming the pair-space matrix:
for each input channel the two-electron amplitude is mapped to the radial
grid, multiplied by the band-limited multipole kernel and projected back.

The retarded photon is handled in the separated form: a sum over photon
multipoles of products of one-electron vertices, integrated over the
photon wave number k with Gauss-Legendre nodes on a rational map and the
principal value taken by subtraction where an energy denominator
changes sign.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy.linalg import eigh

from .angular import (
    GAUNT,
    SCALAR_RETARDATION,
    alpha_angular,
    bessel_transform_matrix,
    c_reduced,
    coulomb_gauge_f_assemble,
    coulomb_kernel,
    coulomb_multipole_rme,
    coupled_two_body,
    gaunt_recoupling_phase,
)
from .errors import InvalidGrid, NoConvergence, PoleOnGrid, SingularDenominator
from .radial import C_LIGHT, SpectrumSet, kappa_to_j, kappa_to_l
from .wigner import triangle, wigner_6j

__all__ = [
    "KGrid",
    "make_kgrid",
    "TwoElectronChannel",
    "pair_channels",
    "PairBasis",
    "ModelState",
    "pair_model_state",
    "PairFunction",
    "apply_coulomb",
    "coulomb_matrix",
    "solve_coulomb_pair",
    "second_order_pair",
    "ci_energy",
    "CHARGE",
    "photon_terms",
    "vertex_components",
    "vertex_matrices",
    "one_photon_matrix_element",
    "coulomb_element",
    "gaunt_instantaneous_element",
    "model_state_element",
    "retarded_energy",
    "PhotonSector",
    "photon_sector",
    "PhotonPairFunction",
    "sector_blocks",
    "emit_photon_pair",
    "absorb_photon",
    "sector_retarded_energy",
    "correlated_photon_energy",
    "l_tail",
]

POLE_THRESHOLD = 1e-10
ZERO_DELTA = 1e-12


# ---------------------------------------------------------------- k grid

@dataclass(frozen=True, eq=False)
class KGrid:
    """Gauss-Legendre nodes t in (-1, 1) mapped to k = k0 (1 + t) / (1 - t)."""

    k: np.ndarray
    w: np.ndarray
    t: np.ndarray
    wt: np.ndarray
    k0: float
    poles: tuple = ()

    @property
    def n(self):
        return self.k.size

    def integrate(self, values):
        """Plain quadrature of node values (last axis)."""
        return np.asarray(values) @ self.w

    def t_of_k(self, k):
        k = np.asarray(k, dtype=float)
        return (k - self.k0) / (k + self.k0)

    def check_poles(self, k_poles, threshold=POLE_THRESHOLD):
        tp = self.t_of_k(np.atleast_1d(k_poles))
        gap = np.min(np.abs(tp[:, None] - self.t[None, :]), axis=1) if tp.size else tp
        bad = np.flatnonzero(gap < threshold)
        if bad.size:
            raise PoleOnGrid(f"pole at k = {np.atleast_1d(k_poles)[bad[0]]!r} coincides with a node")

    def pv(self, g_nodes, k_pole, g_pole):
        """Principal value of int_0^inf g(k) / (k_pole - k) dk.

        ``g_nodes`` has the node axis last (shape (..., n)); ``k_pole`` and
        ``g_pole`` broadcast against the leading axes.  In the mapped
        variable the integrand is G(t) / (t_p - t) with
        G = g (1 - t_p) / (1 - t); the subtraction G - G(t_p) removes the
        singularity and the remainder integrates to G(t_p) ln((1+t_p)/(1-t_p)).
        """
        g_nodes = np.asarray(g_nodes, dtype=float)
        k_pole = np.asarray(k_pole, dtype=float)
        g_pole = np.asarray(g_pole, dtype=float)
        tp = self.t_of_k(k_pole)[..., None]
        G = g_nodes * (1.0 - tp) / (1.0 - self.t)
        diff = tp - self.t
        if np.any(np.abs(diff) < POLE_THRESHOLD):
            raise PoleOnGrid("principal-value pole coincides with a quadrature node")
        body = np.sum(self.wt * (G - g_pole[..., None]) / diff, axis=-1)
        tp = tp[..., 0]
        return body + g_pole * np.log((1.0 + tp) / (1.0 - tp))

    def resolvent_integral(self, g_nodes, delta, c, g_at_pole=None):
        """int_0^inf g(k) / (delta - c k) dk for an array of ``delta``.

        ``g_nodes`` has shape delta.shape + (n,).  Where delta > 0 the
        principal value is taken and ``g_at_pole`` (same shape as delta)
        must hold g(delta / c) there.
        """
        delta = np.asarray(delta, dtype=float)
        out = np.empty(delta.shape)
        neg = delta <= 0.0
        if np.any(neg):
            out[neg] = np.sum(g_nodes[neg] * self.w / (delta[neg][:, None] - c * self.k), axis=-1)
        pos = ~neg
        if np.any(pos):
            if g_at_pole is None:
                raise ValueError("pole values required for positive denominators")
            kp = delta[pos] / c
            out[pos] = self.pv(g_nodes[pos], kp, np.asarray(g_at_pole)[pos]) / c
        return out


def make_kgrid(n_nodes: int, k0: float = 5.0, poles=()) -> KGrid:
    """Mapped Gauss-Legendre grid on [0, inf).

    ``poles`` lists k values where an integrand denominator vanishes; they
    are only checked against the nodes here (the subtraction itself is done
    by :meth:`KGrid.pv`).
    """
    if not isinstance(n_nodes, (int, np.integer)) or n_nodes < 20:
        raise InvalidGrid(f"need at least 20 k nodes, got {n_nodes!r}")
    if not k0 > 0:
        raise InvalidGrid("k0 must be positive")
    t, wt = np.polynomial.legendre.leggauss(int(n_nodes))
    k = k0 * (1.0 + t) / (1.0 - t)
    w = wt * 2.0 * k0 / (1.0 - t) ** 2
    grid = KGrid(k, w, t, wt, float(k0), tuple(float(p) for p in poles))
    if poles:
        grid.check_poles(np.asarray(poles, dtype=float))
    return grid


# ---------------------------------------------------------------- channels and basis

@dataclass(frozen=True)
class TwoElectronChannel:
    kappa1: int
    kappa2: int
    J: int

    def __post_init__(self):
        if not triangle(kappa_to_j(self.kappa1), kappa_to_j(self.kappa2), self.J):
            raise ValueError(f"j1, j2, J = {self.j1}, {self.j2}, {self.J} violate the triangle rule")

    @property
    def j1(self):
        return kappa_to_j(self.kappa1)

    @property
    def j2(self):
        return kappa_to_j(self.kappa2)

    @property
    def parity(self):
        return (-1) ** (kappa_to_l(self.kappa1) + kappa_to_l(self.kappa2))

    @property
    def exchange_phase(self):
        """P12 |rs; J> = exchange_phase |sr; J>."""
        return -1.0 if int(round(self.j1 + self.j2 - self.J)) % 2 else 1.0

    def swapped(self):
        return TwoElectronChannel(self.kappa2, self.kappa1, self.J)


def kappas_up_to(l_max: int):
    out = []
    for l in range(l_max + 1):
        if l > 0:
            out.append(l)
        out.append(-l - 1)
    return sorted(out, key=lambda k: (kappa_to_l(k), abs(k)))


def pair_channels(J: int, parity: int, kappas):
    """All ordered (kappa_1, kappa_2) couplings to J with the given parity."""
    out = []
    for k1 in kappas:
        for k2 in kappas:
            if (-1) ** (kappa_to_l(k1) + kappa_to_l(k2)) != parity:
                continue
            if triangle(kappa_to_j(k1), kappa_to_j(k2), J):
                out.append(TwoElectronChannel(k1, k2, J))
    return out


class PairBasis:
    """Discrete pair space for one (J, parity) block.

    ``n_orbitals`` limits each kappa to its lowest positive-energy states
    (None keeps all of them).  Negative-energy states are excluded unless
    the spectrum was built with them and ``include_negative`` is set.
    """

    def __init__(self, spectrum: SpectrumSet, J: int, parity: int, l_max: int = None,
                 n_orbitals: int = None, include_negative: bool = False, kappas=None):
        self.spectrum = spectrum
        self.grid = spectrum.grid
        self.c = spectrum.c
        self.J = int(J)
        self.parity = int(parity)
        if kappas is None:
            kappas = [k for k in spectrum if l_max is None or kappa_to_l(k) <= l_max]
        self.kappas = [k for k in kappas_up_to(max(kappa_to_l(k) for k in kappas)) if k in kappas]
        self.orbitals = {}
        for k in self.kappas:
            s = spectrum[k]
            mask = np.ones(len(s), bool) if include_negative else s.positive.copy()
            idx = np.flatnonzero(mask)
            # positive states first in energy order, then the negative branch
            order = np.argsort(np.where(s.positive[idx], 0, 1) * 1e300 + s.energies[idx])
            idx = idx[order]
            if n_orbitals is not None:
                idx = idx[:n_orbitals]
            self.orbitals[k] = s.select(idx)
        self.channels = pair_channels(self.J, self.parity, self.kappas)
        if not self.channels:
            raise ValueError(f"no channels for J={J}, parity={parity}")
        self._index = {(ch.kappa1, ch.kappa2): i for i, ch in enumerate(self.channels)}

    # -- layout
    def channel_index(self, kappa1, kappa2):
        return self._index[(kappa1, kappa2)]

    def shape(self, i):
        ch = self.channels[i]
        return (len(self.orbitals[ch.kappa1]), len(self.orbitals[ch.kappa2]))

    @property
    def dimension(self):
        return sum(a * b for a, b in (self.shape(i) for i in range(len(self.channels))))

    def zeros(self):
        return [np.zeros(self.shape(i)) for i in range(len(self.channels))]

    def pair_energies(self, i):
        ch = self.channels[i]
        return (self.orbitals[ch.kappa1].energies[:, None]
                + self.orbitals[ch.kappa2].energies[None, :])

    def flatten(self, vec):
        return np.concatenate([v.ravel() for v in vec])

    def unflatten(self, flat):
        out, pos = [], 0
        for i in range(len(self.channels)):
            a, b = self.shape(i)
            out.append(np.asarray(flat[pos:pos + a * b]).reshape(a, b))
            pos += a * b
        return out

    def find(self, kappa, n):
        """Index of the bound state (n, kappa) within the kept orbitals."""
        s = self.orbitals[kappa]
        i = n - kappa_to_l(kappa) - 1
        hits = np.flatnonzero(s.positive & (s.index == i))
        if hits.size != 1:
            raise KeyError(f"state n={n}, kappa={kappa} not in basis")
        return int(hits[0])

    # -- radial data
    @cached_property
    def radial(self):
        """kappa -> (n, 2N) array [F, Q] on the large nodes."""
        g = self.grid
        return {k: np.hstack([s.F, g.small_to_large(s.G)]) for k, s in self.orbitals.items()}

    def kernel(self, L):
        cache = self.__dict__.setdefault("_kernels", {})
        if L not in cache:
            sr = np.sqrt(self.grid.r)
            K = sr[:, None] * coulomb_kernel(self.grid, L) * sr[None, :]
            cache[L] = np.tile(K, (2, 2))
        return cache[L]

    @cached_property
    def coulomb_couplings(self):
        """(out channel, in channel) -> list of (L, angular factor)."""
        out = {}
        J = self.J
        for o, cho in enumerate(self.channels):
            for i, chi in enumerate(self.channels):
                terms = []
                lo = max(abs(kappa_to_l(cho.kappa1) - kappa_to_l(chi.kappa1)),
                         abs(kappa_to_l(cho.kappa2) - kappa_to_l(chi.kappa2)))
                hi = min(kappa_to_l(cho.kappa1) + kappa_to_l(chi.kappa1),
                         kappa_to_l(cho.kappa2) + kappa_to_l(chi.kappa2)) + 1
                for L in range(lo, hi + 1):
                    a = (coupled_two_body(cho.j1, cho.j2, chi.j1, chi.j2, J, L)
                         * c_reduced(cho.kappa1, L, chi.kappa1)
                         * c_reduced(cho.kappa2, L, chi.kappa2))
                    if a != 0.0:
                        terms.append((L, a))
                if terms:
                    out[o, i] = terms
        return out

    def swap(self, vec):
        """P12 acting on a pair vector."""
        out = self.zeros()
        for i, ch in enumerate(self.channels):
            j = self.channel_index(ch.kappa2, ch.kappa1)
            out[j] = ch.exchange_phase * vec[i].T
        return out


def vdot(a, b):
    return float(sum(np.sum(x * y) for x, y in zip(a, b)))


def vnorm_max(a):
    return max((float(np.max(np.abs(x))) if x.size else 0.0) for x in a)


# ---------------------------------------------------------------- model states

@dataclass(frozen=True)
class ModelState:
    """Antisymmetrized reference state as a combination of basis pairs.

    ``components`` holds (channel index, i, j, coefficient).
    """

    label: str
    components: tuple
    energy: float

    def vector(self, basis: PairBasis):
        vec = basis.zeros()
        for ch, i, j, coef in self.components:
            vec[ch][i, j] += coef
        return vec

    def q_mask(self, basis: PairBasis):
        mask = [np.ones(basis.shape(i), bool) for i in range(len(basis.channels))]
        for ch, i, j, _ in self.components:
            mask[ch][i, j] = False
        return mask


_SPD = "spdfghik"


def _orbital_label(n, kappa):
    l = kappa_to_l(kappa)
    return f"{n}{_SPD[l]}{int(2 * kappa_to_j(kappa))}/2"


def pair_model_state(basis: PairBasis, a, b) -> ModelState:
    """Antisymmetrized |ab; J> for bound orbitals a = (n, kappa), b = (n, kappa)."""
    (na, ka), (nb, kb) = a, b
    ia, ib = basis.find(ka, na), basis.find(kb, nb)
    ch = basis.channel_index(ka, kb)
    E0 = float(basis.orbitals[ka].energies[ia] + basis.orbitals[kb].energies[ib])
    label = f"{_orbital_label(na, ka)} {_orbital_label(nb, kb)} J={basis.J}"
    eta = basis.channels[ch].exchange_phase
    if (na, ka) == (nb, kb):
        if eta != -1.0:
            raise ValueError(f"{label} is forbidden by the Pauli principle")
        return ModelState(label, ((ch, ia, ib, 1.0),), E0)
    chs = basis.channel_index(kb, ka)
    s = 1.0 / np.sqrt(2.0)
    return ModelState(label, ((ch, ia, ib, s), (chs, ib, ia, -eta * s)), E0)


# ---------------------------------------------------------------- Coulomb

def apply_coulomb(basis: PairBasis, vec, scale=1.0):
    """V12 acting on a pair vector (all multipoles, band-limited kernel)."""
    X = basis.radial
    phis = {}
    for i, ch in enumerate(basis.channels):
        S = vec[i]
        if not np.any(S):
            continue
        phis[i] = X[ch.kappa1].T @ S @ X[ch.kappa2]
    out = basis.zeros()
    if not phis:
        return out
    for o, cho in enumerate(basis.channels):
        M = None
        for i, phi in phis.items():
            for L, a in basis.coulomb_couplings.get((o, i), ()):
                term = a * basis.kernel(L) * phi
                M = term if M is None else M + term
        if M is not None:
            out[o] = scale * (X[cho.kappa1] @ M @ X[cho.kappa2].T)
    return out


def coulomb_matrix(basis: PairBasis):
    """Dense pair-space Coulomb matrix (small bases only)."""
    g = basis.grid
    sr = np.sqrt(g.r)
    dens = {}

    def density(k1, k2):
        if (k1, k2) not in dens:
            a, b = basis.radial[k1], basis.radial[k2]
            N = g.n
            d = (a[:, None, :N] * b[None, :, :N] + a[:, None, N:] * b[None, :, N:]) * sr
            dens[k1, k2] = d.reshape(-1, N)
        return dens[k1, k2]

    sizes = [basis.shape(i) for i in range(len(basis.channels))]
    offs = np.concatenate([[0], np.cumsum([a * b for a, b in sizes])])
    V = np.zeros((offs[-1], offs[-1]))
    for (o, i), terms in basis.coulomb_couplings.items():
        cho, chi = basis.channels[o], basis.channels[i]
        (nr, ns), (nt, nu) = sizes[o], sizes[i]
        d1 = density(cho.kappa1, chi.kappa1)  # (r t, grid)
        d2 = density(cho.kappa2, chi.kappa2)  # (s u, grid)
        block = np.zeros((nr, nt, ns, nu))
        for L, a in terms:
            K = coulomb_kernel(g, L)
            block += a * (d1 @ K @ d2.T).reshape(nr, nt, ns, nu)
        V[offs[o]:offs[o + 1], offs[i]:offs[i + 1]] = block.transpose(0, 2, 1, 3).reshape(
            nr * ns, nt * nu)
    return V


# ---------------------------------------------------------------- Coulomb pair equation

@dataclass(eq=False)
class PairFunction:
    """rho = Psi_0 + chi with chi in Q space (intermediate normalization)."""

    basis: PairBasis
    model: ModelState
    chi: list
    veff: float
    iterations: int = 0
    residual: float = 0.0
    scale: float = 1.0
    history: list = field(default_factory=list)

    @property
    def energy0(self):
        return self.model.energy

    @property
    def energy(self):
        """Total two-electron energy E_0 + V_eff (Hartree, rest mass removed)."""
        return self.model.energy + self.veff

    @property
    def rho(self):
        psi0 = self.model.vector(self.basis)
        return [p + x for p, x in zip(psi0, self.chi)]

    @property
    def norm2(self):
        return vdot(self.rho, self.rho)


def _denominators(basis, model: ModelState, E=None, threshold=1e-10):
    E = model.energy if E is None else E
    mask = model.q_mask(basis)
    out = []
    for i in range(len(basis.channels)):
        den = E - basis.pair_energies(i)
        bad = mask[i] & (np.abs(den) < threshold)
        if np.any(bad):
            r, s = np.argwhere(bad)[0]
            raise SingularDenominator(
                f"Q-space pair ({r}, {s}) in channel {basis.channels[i]} is degenerate with E")
        inv = np.zeros_like(den)
        inv[mask[i]] = 1.0 / den[mask[i]]
        out.append(inv)
    return out


def second_order_pair(basis: PairBasis, model: ModelState, scale=1.0):
    """First iterate: chi = Gamma_Q V12 Psi_0 (and its energy <Psi_0|V Psi_0>)."""
    psi0 = model.vector(basis)
    D = _denominators(basis, model)
    v = apply_coulomb(basis, psi0, scale)
    return [d * x for d, x in zip(D, v)], vdot(psi0, v)


def solve_coulomb_pair(basis: PairBasis, model: ModelState, scale=1.0, tol=1e-10,
                       max_iter=500, damping=None):
    """All-order Coulomb pair equation with the fold term.

    Iterates chi <- Gamma_Q [V12 (Psi_0 + chi) - chi V_eff] with
    V_eff = <Psi_0 | V12 | Psi_0 + chi>, the model state being normalized.
    The update is accelerated by DIIS on the last few iterates; ``damping``
    mixes a fraction of the new iterate instead (plain relaxation).
    """
    psi0 = model.vector(basis)
    D = _denominators(basis, model)
    chi = basis.zeros()
    hist_x, hist_r = [], []
    history = []
    veff = 0.0
    for it in range(1, max_iter + 1):
        rho = [p + x for p, x in zip(psi0, chi)]
        vrho = apply_coulomb(basis, rho, scale)
        veff = vdot(psi0, vrho)
        new = [d * (v - x * veff) for d, v, x in zip(D, vrho, chi)]
        res = max(vnorm_max([a - b for a, b in zip(new, chi)]), 0.0)
        history.append(res)
        if not np.isfinite(res):
            raise NoConvergence(it, res, "Coulomb pair equation")
        if res < tol:
            chi = new
            rho = [p + x for p, x in zip(psi0, chi)]
            veff = vdot(psi0, apply_coulomb(basis, rho, scale))
            return PairFunction(basis, model, chi, veff, it, res, scale, history)
        if damping is not None:
            chi = [x + damping * (n - x) for x, n in zip(chi, new)]
            continue
        # DIIS extrapolation on flattened iterates
        hist_x.append(basis.flatten(new))
        hist_r.append(basis.flatten(new) - basis.flatten(chi))
        if len(hist_x) > 8:
            hist_x.pop(0)
            hist_r.pop(0)
        m = len(hist_x)
        if m >= 2:
            B = np.empty((m + 1, m + 1))
            B[:m, :m] = np.array([[a @ b for b in hist_r] for a in hist_r])
            B[m, :] = -1.0
            B[:, m] = -1.0
            B[m, m] = 0.0
            rhs = np.zeros(m + 1)
            rhs[m] = -1.0
            try:
                coef = np.linalg.solve(B, rhs)[:m]
                chi = basis.unflatten(sum(c * x for c, x in zip(coef, hist_x)))
                continue
            except np.linalg.LinAlgError:
                hist_x, hist_r = hist_x[-1:], hist_r[-1:]
        chi = new
    raise NoConvergence(max_iter, history[-1], "Coulomb pair equation")


def ci_energy(basis: PairBasis, model: ModelState, scale=1.0, reference=None, n_states=40):
    """Configuration-interaction eigenvalue in the same pair basis.

    Diagonalizes diag(e_r + e_s) + V12 and returns the eigenvalue whose
    eigenvector overlaps most with ``reference`` (a pair vector; the model
    state by default), together with that overlap.  Only the lowest
    ``n_states`` eigenpairs are computed (None for all).
    """
    H = scale * coulomb_matrix(basis)
    H[np.diag_indices_from(H)] += basis.flatten(
        [basis.pair_energies(i) for i in range(len(basis.channels))])
    if n_states is None or n_states >= H.shape[0]:
        e, v = np.linalg.eigh(H)
    else:
        e, v = eigh(H, subset_by_index=(0, n_states - 1), driver="evr")
    ref = basis.flatten(reference if reference is not None else model.vector(basis))
    ov = np.abs(v.T @ ref) / np.linalg.norm(ref)
    j = int(np.argmax(ov))
    return float(e[j]), float(ov[j])


# ---------------------------------------------------------------- photon vertices

CHARGE = "Charge"


def operator_parity(kind, l):
    """Parity of the one-electron vertex (alpha flips P <-> Q)."""
    if kind == GAUNT:
        return (-1) ** (l + 1)
    return (-1) ** l


def vertex_components(kind, l, L, kappa_a, kappa_b):
    """Radial pieces (Bessel order, c_PQ, c_QP, c_dens) of a one-electron vertex.

    Gaunt: the rank-L part {C^l sigma}^L of alpha j_l C^l.  Scalar
    retardation: the rank-l tensor with j_{l+1} and j_{l-1} pieces (L must
    equal l).  Charge: j_l C^l (L = l), used for the Feynman gauge.  The
    element is sum_pieces int j_lc(kr) (c_PQ P_a Q_b - c_QP Q_a P_b
    + c_dens (P_a P_b + Q_a Q_b)) dr, real-stripped for the alpha kinds.
    """
    out = []
    if kind == GAUNT:
        a_pq, a_qp = alpha_angular(kappa_a, l, L, kappa_b)
        if a_pq or a_qp:
            out.append((l, a_pq, a_qp, 0.0))
    elif kind == SCALAR_RETARDATION:
        if L != l:
            return out
        for lc, coef in ((l + 1, np.sqrt((l + 1) * (2 * l + 3))),
                         (l - 1, np.sqrt(l * (2 * l - 1)) if l >= 1 else 0.0)):
            if coef == 0.0:
                continue
            a_pq, a_qp = alpha_angular(kappa_a, lc, l, kappa_b)
            if a_pq or a_qp:
                out.append((lc, coef * a_pq, coef * a_qp, 0.0))
    elif kind == CHARGE:
        if L != l:
            return out
        cd = c_reduced(kappa_a, l, kappa_b)
        if cd:
            out.append((l, 0.0, 0.0, cd))
    else:
        raise ValueError(f"unknown photon kind {kind!r}")
    return out


def photon_terms(l_max, kinds=(GAUNT, SCALAR_RETARDATION), c=C_LIGHT):
    """(kind, l, L, weight) for the separated one-photon interaction.

    The k integrand of <..|V|..> is weight * k * (vertex 1)(vertex 2) times
    the energy denominators.  Gaunt and scalar-retardation weights come
    from :func:`coulomb_gauge_f_assemble` (Gaunt with its recoupling
    phase); the charge photon of the Feynman gauge has weight
    -(2l+1) c/pi on the unstripped density product.
    """
    out = []
    for kind, l, w in coulomb_gauge_f_assemble(l_max, c):
        if kind not in kinds:
            continue
        if kind == GAUNT:
            for L in (l - 1, l, l + 1):
                if L >= 0 and triangle(l, 1, L):
                    out.append((kind, l, L, w * gaunt_recoupling_phase(l, L)))
        else:
            out.append((kind, l, l, w))
    if CHARGE in kinds:
        for l in range(l_max + 1):
            out.append((CHARGE, l, l, -(2 * l + 1) * c / np.pi))
    return out


def _large_small(grid, orb):
    return orb.F, grid.small_to_large(orb.G)


def vertex_matrices(grid, orb_a, orb_b, comps, k):
    """Vertex elements <a||V(k)||b> for all a in ``orb_a`` and b in
    ``orb_b`` (KappaSpectrum objects): array (len(k), n_a, n_b)."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    Fa, Qa = _large_small(grid, orb_a)
    Fb, Qb = _large_small(grid, orb_b)
    sr = np.sqrt(grid.r)
    out = np.zeros((k.size, len(orb_a), len(orb_b)))
    for lc, cpq, cqp, cd in comps:
        v = bessel_transform_matrix(lc, k, grid) * sr  # (nk, N)
        if cpq:
            out += cpq * np.matmul(Fa[None, :, :] * v[:, None, :], Qb.T)
        if cqp:
            out -= cqp * np.matmul(Qa[None, :, :] * v[:, None, :], Fb.T)
        if cd:
            out += cd * (np.matmul(Fa[None, :, :] * v[:, None, :], Fb.T)
                         + np.matmul(Qa[None, :, :] * v[:, None, :], Qb.T))
    return out


def _orbital_vertex(grid, a, b, comps, k):
    """Vertex element between two single orbitals for an array of k."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    Qa = grid.small_to_large(a.G)
    Qb = grid.small_to_large(b.G)
    sr = np.sqrt(grid.r)
    out = np.zeros(k.size)
    for lc, cpq, cqp, cd in comps:
        dens = (cpq * a.F * Qb - cqp * Qa * b.F + cd * (a.F * b.F + Qa * Qb)) * sr
        out += bessel_transform_matrix(lc, k, grid) @ dens
    return out


@lru_cache(maxsize=4096)
def _cached_vertex(grid, orb_a, orb_b, kind, l, L, k_bytes):
    comps = vertex_components(kind, l, L, orb_a.kappa, orb_b.kappa)
    if not comps:
        return None
    out = vertex_matrices(grid, orb_a, orb_b, comps, np.frombuffer(k_bytes))
    out.flags.writeable = False
    return out


class _VertexCache:
    """Vertex matrices between two orbital sets (dicts kappa -> KappaSpectrum)."""

    def __init__(self, grid, rows, cols):
        self.grid = grid
        self.rows = rows
        self.cols = cols

    def get(self, kind, l, L, kappa_a, kappa_b, k, key=None):
        if kappa_a not in self.rows or kappa_b not in self.cols:
            return None
        k = np.ascontiguousarray(np.atleast_1d(np.asarray(k, dtype=float)))
        return _cached_vertex(self.grid, self.rows[kappa_a], self.cols[kappa_b], kind, l, L,
                              k.tobytes())


# ---------------------------------------------------------------- one-photon elements

def _pv_or_plain(kgrid, g_nodes, delta, c, g_pole_func):
    delta = float(delta)
    if delta <= ZERO_DELTA:
        # a pole closer to k = 0 than ZERO_DELTA is rounding noise of an
        # on-shell denominator; the integrand vanishes there
        delta = min(delta, 0.0)
        return float(np.sum(kgrid.w * g_nodes / (delta - c * kgrid.k)))
    kp = delta / c
    kgrid.check_poles([kp])
    return float(kgrid.pv(g_nodes, kp, g_pole_func(np.array([kp]))[0]) / c)


def one_photon_matrix_element(r, s, t, u, J, E, grid, kgrid: KGrid, l_max: int,
                              gauge="coulomb", kinds=None, c=C_LIGHT,
                              denominators="retarded"):
    """<rs; J| V_1(E) |tu; J> for four orbitals (Hartree, straight products).

    Both time orderings are included: electron 1 emits first with
    intermediate pair (r, u), or electron 2 emits first with (t, s).
    Coulomb gauge gives the retarded transverse photon (``kinds`` selects
    Gaunt and/or scalar retardation; the instantaneous Coulomb part is
    :func:`coulomb_element`).  Feynman gauge gives the charge photon plus
    the Gaunt part.  With ``denominators="instantaneous"`` both
    denominators are replaced by -1/(c k), the unretarded limit.
    """
    if kinds is None:
        kinds = (GAUNT, SCALAR_RETARDATION) if gauge == "coulomb" else (CHARGE, GAUNT)
    if gauge == "coulomb" and CHARGE in kinds:
        raise ValueError("the charge photon belongs to the Feynman gauge")
    if gauge not in ("coulomb", "feynman"):
        raise ValueError(f"unknown gauge {gauge!r}")
    total = 0.0
    for kind, l, L, weight in photon_terms(l_max, kinds, c):
        ang = coupled_two_body(r.j, s.j, t.j, u.j, J, L)
        if ang == 0.0:
            continue
        c1 = vertex_components(kind, l, L, r.kappa, t.kappa)
        c2 = vertex_components(kind, l, L, s.kappa, u.kappa)
        if not (c1 and c2):
            continue

        def g(k, c1=c1, c2=c2):
            return weight * ang * k * _orbital_vertex(grid, r, t, c1, k) * _orbital_vertex(
                grid, s, u, c2, k)

        gk = g(kgrid.k)
        if denominators == "instantaneous":
            total += float(np.sum(kgrid.w * gk * (-2.0 / (c * kgrid.k))))
            continue
        total += _pv_or_plain(kgrid, gk, E - r.energy - u.energy, c, g)
        total += _pv_or_plain(kgrid, gk, E - s.energy - t.energy, c, g)
    return total


def coulomb_element(r, s, t, u, J, grid, l_max=None):
    """<rs; J| 1/r12 |tu; J> for four orbitals (straight products)."""
    lo = max(abs(r.l - t.l), abs(s.l - u.l))
    hi = min(r.l + t.l, s.l + u.l) + 1
    if l_max is not None:
        hi = min(hi, l_max)
    total = 0.0
    for L in range(lo, hi + 1):
        ang = coupled_two_body(r.j, s.j, t.j, u.j, J, L)
        if ang:
            total += ang * coulomb_multipole_rme(r, t, s, u, L, grid)
    return total


def gaunt_instantaneous_element(r, s, t, u, J, grid, l_max):
    """<rs; J| -alpha_1.alpha_2 / r12 |tu; J> from the multipole kernel."""
    sr = np.sqrt(grid.r)
    total = 0.0
    for kind, l, L, weight in photon_terms(l_max, (GAUNT,)):
        ang = coupled_two_body(r.j, s.j, t.j, u.j, J, L)
        c1 = vertex_components(kind, l, L, r.kappa, t.kappa)
        c2 = vertex_components(kind, l, L, s.kappa, u.kappa)
        if not (ang and c1 and c2):
            continue
        g1 = sum(_stripped_density(grid, r, t, comp) for comp in c1) * sr
        g2 = sum(_stripped_density(grid, s, u, comp) for comp in c2) * sr
        # -alpha.alpha / r12 = -sum_l (alpha.alpha)(C^l.C^l) r_<^l / r_>^(l+1);
        # a stripped product carries i*i = -1, so the sign flips back
        total += gaunt_recoupling_phase(l, L) * ang * float(g1 @ coulomb_kernel(grid, l) @ g2)
    return total


def _stripped_density(grid, a, b, comp):
    lc, cpq, cqp, cd = comp
    Qa = grid.small_to_large(a.G)
    Qb = grid.small_to_large(b.G)
    return cpq * a.F * Qb - cqp * Qa * b.F + cd * (a.F * b.F + Qa * Qb)


def model_state_element(element, basis_orbitals, model_bra, model_ket, **kwargs):
    """Combine a straight-product element function over model-state components.

    ``element(r, s, t, u, **kwargs)`` is called for every pair of components;
    ``basis_orbitals`` maps (channel index, i, j) to the orbital pair.
    """
    total = 0.0
    for chb, i, j, cb in model_bra.components:
        r, s = basis_orbitals(chb, i, j)
        for chk, p, q, ck in model_ket.components:
            t, u = basis_orbitals(chk, p, q)
            total += cb * ck * element(r, s, t, u, **kwargs)
    return total


# ---------------------------------------------------------------- correlated retarded energy

def retarded_energy(basis: PairBasis, bra, ket, E, kgrid: KGrid, l_max: int,
                    kinds=(GAUNT, SCALAR_RETARDATION), by_term=False):
    """<bra| V_ret(E) |ket> for pair vectors in ``basis`` (Hartree).

    Both time orderings are included; the photon is emitted and absorbed by
    different electrons with no Coulomb interaction while it is in flight
    (the intermediate pair is made of the bra orbital of the electron that
    has emitted and the ket orbital of the other one).  Denominators
    E - e_r - e_u - c k that change sign on the k axis are integrated as
    principal values.  With ``by_term`` a dict keyed by (kind, l) is
    returned as well.
    """
    terms = photon_terms(l_max, kinds, basis.c)
    total = 0.0
    parts = {}
    for order in (0, 1):
        b = bra if order == 0 else basis.swap(bra)
        kt = ket if order == 0 else basis.swap(ket)
        res = _ordering_one(basis, terms, b, kt, E, kgrid)
        for key, val in res.items():
            parts[key] = parts.get(key, 0.0) + val
            total += val
    return (total, parts) if by_term else total


def _ordering_one(basis, terms, bra, ket, E, kgrid):
    """Electron 1 emits first: intermediate pair (r, u) plus the photon.

    A_ru(k) = sum_{s,t} bra_rs ket_tu <r||V||t>(k) <s||V||u>(k) times the
    coupling 6j factor; returns {(kind, l): energy}.
    """
    J = basis.J
    chans = basis.channels
    nz_bra = [i for i in range(len(chans)) if np.any(bra[i])]
    nz_ket = [i for i in range(len(chans)) if np.any(ket[i])]
    cache = _VertexCache(basis.grid, basis.orbitals, basis.orbitals)
    out = {}
    for kind, l, L, weight in terms:
        acc = {}
        for ib in nz_bra:
            chb = chans[ib]
            for ik in nz_ket:
                chk = chans[ik]
                ang = coupled_two_body(chb.j1, chb.j2, chk.j1, chk.j2, J, L)
                if ang == 0.0:
                    continue
                if not (vertex_components(kind, l, L, chb.kappa1, chk.kappa1)
                        and vertex_components(kind, l, L, chb.kappa2, chk.kappa2)):
                    continue
                acc.setdefault((chb.kappa1, chk.kappa2), []).append((ib, ik, ang))
        value = 0.0
        for (kr, ku), contribs in acc.items():
            value += _ru_block(basis, cache, kind, l, L, kr, ku, contribs, bra, ket, E, kgrid)
        out[(kind, l)] = out.get((kind, l), 0.0) + weight * value
    return out


def _ru_block(basis, cache, kind, l, L, kr, ku, contribs, bra, ket, E, kgrid):
    c = basis.c
    er = basis.orbitals[kr].energies
    eu = basis.orbitals[ku].energies
    delta = E - er[:, None] - eu[None, :]

    def amplitude(k, key):
        A = None
        for ib, ik, ang in contribs:
            chb, chk = basis.channels[ib], basis.channels[ik]
            T1 = cache.get(kind, l, L, kr, chk.kappa1, k, key)   # (nk, r, t)
            T2 = cache.get(kind, l, L, chb.kappa2, ku, k, key)   # (nk, s, u)
            X = np.matmul(bra[ib][None], T2)                      # (nk, r, u)
            Y = np.matmul(T1, ket[ik][None])                      # (nk, r, u)
            term = ang * X * Y
            A = term if A is None else A + term
        return A * k[:, None, None]

    return _resolvent_sum(kgrid, amplitude, delta, c)


def _resolvent_sum(kgrid, amplitude, delta, c, zero_tol=ZERO_DELTA):
    """sum_n int g_n(k) / (delta_n - c k) dk where ``amplitude(k, key)``
    returns g with a leading k axis and trailing axes matching delta."""
    g = np.moveaxis(amplitude(kgrid.k, "nodes"), 0, -1)
    delta = np.where(np.abs(delta) < zero_tol, 0.0, delta)
    pos = delta > 0
    g_pole = np.zeros_like(delta)
    if np.any(pos):
        idx = np.nonzero(pos)
        kp = delta[pos] / c
        kgrid.check_poles(kp)
        gp = amplitude(kp, ("poles", kp.tobytes()))
        g_pole[idx] = gp[(np.arange(kp.size),) + idx]
    return float(np.sum(kgrid.resolvent_integral(g, delta, c, g_pole)))


# ---------------------------------------------------------------- photonic pair functions

@dataclass(eq=False)
class PhotonSector:
    """Two-electron states accessible while a photon is in flight.

    One (J', parity') block in a pair basis.  With ``crossing`` the
    Coulomb interaction acts in the block: H = h0 + h0 + V12 is
    diagonalized and ``energies``/``vectors`` hold its spectrum.  Without
    it the block is diagonal in the pair basis.
    """

    basis: PairBasis
    crossing: bool
    energies: np.ndarray
    vectors: np.ndarray = None

    def project(self, flat):
        """Components of pair-basis vectors (last axis) on the eigenstates."""
        return flat if self.vectors is None else flat @ self.vectors

    def expand(self, coeffs):
        return coeffs if self.vectors is None else coeffs @ self.vectors.T


def photon_sector(basis: PairBasis, crossing=True, scale=1.0):
    flat_e = basis.flatten([basis.pair_energies(i) for i in range(len(basis.channels))])
    if not crossing:
        return PhotonSector(basis, False, flat_e, None)
    H = scale * coulomb_matrix(basis)
    H[np.diag_indices_from(H)] += flat_e
    e, v = np.linalg.eigh(H)
    return PhotonSector(basis, True, e, v)


@dataclass(eq=False)
class PhotonPairFunction:
    """Pair function with one photon of wave number k in flight.

    Photon emitted by electron 1 with vertex (kind, l, L) from the pair
    function ``source``; the two-electron part is coupled to ``J``' in
    ``sector``.  ``numerators`` holds <n| V(k) |rho> on the sector states n
    for each k (shape (nk, dim)); the coefficients of the photonic pair
    function are numerators / (E - E_n - c k).
    """

    kind: str
    l: int
    L: int
    k: np.ndarray
    energy: float
    sector: PhotonSector
    numerators: np.ndarray
    k_index: np.ndarray = None

    def denominators(self):
        c = self.sector.basis.c
        return self.energy - self.sector.energies[None, :] - c * self.k[:, None]

    def coefficients(self, threshold=POLE_THRESHOLD):
        """Pair-basis coefficients at each k (nk, dim)."""
        den = self.denominators()
        if np.any(np.abs(den) < threshold):
            raise PoleOnGrid("photonic pair function evaluated on a pole")
        return self.sector.expand(self.numerators / den)


def _emission_source(pf_basis, rho, sector_basis, kind, l, L, k):
    """<rs; J'|| T^L(1) ||rho; J> on the sector basis, one array (nk, dim)."""
    J, Jp = pf_basis.J, sector_basis.J
    nk = np.atleast_1d(k).size
    out = []
    cache = _VertexCache(pf_basis.grid, sector_basis.orbitals, pf_basis.orbitals)
    for ch in sector_basis.channels:
        acc = np.zeros((nk,) + (len(sector_basis.orbitals[ch.kappa1]),
                                len(sector_basis.orbitals[ch.kappa2])))
        for i, chi in enumerate(pf_basis.channels):
            if not np.any(rho[i]):
                continue
            if chi.kappa2 != ch.kappa2:
                continue
            f = (_phase(ch.j1 + ch.j2 + J + L) * np.sqrt((2 * J + 1) * (2 * Jp + 1))
                 * wigner_6j(ch.j1, Jp, ch.j2, J, chi.j1, L))
            T = cache.get(kind, l, L, ch.kappa1, chi.kappa1, k, "src") if f else None
            if T is None:
                continue
            spec = _restrict_cols(rho[i], pf_basis, sector_basis, ch.kappa2)
            acc += f * np.matmul(T, spec[None])
        out.append(acc.reshape(nk, -1))
    return np.concatenate(out, axis=1)


def _absorption_source(pf_basis, rho, sector_basis, kind, l, L, k):
    """<rho; J|| U^L(2) ||rs; J'> on the sector basis (nk, dim)."""
    J, Jp = pf_basis.J, sector_basis.J
    nk = np.atleast_1d(k).size
    out = []
    cache = _VertexCache(pf_basis.grid, pf_basis.orbitals, sector_basis.orbitals)
    for ch in sector_basis.channels:
        acc = np.zeros((nk,) + (len(sector_basis.orbitals[ch.kappa1]),
                                len(sector_basis.orbitals[ch.kappa2])))
        for i, chi in enumerate(pf_basis.channels):
            if chi.kappa1 != ch.kappa1 or not np.any(rho[i]):
                continue
            f = (_phase(ch.j1 + ch.j2 + J + L) * np.sqrt((2 * J + 1) * (2 * Jp + 1))
                 * wigner_6j(chi.j2, J, ch.j1, Jp, ch.j2, L))
            U = cache.get(kind, l, L, chi.kappa2, ch.kappa2, k, "abs") if f else None
            if U is None:
                continue
            spec = _restrict_rows(rho[i], pf_basis, sector_basis, ch.kappa1)
            acc += f * np.matmul(spec[None], U)
        out.append(acc.reshape(nk, -1))
    return np.concatenate(out, axis=1)


def _phase(x):
    return -1.0 if int(round(x)) % 2 else 1.0


def _map_states(src, dst):
    """For each state of ``dst`` its index in ``src`` (-1 when absent)."""
    lookup = {(bool(p), int(i)): j for j, (p, i) in enumerate(zip(src.positive, src.index))}
    return np.array([lookup.get((bool(p), int(i)), -1) for p, i in zip(dst.positive, dst.index)],
                    dtype=int)


def _restrict_cols(S, pf_basis, sector_basis, kappa):
    """Columns of S (orbitals of ``kappa`` in the pair basis) re-indexed to
    the sector orbitals; sector orbitals outside the pair basis get zeros."""
    if kappa not in pf_basis.orbitals:
        return np.zeros((S.shape[0], len(sector_basis.orbitals[kappa])))
    idx = _map_states(pf_basis.orbitals[kappa], sector_basis.orbitals[kappa])
    out = np.zeros((S.shape[0], idx.size))
    ok = idx >= 0
    out[:, ok] = S[:, idx[ok]]
    return out


def _restrict_rows(S, pf_basis, sector_basis, kappa):
    return _restrict_cols(S.T, pf_basis, sector_basis, kappa).T


def sector_blocks(pf_basis: PairBasis, kind, l, L):
    """(J', parity') blocks reached from the pair basis by a rank-L vertex."""
    par = pf_basis.parity * operator_parity(kind, l)
    return [(Jp, par) for Jp in range(abs(pf_basis.J - L), pf_basis.J + L + 1)]


def emit_photon_pair(pf: PairFunction, kind, l, L, k, sector: PhotonSector,
                     energy=None) -> PhotonPairFunction:
    """Photon emission by electron 1 from a Coulomb pair function.

    Solves (E - h0 - h0 - c k [- V12]) rho^+(k) = V^{l,L}(k) rho for the
    sector block, with E the correlated energy of ``pf`` (the fold term of
    the photonic pair equation shifts E_0 to E_0 + V_eff for a
    one-dimensional model space).  The Coulomb term is present when the
    sector was built with ``crossing``; the solution is expressed on the
    sector eigenstates, so the resolvent is exact and poles on the k axis
    stay explicit.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(k <= 0):
        raise ValueError("k must be positive")
    E = pf.energy if energy is None else energy
    src = _emission_source(pf.basis, pf.rho, sector.basis, kind, l, L, k)
    return PhotonPairFunction(kind, l, L, k, float(E), sector, sector.project(src))


def absorb_photon(photons, pf: PairFunction, kgrid: KGrid, weights, norm=True):
    """Energy from absorbing emitted photons by electron 2 (Hartree).

    ``photons`` is a list of :class:`PhotonPairFunction` on the nodes of
    ``kgrid`` (one per vertex and sector block) and ``weights`` maps
    (kind, l, L) to the multipole weight.  The absorption vertex is
    projected on ``<rho|`` of the Coulomb pair function, which sums the
    Coulomb interactions after absorption; the result is divided by
    <rho|rho> when ``norm`` is set.  Both time orderings are returned
    (the second equals the first for an antisymmetric pair function).
    Principal values are taken for sector states below E.
    """
    total = 0.0
    c = pf.basis.c
    J = pf.basis.J
    for ph in photons:
        sec = ph.sector
        Jp = sec.basis.J
        w = weights[(ph.kind, ph.l, ph.L)] * _phase(J - Jp) / (2 * J + 1)

        def amplitude(k, key, ph=ph):
            if isinstance(key, str):
                num = ph.numerators
            else:
                num = sec.project(_emission_source(pf.basis, pf.rho, sec.basis, ph.kind, ph.l,
                                                   ph.L, k))
            ab = sec.project(_absorption_source(pf.basis, pf.rho, sec.basis, ph.kind, ph.l,
                                                ph.L, k))
            return ab * num * k[:, None]

        delta = ph.energy - sec.energies
        total += 2.0 * w * _resolvent_sum(kgrid, amplitude, delta, c)
    return total / pf.norm2 if norm else total


def sector_retarded_energy(pf: PairFunction, kgrid: KGrid, l_max: int, sector_factory,
                           kinds=(GAUNT, SCALAR_RETARDATION), by_term=False):
    """Retarded energy through explicit photon sectors (Hartree).

    ``sector_factory(J', parity')`` returns the :class:`PhotonSector` of a
    block; sectors are reused across vertices.  With ``by_term`` the
    contributions keyed by (kind, l) are returned as well.
    """
    parts = {}
    sectors = {}
    for kind, l, L, weight in photon_terms(l_max, kinds, pf.basis.c):
        for blk in sector_blocks(pf.basis, kind, l, L):
            if blk not in sectors:
                try:
                    sectors[blk] = sector_factory(*blk)
                except ValueError:
                    sectors[blk] = None
            sec = sectors[blk]
            if sec is None:
                continue
            ph = emit_photon_pair(pf, kind, l, L, kgrid.k, sec)
            val = absorb_photon([ph], pf, kgrid, {(kind, l, L): weight})
            parts[(kind, l)] = parts.get((kind, l), 0.0) + val
    total = float(sum(parts.values()))
    return (total, parts) if by_term else total


def correlated_photon_energy(pf: PairFunction, kgrid: KGrid, l_max: int,
                             kinds=(GAUNT, SCALAR_RETARDATION), crossing=True,
                             sector_l_max=2, sector_orbitals=20, by_term=False):
    """One retarded photon dressed with Coulomb interactions (Hartree).

    The non-crossing part (Coulomb interactions before emission and after
    absorption only) is evaluated in the full pair basis with
    :func:`retarded_energy` at the correlated energy.  With ``crossing``
    the Coulomb interactions while the photon is in flight are added as
    the difference between the interacting and the free photon sector in a
    truncated sector basis (``sector_l_max``, ``sector_orbitals``).
    """
    rho = pf.rho
    n2 = pf.norm2
    total, parts = retarded_energy(pf.basis, rho, rho, pf.energy, kgrid, l_max, kinds,
                                   by_term=True)
    parts = {key: v / n2 for key, v in parts.items()}
    if crossing:
        cache = {}

        def factory(crossing_flag):
            def make(Jp, par):
                key = (Jp, par, crossing_flag)
                if key not in cache:
                    sb = PairBasis(pf.basis.spectrum, Jp, par, l_max=sector_l_max,
                                   n_orbitals=sector_orbitals)
                    cache[key] = photon_sector(sb, crossing_flag, pf.scale)
                return cache[key]
            return make

        _, with_v = sector_retarded_energy(pf, kgrid, l_max, factory(True), kinds, True)
        _, free = sector_retarded_energy(pf, kgrid, l_max, factory(False), kinds, True)
        for key in set(with_v) | set(free):
            parts[key] = parts.get(key, 0.0) + with_v.get(key, 0.0) - free.get(key, 0.0)
    total = float(sum(parts.values()))
    return (total, parts) if by_term else total


def l_tail(increments):
    """Geometric tail estimate from the last two partial-wave increments."""
    inc = [float(x) for x in increments]
    if len(inc) < 2 or inc[-2] == 0.0:
        return 0.0
    q = inc[-1] / inc[-2]
    if not 0.0 < q < 1.0:
        return 0.0
    return inc[-1] * q / (1.0 - q)
