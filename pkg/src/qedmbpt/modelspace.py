"""Finite matrix models for the Bloch equation and the fold expansion.

A :class:`MatrixModel` is H = H0 + V with diagonal H0 and a set of model
states spanning P.  The Bloch equation is solved column by column: with
E_b the H0 energy of model state b,

    Q Omega P_b = Gamma_Q(E_b) Q (V Omega - Omega V_eff) P_b,
    V_eff = P V Omega P,

and the eigenvalues of P H0 P + V_eff are exact eigenvalues of H.

The MSC-free ("no model-space contribution") wave operator is
Omega_bar(E) P = sum_n (Gamma_Q(E) V)^n P = P + G(E) Q V P with
G(E) = Q (E - Q H Q)^(-1) Q.  Its difference ratios have the closed form
G[E0, ..., En] = (-1)^n G(E0) ... G(En), which makes the fold series
cheap to sum to all orders.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .diffcalc import EnergyFunction, divided_difference
from .errors import NoConvergence, SingularResolvent

__all__ = [
    "MatrixModel",
    "Projectors",
    "EffectiveInteraction",
    "WaveOperatorMatrix",
    "build_projectors",
    "resolvent",
    "solve_bloch_instantaneous",
    "effective_hamiltonian",
    "match_eigenvalues",
    "omega_bar",
    "omega_bar_function",
    "fold_terms",
    "rs_orders",
    "fold_series_check",
    "wave_operator_identity_check",
    "random_model",
]

RESOLVENT_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class MatrixModel:
    """H0 (diagonal, stored as a vector), symmetric V, and model indices."""

    h0: np.ndarray
    V: np.ndarray
    model: tuple

    def __post_init__(self):
        h0 = np.asarray(self.h0, dtype=float)
        V = np.asarray(self.V, dtype=float)
        if h0.ndim == 2:
            if np.any(h0 - np.diag(np.diag(h0))):
                raise ValueError("H0 must be diagonal")
            h0 = np.diag(h0).copy()
        d = h0.size
        if V.shape != (d, d):
            raise ValueError(f"V has shape {V.shape}, expected {(d, d)}")
        scale = max(1.0, float(np.max(np.abs(V)))) if V.size else 1.0
        if np.max(np.abs(V - V.T), initial=0.0) > 1e-14 * scale:
            raise ValueError("V must be symmetric")
        model = tuple(int(i) for i in self.model)
        if len(set(model)) != len(model) or not model:
            raise ValueError("model-space indices must be distinct and non-empty")
        if min(model) < 0 or max(model) >= d:
            raise ValueError("model-space index out of range")
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "model", model)

    @property
    def dim(self):
        return self.h0.size

    @property
    def H0(self):
        return np.diag(self.h0)

    @property
    def H(self):
        return self.H0 + self.V

    @property
    def model_energies(self):
        return self.h0[list(self.model)]

    @property
    def q_indices(self):
        mset = set(self.model)
        return tuple(i for i in range(self.dim) if i not in mset)

    def scaled(self, lam):
        return MatrixModel(self.h0, lam * self.V, self.model)


@dataclass(frozen=True, eq=False)
class Projectors:
    P: np.ndarray
    Q: np.ndarray

    @property
    def embed(self):
        """d x m matrix whose columns are the model states."""
        return self.P[:, np.flatnonzero(np.diag(self.P))]


def build_projectors(model: MatrixModel) -> Projectors:
    p = np.zeros(model.dim)
    p[list(model.model)] = 1.0
    # keep the model-state column order of ``model.model``
    P = np.diag(p)
    return Projectors(P, np.diag(1.0 - p))


def _embed(model):
    out = np.zeros((model.dim, len(model.model)))
    out[list(model.model), np.arange(len(model.model))] = 1.0
    return out


@dataclass(frozen=True, eq=False)
class EffectiveInteraction:
    """Matrix over the model states with the energies it was evaluated at.

    ``function`` (optional) maps an energy to the matrix, for fold terms of
    energy-dependent interactions; ``energy`` is the frozen energy used when
    the object appears on the left of a difference ratio.
    """

    matrix: np.ndarray
    energies: tuple = ()
    function: object = None
    energy: float = None

    @property
    def dim(self):
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class WaveOperatorMatrix:
    """d x m matrix; column b is Omega acting on model state b."""

    matrix: np.ndarray
    msc_free: bool = False
    iterations: int = 0
    residual: float = 0.0
    history: list = field(default_factory=list)


def resolvent(E, model: MatrixModel, projectors: Projectors = None,
              threshold=RESOLVENT_THRESHOLD):
    """Gamma_Q(E) = Q / (E - H0) as a diagonal matrix."""
    q = np.diag(projectors.Q) if projectors is not None else np.diag(build_projectors(model).Q)
    den = E - model.h0
    out = np.zeros(model.dim)
    for i in np.flatnonzero(q):
        if abs(den[i]) < threshold:
            raise SingularResolvent(int(i), float(E))
        out[i] = 1.0 / den[i]
    return np.diag(out)


def _gamma_vec(E, model):
    return np.diag(resolvent(E, model))


def solve_bloch_instantaneous(model: MatrixModel, tol=1e-12, max_iter=10000, damping=None):
    """Fixed-point solution of the Bloch equation.

    Returns (WaveOperatorMatrix, EffectiveInteraction).  Damping with
    factor 0.5 switches on automatically when the residual grows; pass
    ``damping`` to force a value.
    """
    emb = _embed(model)
    energies = model.model_energies
    gam = np.stack([_gamma_vec(E, model) for E in energies], axis=1)  # d x m
    V = model.V
    omega = emb.copy()
    mix = 1.0 if damping is None else float(damping)
    last = np.inf
    history = []
    for it in range(1, max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            veff = emb.T @ V @ omega
            new = emb + gam * (V @ omega - omega @ veff)
        res = float(np.max(np.abs(new - omega)))
        history.append(res)
        if not np.isfinite(res):
            raise NoConvergence(it, res, "Bloch iteration")
        if damping is None and res > last and mix == 1.0:
            mix = 0.5
        omega = omega + mix * (new - omega)
        last = res
        if res < tol:
            veff = emb.T @ V @ omega
            return (WaveOperatorMatrix(omega, False, it, res, history),
                    EffectiveInteraction(veff, tuple(energies)))
    raise NoConvergence(max_iter, last, "Bloch iteration")


def effective_hamiltonian(model: MatrixModel, veff: EffectiveInteraction):
    return np.diag(model.model_energies) + veff.matrix


def match_eigenvalues(model: MatrixModel, omega: WaveOperatorMatrix,
                      veff: EffectiveInteraction):
    """Pair each H_eff eigenvalue with the exact eigenvalue of H whose
    eigenvector overlaps most with the corresponding target state Omega c.

    Returns a list of (h_eff eigenvalue, exact eigenvalue, overlap).
    """
    heff = effective_hamiltonian(model, veff)
    ev, vec = np.linalg.eig(heff)
    exact, evecs = np.linalg.eigh(model.H)
    out = []
    for i in np.argsort(ev.real):
        target = omega.matrix @ vec[:, i].real
        target = target / np.linalg.norm(target)
        ov = np.abs(evecs.T @ target)
        j = int(np.argmax(ov))
        out.append((float(ev[i].real), float(exact[j]), float(ov[j])))
    return out


def _q_resolvent(model: MatrixModel, E):
    """G(E) = Q (E - QHQ)^(-1) Q embedded in the full space."""
    q = list(model.q_indices)
    G = np.zeros((model.dim, model.dim))
    if q:
        Hq = model.H[np.ix_(q, q)]
        G[np.ix_(q, q)] = np.linalg.inv(E * np.eye(len(q)) - Hq)
    return G


def omega_bar(model: MatrixModel, E):
    """MSC-free wave operator Omega_bar(E) P as a d x m matrix (all columns at E)."""
    emb = _embed(model)
    return emb + _q_resolvent(model, E) @ model.V @ emb


def omega_bar_function(model: MatrixModel, column: int) -> EnergyFunction:
    """Column ``column`` of Omega_bar(E) as an EnergyFunction (d x 1) with
    exact derivatives d^n/dE^n = (-1)^n n! G^(n+1) Q V P."""
    emb = _embed(model)[:, [column]]
    qvp = model.V @ emb
    qvp[list(model.model)] = 0.0

    def value(E):
        return emb + _q_resolvent(model, E) @ qvp

    def deriv(E, n):
        if n == 0:
            return value(E)
        G = _q_resolvent(model, E)
        out = np.linalg.matrix_power(G, n + 1) @ qvp
        fact = 1.0
        for i in range(2, n + 1):
            fact *= i
        return (-1) ** n * fact * out

    return EnergyFunction(value, derivative=deriv)


def fold_terms(model: MatrixModel, veff: EffectiveInteraction, n_max: int):
    """Terms delta^n Omega_bar (V_eff)^n for n = 1..n_max (list of d x m).

    Uses the closed-form difference ratios of the resolvent:
    W_0[:, a] = G(E_a) Q V P_a and W_{k+1}[:, b] = -G(E_b) (W_k V_eff)[:, b].
    """
    energies = model.model_energies
    Gs = [_q_resolvent(model, E) for E in energies]
    emb = _embed(model)
    qvp = model.V @ emb
    qvp[list(model.model)] = 0.0
    W = np.stack([Gs[a] @ qvp[:, a] for a in range(len(energies))], axis=1)
    out = []
    for _ in range(n_max):
        X = W @ veff.matrix
        W = -np.stack([Gs[b] @ X[:, b] for b in range(len(energies))], axis=1)
        out.append(W)
    return out


def fold_terms_diffcalc(model: MatrixModel, veff: EffectiveInteraction, n: int):
    """delta^n Omega_bar (V_eff)^n by explicit summation over model-state paths
    with :func:`divided_difference` (exponential in n; for checks)."""
    energies = model.model_energies
    m = len(energies)
    funcs = [omega_bar_function(model, a) for a in range(m)]
    out = np.zeros((model.dim, m))
    Vm = veff.matrix
    for path in product(range(m), repeat=n + 1):
        coef = 1.0
        for a, b in zip(path[:-1], path[1:]):
            coef *= Vm[a, b]
        if coef == 0.0:
            continue
        dd = divided_difference(funcs[path[0]], [energies[a] for a in path])
        out[:, path[-1]] += coef * dd[:, 0]
    return out


def rs_orders(model: MatrixModel, K: int):
    """Rayleigh-Schroedinger orders Omega^(k), V_eff^(k) for k = 0..K from the
    order-by-order Bloch equation."""
    emb = _embed(model)
    energies = model.model_energies
    gam = np.stack([_gamma_vec(E, model) for E in energies], axis=1)
    V = model.V
    omegas = [emb]
    veffs = [np.zeros((len(energies), len(energies)))]
    for k in range(1, K + 1):
        veffs.append(emb.T @ V @ omegas[k - 1])
        rhs = V @ omegas[k - 1]
        for j in range(1, k):
            rhs = rhs - omegas[k - j] @ veffs[j]
        omegas.append(gam * rhs)
    return omegas, veffs


def _omega_bar_order_dd(model, k, energies):
    """Difference ratio of (Gamma_Q(E) V)^k P over ``energies`` (d x d part
    before the model-state column is selected), exact for repeated energies.

    Generalised product rule over the k resolvent factors; each factor's
    ratio is diag((-1)^m prod_i Gamma_Q(E_i)).
    """
    n = len(energies) - 1
    d = model.dim
    qmask = np.zeros(d)
    qmask[list(model.q_indices)] = 1.0
    den = np.array(energies)[:, None] - model.h0[None, :]

    def gamma_dd(lo, hi):
        vals = qmask.copy()
        for i in range(lo, hi + 1):
            with np.errstate(divide="ignore"):
                vals = vals * np.where(qmask > 0, 1.0 / den[i], 0.0)
        return (-1) ** (hi - lo) * vals

    if k == 0:
        return np.eye(d) if n == 0 else np.zeros((d, d))
    total = np.zeros((d, d))
    # split points 0 = i0 <= i1 <= ... <= i_{k-1} <= n, factor j covers [i_j, i_{j+1}]
    for cuts in _nondecreasing(k - 1, n):
        bounds = (0,) + cuts + (n,)
        mat = np.eye(d)
        for j in range(k):
            mat = mat @ (gamma_dd(bounds[j], bounds[j + 1])[:, None] * model.V)
        total += mat
    return total


def _nondecreasing(length, top):
    if length == 0:
        yield ()
        return
    for first in range(top + 1):
        for rest in _nondecreasing(length - 1, top):
            if rest and rest[0] < first:
                continue
            yield (first,) + rest


@dataclass(frozen=True)
class FoldReport:
    n_max: int
    deviation: float
    deviations: list
    order_deviation: float
    diffcalc_deviation: float


def fold_series_check(model: MatrixModel, n_max: int, omega=None, veff=None):
    """Compare Omega P with Omega_bar P + sum_{n<=n_max} delta^n Omega_bar (V_eff)^n.

    ``deviation`` is the max elementwise difference with the converged
    Omega; ``deviations`` lists it for every truncation 0..n_max.
    ``order_deviation`` checks the same identity order by order in V
    through order n_max + 1, where the truncation at n_max is exact; it is
    evaluated for n_max <= 4 only (the term count grows combinatorially)
    and is NaN otherwise.
    ``diffcalc_deviation`` compares the closed-form fold terms with explicit
    path sums of :func:`divided_difference` (n <= min(n_max, 4)).
    """
    if omega is None or veff is None:
        omega, veff = solve_bloch_instantaneous(model)
    energies = model.model_energies
    cols = np.stack([omega_bar(model, E)[:, a] for a, E in enumerate(energies)], axis=1)
    approx = cols.copy()
    devs = [float(np.max(np.abs(omega.matrix - approx)))]
    terms = fold_terms(model, veff, n_max)
    for t in terms:
        approx = approx + t
        devs.append(float(np.max(np.abs(omega.matrix - approx))))
    dc = 0.0
    for n in range(1, min(n_max, 4) + 1):
        dc = max(dc, float(np.max(np.abs(fold_terms_diffcalc(model, veff, n) - terms[n - 1]))))
    order_dev = _order_check(model, n_max) if n_max <= 4 else float("nan")
    return FoldReport(n_max, devs[-1], devs, order_dev, dc)


def _order_check(model, n_max):
    K = n_max + 1
    omegas, veffs = rs_orders(model, K)
    lhs = sum(omegas)
    energies = model.model_energies
    m = len(energies)
    emb = _embed(model)
    rhs = np.zeros_like(lhs)
    for k in range(K + 1):
        for a, E in enumerate(energies):
            rhs[:, a] += (_omega_bar_order_dd(model, k, [E]) @ emb)[:, a]
    # fold terms: orders k0 + k1 + ... + kn <= K with k0 >= 1, ki >= 1
    for n in range(1, n_max + 1):
        for path in product(range(m), repeat=n + 1):
            es = [energies[a] for a in path]
            for ks in _compositions(n, K - 1):
                coef = 1.0
                for (a, b), kk in zip(zip(path[:-1], path[1:]), ks):
                    coef *= veffs[kk][a, b]
                if coef == 0.0:
                    continue
                kmax = K - sum(ks)
                for k0 in range(1, kmax + 1):
                    dd = _omega_bar_order_dd(model, k0, es) @ emb
                    rhs[:, path[-1]] += coef * dd[:, path[0]]
    return float(np.max(np.abs(lhs - rhs)))


def _compositions(n, total_max):
    """Tuples of n positive integers with sum <= total_max."""
    if n == 0:
        yield ()
        return
    for first in range(1, total_max - (n - 1) + 1):
        for rest in _compositions(n - 1, total_max - first):
            yield (first,) + rest


@dataclass(frozen=True)
class WaveOperatorIdentity:
    n_max: int
    deviation: float
    lhs: np.ndarray
    rhs: np.ndarray


def wave_operator_identity_check(model: MatrixModel, n_max: int, omega=None, veff=None):
    """Q Omega P against Q Omega_bar P - Gamma_Q Omega V_eff
    + Gamma_Q sum_{n<=n_max} delta^n V_bar_R (V_eff)^n.

    V_bar_R(E) = Q V Omega_bar(E), and every resolvent in front is taken at
    the energy of the model state the column acts on.
    """
    if omega is None or veff is None:
        omega, veff = solve_bloch_instantaneous(model)
    energies = model.model_energies
    q = np.zeros(model.dim)
    q[list(model.q_indices)] = 1.0
    lhs = q[:, None] * omega.matrix
    gam = np.stack([_gamma_vec(E, model) for E in energies], axis=1)
    bar = np.stack([omega_bar(model, E)[:, a] for a, E in enumerate(energies)], axis=1)
    rhs = q[:, None] * bar - gam * (omega.matrix @ veff.matrix)
    qv = q[:, None] * model.V
    for t in fold_terms(model, veff, n_max):
        # delta^n V_bar_R = Q V delta^n Omega_bar for n >= 1
        rhs = rhs + gam * (qv @ t)
    return WaveOperatorIdentity(n_max, float(np.max(np.abs(lhs - rhs))), lhs, rhs)


def random_model(rng, dim=8, n_model=2, coupling=0.4, gap=1.0, spread=0.3):
    """Random symmetric model with ||Gamma_Q V|| below ``coupling``.

    Model energies lie in [0, spread]; Q energies start ``gap`` above.
    """
    h0 = np.concatenate([rng.uniform(0.0, spread, n_model),
                         gap + spread + rng.uniform(0.0, 3.0, dim - n_model)])
    A = rng.normal(size=(dim, dim))
    V = 0.5 * (A + A.T)
    model = MatrixModel(h0, V, tuple(range(n_model)))
    worst = max(np.linalg.norm(resolvent(E, model) @ V, 2) for E in model.model_energies)
    V = V * (0.95 * coupling / worst)
    return MatrixModel(h0, V, tuple(range(n_model)))
