"""Difference ratios of energy-dependent operators.

For an operator function A(E) the first difference ratio is
(A(E) - A(E')) / (E - E') and the higher ratios are nested.  For scalars
they are ordinary divided differences, so the order-n ratio of E^m is the
complete homogeneous symmetric polynomial of degree m - n in the energies
and the fully degenerate limit is A^(n)(E) / n!.

Matrices are 2-d numpy arrays; scalar functions are promoted to 1x1.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import DegenerateEnergies

__all__ = [
    "DEGENERACY_THRESHOLD",
    "EnergyFunction",
    "PolynomialFunction",
    "DegenerateLimit",
    "diff_ratio",
    "diff_ratio_n",
    "divided_difference",
    "leibniz_expand",
    "degenerate_limit",
    "veff_power_diff",
]

DEGENERACY_THRESHOLD = 1e-8


class EnergyFunction:
    """A pure function E -> square matrix.

    ``derivative(E, n)``, when supplied, returns the n-th derivative and is
    used by :func:`degenerate_limit` instead of finite differences.
    """

    def __init__(self, func, order=None, derivative=None):
        self._func = func
        self.order = order
        self._derivative = derivative

    def __call__(self, E):
        return np.atleast_2d(np.asarray(self._func(float(E)), dtype=float))

    def derivative(self, E, n):
        if self._derivative is None:
            return None
        return np.atleast_2d(np.asarray(self._derivative(float(E), n), dtype=float))

    def __mul__(self, other):
        return EnergyFunction(lambda E: self(E) @ _as_function(other)(E))


class PolynomialFunction(EnergyFunction):
    """sum_m C_m E^m with matrix (or scalar) coefficients and exact derivatives."""

    def __init__(self, coeffs):
        self.coeffs = [np.atleast_2d(np.asarray(c, dtype=float)) for c in coeffs]
        super().__init__(self._eval, order=len(self.coeffs) - 1, derivative=self._deriv)

    def _eval(self, E):
        out = np.zeros_like(self.coeffs[0])
        for c in reversed(self.coeffs):
            out = out * E + c
        return out

    def _deriv(self, E, n):
        out = np.zeros_like(self.coeffs[0])
        for m in range(len(self.coeffs) - 1, n - 1, -1):
            out = out * E + self.coeffs[m] * (factorial(m) // factorial(m - n))
        return out

    def divided_difference(self, energies):
        """Exact ratio: sum_m C_m h_(m-n)(energies), h the complete
        homogeneous symmetric polynomial.  Free of cancellation, so it
        also covers nearly coinciding energies."""
        es = [float(e) for e in energies]
        n = len(es) - 1
        # h[d] for the energies seen so far, built one energy at a time
        top = len(self.coeffs) - 1 - n
        out = np.zeros_like(self.coeffs[0])
        if top < 0:
            return out
        h = np.zeros(top + 1)
        h[0] = 1.0
        for i, e in enumerate(es):
            if i == 0:
                h = e ** np.arange(top + 1)
                continue
            for d in range(1, top + 1):
                h[d] = h[d] + e * h[d - 1]
        for d in range(top + 1):
            out = out + self.coeffs[n + d] * h[d]
        return out

    def __mul__(self, other):
        if not isinstance(other, PolynomialFunction):
            return super().__mul__(other)
        deg = len(self.coeffs) + len(other.coeffs) - 1
        out = [0.0] * deg
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a @ b
        return PolynomialFunction(out)


def _as_function(f):
    if isinstance(f, EnergyFunction):
        return f
    if callable(f):
        return EnergyFunction(f)
    const = np.atleast_2d(np.asarray(f, dtype=float))
    return EnergyFunction(lambda E: const, order=0,
                          derivative=lambda E, n: const if n == 0 else np.zeros_like(const))


def diff_ratio(f, energies, threshold=DEGENERACY_THRESHOLD):
    """(f(E) - f(E')) / (E - E')."""
    E1, E2 = (float(e) for e in energies)
    if abs(E1 - E2) < threshold:
        raise DegenerateEnergies(f"|E - E'| = {abs(E1 - E2):.3e} below {threshold:g}")
    f = _as_function(f)
    return (f(E1) - f(E2)) / (E1 - E2)


def diff_ratio_n(f, energies, threshold=DEGENERACY_THRESHOLD):
    """Nested difference ratio of order len(energies) - 1.

    All energies must be pairwise separated by more than ``threshold``; use
    :func:`divided_difference` for tuples with coinciding entries.
    """
    es = [float(e) for e in energies]
    for i in range(len(es)):
        for j in range(i):
            if abs(es[i] - es[j]) < threshold:
                raise DegenerateEnergies(
                    f"energies {i} and {j} differ by {abs(es[i] - es[j]):.3e}")
    return divided_difference(f, es, threshold)


def divided_difference(f, energies, threshold=DEGENERACY_THRESHOLD):
    """Difference ratio for any energy tuple.

    Clusters of energies closer than ``threshold`` are replaced by their
    degenerate limit (n-th derivative over n!), and clusters are joined by
    ordinary difference quotients.
    """
    f = _as_function(f)
    if isinstance(f, PolynomialFunction):
        return f.divided_difference(energies)
    es = sorted(float(e) for e in energies)
    cache = {}

    def dd(i, j):
        if (i, j) in cache:
            return cache[i, j]
        if es[j] - es[i] < threshold:
            val = degenerate_limit(f, 0.5 * (es[i] + es[j]), j - i)
        else:
            val = (dd(i + 1, j) - dd(i, j - 1)) / (es[j] - es[i])
        cache[i, j] = val
        return val

    return dd(0, len(es) - 1)


def leibniz_expand(n, A, B, energies, threshold=DEGENERACY_THRESHOLD):
    """sum_m delta^m A(E..E^m) delta^(n-m) B(E^m..E^n), the product rule.

    The left factor is differenced over the leading energies and the right
    factor over the trailing ones, which is what nesting the first-order
    rule produces: the factor to the right of a difference ratio is frozen
    at the energy the ratio moved to.
    """
    es = [float(e) for e in energies]
    if len(es) != n + 1:
        raise ValueError(f"order {n} needs {n + 1} energies, got {len(es)}")
    total = None
    for m in range(n + 1):
        term = divided_difference(A, es[: m + 1], threshold) @ divided_difference(
            B, es[m:], threshold)
        total = term if total is None else total + term
    return total


@dataclass(frozen=True)
class DegenerateLimit:
    value: np.ndarray
    error: float
    analytic: bool


def _stencil_derivative(f, E, n, h):
    # 5-point central stencils; orders 1, 2 are O(h^4) and 3, 4 are O(h^2)
    fm2, fm1, f0, fp1, fp2 = (f(E + s * h) for s in (-2, -1, 0, 1, 2))
    if n == 1:
        return (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h), 4
    if n == 2:
        return (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h), 4
    if n == 3:
        return (-fm2 + 2 * fm1 - 2 * fp1 + fp2) / (2 * h ** 3), 2
    if n == 4:
        return (fm2 - 4 * fm1 + 6 * f0 - 4 * fp1 + fp2) / h ** 4, 2
    raise ValueError("finite-difference limit implemented for n <= 4 only")


def degenerate_limit(f, E, n, return_error=False):
    """(1/n!) d^n f / dE^n at E.

    Uses the exact derivative when ``f`` provides one and otherwise a
    5-point central difference and one Richardson halving.  The step is
    max(1e-4, 1e-4 |E|) for n = 1 and grows tenfold per extra order, which
    keeps the cancellation error of the n-th difference near 1e-9.  With
    ``return_error`` a :class:`DegenerateLimit` carrying the Richardson
    error estimate is returned.
    """
    f = _as_function(f)
    E = float(E)
    if n == 0:
        val = f(E)
        return DegenerateLimit(val, 0.0, True) if return_error else val
    exact = f.derivative(E, n)
    if exact is not None:
        val = exact / factorial(n)
        return DegenerateLimit(val, 0.0, True) if return_error else val
    h = max(1e-4, 1e-4 * abs(E)) * 10.0 ** (n - 1)
    d1, p = _stencil_derivative(f, E, n, h)
    d2, _ = _stencil_derivative(f, E, n, 0.5 * h)
    val = (2 ** p * d2 - d1) / (2 ** p - 1) / factorial(n)
    if return_error:
        err = float(np.max(np.abs(val - d2 / factorial(n))))
        return DegenerateLimit(val, err, False)
    return val


def veff_power_diff(veff_chain, energies, threshold=DEGENERACY_THRESHOLD):
    """Difference ratio of a product of effective interactions.

    ``veff_chain`` is ordered left to right.  Only the rightmost factor
    depends on the differentiated energy; the others are frozen at their
    own energy tags, so the result is V_1 ... V_{n-1} delta V_n.  Each
    element is either an :class:`EnergyFunction` (frozen at ``energies[0]``
    when on the left) or an object with ``function`` and ``energy`` fields.
    """
    if not veff_chain:
        raise ValueError("chain must contain at least one factor")
    E1, E2 = (float(e) for e in energies)
    left = None
    for item in veff_chain[:-1]:
        mat = _frozen_value(item, E1)
        left = mat if left is None else left @ mat
    last = veff_chain[-1]
    func = last.function if hasattr(last, "function") else last
    right = diff_ratio(func, (E1, E2), threshold)
    return right if left is None else left @ right


def _frozen_value(item, default_energy):
    if hasattr(item, "function") and hasattr(item, "energy"):
        energy = item.energy if item.energy is not None else default_energy
        if item.function is None:
            return np.atleast_2d(item.matrix)
        return _as_function(item.function)(energy)
    return _as_function(item)(default_energy)
