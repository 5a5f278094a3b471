"""All-order Coulomb pair equation against configuration interaction.

The pair function of a two-electron ion is iterated to convergence in a
discrete basis of Dirac orbitals.  Diagonalizing the same two-electron
Hamiltonian in the same basis has to give the same energy, which makes a
sharp check on the iteration, the fold term and the Coulomb kernel.

Run:  python demos/03_coulomb_pair.py
"""
import time

from qedmbpt.pairsolver import PairBasis, ci_energy, pair_model_state, solve_coulomb_pair
from qedmbpt.radial import build_spectrum, make_grid

for Z in (2.0, 10.0):
    grid = make_grid(100, 1e-6 / Z, 60.0 / Z)
    spec = build_spectrum(Z, [-1, 1, -2, 2, -3], grid)
    basis = PairBasis(spec, 0, 1, l_max=2, n_orbitals=30)
    model = pair_model_state(basis, (1, -1), (1, -1))
    t = time.time()
    pf = solve_coulomb_pair(basis, model, tol=1e-12)
    t_pair = time.time() - t
    e_ci, overlap = ci_energy(basis, model)
    print(f"Z = {Z:g}  dimension {basis.dimension}")
    print(f"  pair equation {pf.energy:.12f}  ({pf.iterations} iterations, {t_pair:.1f} s)")
    print(f"  CI            {e_ci:.12f}  (overlap with 1s^2 {overlap:.4f})")
    print(f"  difference    {abs(pf.energy - e_ci):.1e}")
