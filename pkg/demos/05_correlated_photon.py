"""One retarded photon dressed with all-order Coulomb correlation.

The converged Coulomb pair function replaces the bare 1s2s state on both
sides of the photon exchange, so any number of Coulomb interactions can
occur before the photon is emitted and after it is absorbed.  Passing
``--crossing`` also lets the electrons interact while the photon is in
flight, evaluated in a truncated photon sector; this is slower.

Run:  python demos/05_correlated_photon.py [--crossing]
"""
import sys

from qedmbpt.angular import GAUNT, SCALAR_RETARDATION
from qedmbpt.pairsolver import (
    PairBasis,
    correlated_photon_energy,
    l_tail,
    make_kgrid,
    pair_model_state,
    solve_coulomb_pair,
)
from qedmbpt.radial import build_spectrum, make_grid

crossing = "--crossing" in sys.argv
Z, PAIR_L, PHOTON_L = 10.0, 3, 4
grid = make_grid(100, 1e-6 / Z, 60.0 / Z)
spec = build_spectrum(Z, [-1, 1, -2, 2, -3, 3, -4], grid)
kgrid = make_kgrid(60)

for J, name in ((0, "1s2s 1S"), (1, "1s2s 3S")):
    basis = PairBasis(spec, J, 1, l_max=PAIR_L, n_orbitals=30)
    pf = solve_coulomb_pair(basis, pair_model_state(basis, (1, -1), (2, -1)))
    print(f"{name}: correlated energy {pf.energy:.8f} Hartree, <rho|rho> = {pf.norm2:.5f}")
    _, parts = correlated_photon_energy(pf, kgrid, PHOTON_L, crossing=crossing,
                                        sector_l_max=1, sector_orbitals=15, by_term=True)
    for kind in (GAUNT, SCALAR_RETARDATION):
        per_l = [parts.get((kind, l), 0.0) * 1e6 for l in range(PHOTON_L + 1)]
        print(f"  {kind:18s} {sum(per_l):9.2f} uH   by photon l: "
              + " ".join(f"{x:8.2f}" for x in per_l) + f"   tail {l_tail(per_l):+.2f}")
