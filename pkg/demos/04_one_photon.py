"""Retarded one-photon exchange in 1s2s states of Ne8+.

The transverse photon is split into its Gaunt and scalar-retardation
parts, each expanded in multipoles and integrated over the photon wave
number.  Removing retardation must give back the instantaneous Gaunt
interaction, and on the energy shell the Coulomb gauge has to agree with
the Feynman gauge.

Run:  python demos/04_one_photon.py
"""
from qedmbpt.angular import GAUNT, SCALAR_RETARDATION
from qedmbpt.pairsolver import (
    PairBasis,
    coulomb_element,
    gaunt_instantaneous_element,
    make_kgrid,
    one_photon_matrix_element,
    pair_model_state,
    retarded_energy,
)
from qedmbpt.radial import build_spectrum, make_grid

Z = 10.0
grid = make_grid(150, 1e-6 / Z, 60.0 / Z)
spec = build_spectrum(Z, [-1], grid)
kgrid = make_kgrid(100)

for J, name in ((0, "1s2s 1S"), (1, "1s2s 3S")):
    basis = PairBasis(spec, J, 1, l_max=0, n_orbitals=4)
    model = pair_model_state(basis, (1, -1), (2, -1))
    psi = model.vector(basis)
    g = retarded_energy(basis, psi, psi, model.energy, kgrid, 6, (GAUNT,)) * 1e6
    sr = retarded_energy(basis, psi, psi, model.energy, kgrid, 6, (SCALAR_RETARDATION,)) * 1e6
    print(f"{name}: Gaunt {g:9.2f} uH   scalar retardation {sr:8.2f} uH")

a, b = spec.orbital(1, -1), spec.orbital(2, -1)
inst = one_photon_matrix_element(a, b, a, b, 0, 0.0, grid, kgrid, 2, kinds=(GAUNT,),
                                 denominators="instantaneous")
print(f"\nunretarded k integral {inst:.14f}")
print(f"instantaneous Gaunt   {gaunt_instantaneous_element(a, b, a, b, 0, grid, 2):.14f}")

E = a.energy + b.energy
coulomb = coulomb_element(a, b, a, b, 0, grid) + one_photon_matrix_element(
    a, b, a, b, 0, E, grid, kgrid, 4, kinds=(SCALAR_RETARDATION,))
feynman = one_photon_matrix_element(a, b, a, b, 0, E, grid, kgrid, 4, gauge="feynman",
                                    kinds=("Charge",))
print(f"\nCoulomb gauge (Coulomb + scalar retardation) {coulomb:.12f}")
print(f"Feynman gauge (charge photon)                {feynman:.12f}")
