"""Regenerate the cc-pVDZ FCIDUMP fixtures used by the scan and acceptance tests.

Requires PySCF. Integrals are written in the RHF molecular-orbital basis
(no point-group symmetry). Run from this directory:

    python3 generate.py
"""
import os

import numpy as np
from pyscf import gto, scf, ao2mo, fci
from pyscf.tools import fcidump

SYSTEMS = {
    # name: (atom A, atom B, charge, separations in Angstrom)
    "h2": ("H", "H", 0, [0.5, 0.6, 0.7, 0.74, 0.8, 0.9, 1.0, 1.2, 1.4, 1.6,
                          1.8, 2.0, 2.3, 2.6, 3.0, 3.5, 4.0, 5.0]),
    "he2_2plus": ("He", "He", 2, [0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 1.0, 1.2, 1.4,
                                  1.6, 1.8, 2.0, 2.3, 2.6, 3.0, 3.5, 4.0, 5.0]),
    "heh_plus": ("He", "H", 1, [round(0.3 + 0.05 * k, 2) for k in range(75)]),
}


def write(name, a, b, charge, r):
    mol = gto.M(atom=f"{a} 0 0 0; {b} 0 0 {r}", basis="cc-pvdz",
                charge=charge, spin=0, symmetry=False, verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    if not mf.converged:
        raise RuntimeError(f"RHF did not converge for {name} at R={r}")
    c = mf.mo_coeff
    h1 = c.T @ mf.get_hcore() @ c
    eri = ao2mo.full(mol, c, compact=True)
    path = os.path.join(name, f"{name}_R{r:.2f}.fcidump")
    fcidump.from_integrals(path, h1, eri, c.shape[1], mol.nelectron,
                           nuc=mol.energy_nuc(), ms=0, tol=1e-14,
                           float_format=" %.16e")
    e_fci = fci.FCI(mf).kernel()[0]
    return path, e_fci


if __name__ == "__main__":
    rows = []
    for name, (a, b, charge, grid) in SYSTEMS.items():
        os.makedirs(name, exist_ok=True)
        for r in grid:
            path, e_fci = write(name, a, b, charge, r)
            rows.append(f"{path},{r:.2f},{e_fci:.12f}")
    with open("reference_energies.csv", "w") as f:
        f.write("file,R,E_fci\n")
        f.write("\n".join(rows) + "\n")
