"""Smoke test for the pydmet extension.

Build first:  pip install --no-build-isolation -e crates/py
"""
import json
import math

import pydmet


def close(a, b, tol):
    assert abs(a - b) < tol, (a, b)


def main():
    dimer = pydmet.Hamiltonian.hubbard(2, 4.0, periodic=False)
    exact = 2.0 - 2.0 * math.sqrt(2.0)
    close(dimer.fci_energy(), exact, 1e-10)

    for solver in ("fci", "vqe"):
        r = pydmet.run_dmet(dimer, pydmet.Partition.whole_system(2, solver))
        close(r.e_cell, exact, 1e-6)
        assert r.converged

    # single-site fragments of the dimer reproduce the exact energy
    sites = pydmet.Partition([([0], "fci"), ([1], "fci")], classes=[(0, [0, 1])])
    close(pydmet.run_dmet(dimer, sites).e_cell, exact, 1e-6)

    ring = pydmet.Hamiltonian.hubbard(6, 4.0)
    blocks = pydmet.Partition.uniform_blocks(6, 2, "fci")
    opts = json.dumps({"mode": "selfconsistent", "guess": "afm", "max_cycles": 20})
    r = pydmet.run_dmet(ring, blocks, opts)
    assert r.converged and len(r.u) == 1 and len(r.spin_density) == 6
    assert len(json.loads(r.to_json())["history"]) == r.cycles
    print(r)

    close(pydmet.tdl_extrapolate([(27, 51.9), (64, 57.4)]), 73.9, 0.2)
    close(pydmet.fm_afii_gap(0.69, -9.51), 105.84, 1e-9)
    assert pydmet.qubit_estimate(78, 64, 5) == (9984, 20)
    minimum, shifted, diag = pydmet.eos_analyze([(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)])
    assert diag is None and min(e for _, e in shifted) == 0.0

    try:
        pydmet.Partition([([0, 5], "fci")]).validate(2)
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("out-of-range fragment accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
