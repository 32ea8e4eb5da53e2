"""Smoke test for the ks_py extension.

Build and install first:
    cd crates/py && maturin build --release && pip install ../../target/wheels/ks_py-*.whl
"""

import math

import ks_py

SMALL = """
[pde]
d = 2
chi = 1.0
nu = 0.1
mu = 1.0
m = 64
l = 4.0
dt = 1e-3
t_end = 0.05
init_sigma = 0.5

[particles]
n = 200
dt = 0.01
seed = 3
"""


def main():
    k = ks_py.coulomb([1.0, 0.0])
    assert abs(k[0] + 1.0 / (2.0 * math.pi)) < 1e-15 and k[1] == 0.0

    rho, branch = ks_py.theoretical_rho(2, 1.0 / 6.0, 0.5, 8.0)
    assert branch in ("first", "second") and rho > 0.0

    slope, lo, hi = ks_py.fit_slope([100.0, 200.0, 400.0, 800.0], [n ** -0.5 for n in (100, 200, 400, 800)])
    assert abs(slope + 0.5) < 1e-12 and lo <= slope <= hi

    checks = ks_py.kernel_check(2)
    assert all(passed for _, passed, _, _ in checks), checks
    bad = [name for name, passed, _, _ in ks_py.kernel_check(2, corrupt_table=True) if not passed]
    assert "table_antisymmetry" in bad, bad

    pde = ks_py.solve_pde(SMALL)
    assert pde["triggered_at"] is None and pde["a_t"] > 0.0
    assert abs(pde["mass"][0] - 1.0) < 1e-6

    a = ks_py.simulate(SMALL)
    b = ks_py.simulate(SMALL)
    assert a["positions"] == b["positions"] and a["alive"] * 2 == len(a["positions"])
    assert abs(a["mass"] - a["alive"] / 200.0) < 1e-12

    try:
        ks_py.solve_pde(SMALL, ["pde.kappa=1"])
    except ValueError as e:
        assert "kappa" in str(e)
    else:
        raise AssertionError("unknown key accepted")

    print("smoke test ok: rho=%.4f (%s), A_T=%.4f, m^N=%.3f" % (rho, branch, pde["a_t"], a["mass"]))


if __name__ == "__main__":
    main()
