"""Smoke test for the compiled `wpar` extension.

Build and stage the module first:

    cargo build --release -p wpar-python --features extension-module
    cp target/release/libwpar.so python/wpar.so
"""

import math
import os
import sys

sys.path.insert(0, os.environ.get("WPAR_LIB", os.path.dirname(os.path.abspath(__file__))))

import wpar  # noqa: E402


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    one = wpar.Weight.constant(1.0, [-1.0], [1.0])
    radii = [0.01 * 10 ** (2 * k / 11) for k in range(12)]
    for q in (1.0, 2.0, 3.0):
        close(one.aq(q, [[0.0], [0.5]], radii), 1.0, 1e-12)

    sqrt = wpar.Weight.power(0.5, [0.0], [-1.0], [1.0])
    close(sqrt.aq(2.0, [[0.0]], radii), 4.0 / 3.0, 1e-6)
    rep = sqrt.beta_condition(10.0, [[0.0], [0.3]], radii)
    assert rep["pass"] and rep["rows"][0]["label"] == "beta_inverse_aq"

    line = wpar.Weight.power(1.0, [0.0])
    close(line.height_inverse([0.0], 4.0), 2.0, 1e-12)
    close(one.quasi_distance([0.3], 0.0, [0.0], -0.04), 0.3, 1e-12)

    sol = wpar.solve_manufactured(0.0, 32, 0.2)
    assert sol.nodes == 33 and len(sol.values) == sol.nodes * sol.levels
    assert sol.l2_error() < 1e-3
    assert sol.to_csv().startswith("x,t,u\n")
    assert sol.to_binary()[:8] == b"WPARSOL1"
    energy = sol.energy_audit(0.5, 0.2, 0.2, 100.0)
    assert energy["pass"], energy
    gate = sol.oscillation_gate(0.5, 0.1, 4)
    assert gate["tags"]["gate"] == "pass"
    decay, csv = sol.levelset_decay(0.5, 0.2, 0.1)
    assert csv.splitlines()[0] == "m,lhs_measure,rhs_bound,gamma1_fit"
    assert math.isfinite(decay["rows"][1]["constant"])

    _, orders = wpar.convergence_orders(0.0, 16, 3, 0.2)
    assert min(orders) >= 1.9, orders

    chart = wpar.BoundaryChart.affine(0.3)
    assert chart.map([1.0, 1.0]) == [1.0, 0.7]
    d = 0.1
    b = wpar.BoundaryChart.affine(d).pushforward(0.0, [1.0, 0.0, 0.0, 1.0], 0.5)
    for got, want in zip(b, [1.0, -d, -d, 1.0 + d * d]):
        close(got, want, 1e-15)
    assert chart.inclusion_audit([0.0, 0.0], 0.5, 21)["pass"]
    try:
        wpar.BoundaryChart.affine(1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("delta = 1 must be rejected")
    _, b_exp, theta_exp = wpar.flatten_sweep([0.05, 0.1, 0.2])
    assert b_exp >= 0.9 and theta_exp >= 1.8, (b_exp, theta_exp)

    print("smoke test passed")


if __name__ == "__main__":
    main()
