"""Safety probability three ways: sum-product, dense matrix, Monte Carlo.

Run:  python3 demos/04_invariance_probability.py
"""
import numpy as np

from dbnabs import (
    SafeSet,
    build_dbn,
    build_linear_gaussian,
    check_dense,
    check_sum_product,
    lookup,
    monte_carlo,
    quadrature_reference,
)

model = build_linear_gaussian([[0.8, 0.0], [0.5, 0.8]], [0.2, 0.2])
A = SafeSet([-1, -1], [1, 1])
horizon = 10
s0 = np.array([0.2, -0.1])

dbn = build_dbn(model, A, counts=(40, 40))
fast = check_sum_product(dbn, horizon, keep_history=True)
slow = check_dense(dbn, horizon)
print("sum-product vs dense, max difference:", np.max(np.abs(fast.table.values - slow.table.values)))
print("P(stay safe for 10 steps | s0) on the 40x40 grid:", round(lookup(fast, s0), 5))

# value functions shrink as the remaining horizon grows
print("V_k(s0) for k = 10..0:", [round(float(h.values[dbn.partition.cell_of(s0)]), 4) for h in reversed(fast.history)])

ref = quadrature_reference(model, A, horizon)
print("continuous reference:", round(ref.value(s0, 0), 5))

mc = monte_carlo(model, A, horizon, s0, samples=200_000, seed=1)
print(f"Monte Carlo: {mc.estimate:.5f} +/- {mc.half_width95:.5f}")
