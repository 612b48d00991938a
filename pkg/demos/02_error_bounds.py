"""Size a grid from an error budget and compare with the explicit-chain bound.

Run:  python3 demos/02_error_bounds.py
"""
import numpy as np

from dbnabs import (
    SafeSet,
    aklp_bins,
    bidiagonal,
    build_linear_gaussian,
    dbn_error,
    lipschitz_constants,
    norm_bounds,
    size_from_budget,
    weights,
)

n, horizon, eps = 4, 10, 0.2
model = build_linear_gaussian(bidiagonal(n), [0.2] * n)
A = SafeSet([-1.0] * n, [1.0] * n)

lip = weights(lipschitz_constants(model), A)
print("out-weights O_i:", np.round(lip.out_weights, 2))
print("kappa (sum of in-weights):", round(lip.kappa, 2))

counts = size_from_budget(model, A, horizon, eps)
report = dbn_error(lip, horizon, A.lengths / np.array(counts))
print(f"DBN grid: {counts[0]} bins per dimension, bound {report.total:.4f} <= {eps}")
print(f"  (the coarser single-diameter bound would give {report.global_grid_term:.4f})")

m = aklp_bins(model, A, horizon, eps)
print(f"explicit chain: {m[0]} bins per dimension for the same budget")

# the norm relations behind the comparison; the lower one does not hold
# for this matrix, which the report makes visible
nb = norm_bounds(model.phi)
print(f"|phi|_1 = {nb.entrywise_one_norm}, |phi|_2 = {nb.induced_two_norm:.4f}")
print("n |phi|_2 <= |phi|_1 :", nb.lower_holds)
print("|phi|_1 <= n sqrt(n) |phi|_2 :", nb.upper_holds)
print("sparsity bound on |phi|_2:", round(nb.sparsity_bound, 4))
