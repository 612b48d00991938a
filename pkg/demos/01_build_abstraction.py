"""Abstract a two-dimensional linear-Gaussian process into a small DBN.

Run:  python3 demos/01_build_abstraction.py
"""
import numpy as np

from dbnabs import SafeSet, build_dbn, build_linear_gaussian, dependency_dag, marginal_count

# s'_1 = 0.8 s_1 + noise,   s'_2 = 0.5 s_1 + 0.8 s_2 + noise
model = build_linear_gaussian([[0.8, 0.0], [0.5, 0.8]], sigma=[0.2, 0.2])
A = SafeSet([-1, -1], [1, 1])

# the sparsity of phi is what keeps the abstraction small
print("arcs of the dependency DAG:", dependency_dag(model).arcs)
print("parents per dimension:", model.parents)

dbn = build_dbn(model, A, counts=(8, 6))
for cpd in dbn.cpds:
    print(f"T{cpd.dim + 1}: parents {cpd.parents}, table shape {cpd.table.shape}")

# every row sums to one; the last column is the mass that leaves the safe set
t2 = dbn.cpds[1].table
print("row sums of T2 (first parent bin):", np.round(t2[0].sum(axis=-1), 12))
print("exit probability from the corner cell:", round(float(t2[0, 0, -1]), 4))
print("stored entries:", marginal_count(dbn), "with absorbing outcomes:", marginal_count(dbn, include_absorbing=True))
