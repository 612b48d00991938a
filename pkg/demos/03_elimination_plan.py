"""Greedy elimination ordering and its predicted cost.

Run:  python3 demos/03_elimination_plan.py
"""
import numpy as np

from dbnabs import bidiagonal, build_factor_graph, build_linear_gaussian, compile_plan, greedy_ordering, plan_cost

chain = build_linear_gaussian(bidiagonal(4), [0.2] * 4)
fg = build_factor_graph(chain)
order = greedy_ordering(fg)
print("summation order, outermost first:", [f"zbar{i + 1}" for i in order.kappa])
print("CPD order, outermost first:      ", [f"T{j + 1}" for j in order.functions])

plan = compile_plan(fg, order, counts=(20,) * 4)
print(plan.describe())

# a dense phi collapses into one cluster and a much bigger table
dense = build_linear_gaussian(np.full((4, 4), 0.2), [0.2] * 4)
fgd = build_factor_graph(dense)
dense_plan = compile_plan(fgd, greedy_ordering(fgd), counts=(20,) * 4)
print(dense_plan.describe())

for name, p in (("chain", plan), ("dense", dense_plan)):
    c = plan_cost(p, horizon=10)
    print(f"{name}: {c['operations']:.2e} operations over 10 steps, {c['marginals']} stored entries")
