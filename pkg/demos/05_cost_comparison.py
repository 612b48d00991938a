"""Bins, stored entries and arithmetic for n = 1..8 at a fixed error budget.

Run:  python3 demos/05_cost_comparison.py
"""
from dbnabs import compare

report = compare("bidiagonal", range(1, 9), alpha=1.0, sigma=0.2, horizon=10, eps=0.2)
print(report.table())
print()

# the explicit chain's arithmetic depends on what is counted; building each
# joint entry from n factors adds n - 1 multiplies per entry
alt = compare("bidiagonal", range(1, 9), aklp_convention="table")
for a, b in zip(report.rows, alt.rows):
    print(f"n={a.n}: per-step {a.aklp.operations:.2e}  with table build {b.aklp.operations:.2e}")
