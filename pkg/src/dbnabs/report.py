"""Cost/error comparison between the DBN abstraction and an explicit chain."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .abstraction import count_marginals
from .bounds import aklp_bins, aklp_costs, aklp_error, dbn_error, lipschitz_constants, weights
from .errors import ValidationError
from .factor_graph import build_factor_graph, compile_plan, greedy_ordering, plan_cost
from .model import ProcessModel, SafeSet, build_linear_gaussian
from .partition import size_from_budget


def bidiagonal(n: int, value: float = 1.0) -> np.ndarray:
    """Lower bidiagonal matrix with every nonzero entry equal to ``value``."""
    return value * (np.eye(n) + np.eye(n, k=-1))


FAMILIES = {"bidiagonal": bidiagonal}


@dataclass(frozen=True)
class MethodCost:
    bins_per_dim: int
    marginals: float
    operations: float
    bound: float


@dataclass(frozen=True)
class CostRow:
    n: int
    dbn: MethodCost
    aklp: MethodCost


@dataclass(frozen=True)
class CostReport:
    config: dict
    rows: tuple[CostRow, ...]

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "rows": [
                {"n": r.n, "dbn": vars(r.dbn), "aklp": vars(r.aklp)}
                for r in self.rows
            ],
        }

    def table(self) -> str:
        cols = [str(r.n) for r in self.rows]
        def fmt(x):
            return f"{float(x):.1e}"
        body = [
            ("dimension n", "", cols),
            ("# bins/dim", "AKLP", [fmt(r.aklp.bins_per_dim) for r in self.rows]),
            ("", "DBN", [fmt(r.dbn.bins_per_dim) for r in self.rows]),
            ("# marginals", "AKLP", [fmt(r.aklp.marginals) for r in self.rows]),
            ("", "DBN", [fmt(r.dbn.marginals) for r in self.rows]),
            ("# operations", "AKLP", [fmt(r.aklp.operations) for r in self.rows]),
            ("", "DBN", [fmt(r.dbn.operations) for r in self.rows]),
        ]
        w0 = max(len(b[0]) for b in body)
        w1 = max(len(b[1]) for b in body)
        wc = max(len(c) for b in body for c in b[2])
        lines = []
        for label, method, cells in body:
            lines.append(f"{label:<{w0}}  {method:<{w1}}  " + "  ".join(f"{c:>{wc}}" for c in cells))
        return "\n".join(lines)


def compare_row(model: ProcessModel, A: SafeSet, horizon: int, eps: float, aklp_convention: str = "per-step") -> CostRow:
    n = model.n
    counts = size_from_budget(model, A, horizon, eps)
    fg = build_factor_graph(model)
    plan = compile_plan(fg, greedy_ordering(fg), counts)
    cost = plan_cost(plan, horizon)
    lip = weights(lipschitz_constants(model), A.lengths)
    deltas = A.lengths / np.asarray(counts)
    dbn = MethodCost(
        bins_per_dim=max(counts),
        marginals=float(count_marginals(model.parents, counts)),
        operations=float(cost["operations"]),
        bound=dbn_error(lip, horizon, deltas).total,
    )
    m = aklp_bins(model, A, horizon, eps)
    side = float(np.max(A.lengths / np.asarray(m)))
    acost = aklp_costs(max(m), n, horizon, aklp_convention)
    aklp = MethodCost(
        bins_per_dim=max(m),
        marginals=acost["marginals"],
        operations=acost["operations"],
        bound=aklp_error(model, A, horizon, side * np.sqrt(n)),
    )
    return CostRow(n, dbn, aklp)


def compare(
    family: str = "bidiagonal",
    dims=range(1, 9),
    alpha: float = 1.0,
    sigma: float = 0.2,
    horizon: int = 10,
    eps: float = 0.2,
    aklp_convention: str = "per-step",
) -> CostReport:
    if family not in FAMILIES:
        raise ValidationError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    rows = []
    for n in dims:
        model = build_linear_gaussian(FAMILIES[family](n), [sigma] * n)
        A = SafeSet([-alpha] * n, [alpha] * n)
        rows.append(compare_row(model, A, horizon, eps, aklp_convention))
    config = {
        "family": family,
        "dims": list(dims),
        "alpha": alpha,
        "sigma": sigma,
        "horizon": horizon,
        "epsilon": eps,
        "aklp_convention": aklp_convention,
    }
    return CostReport(config, tuple(rows))
