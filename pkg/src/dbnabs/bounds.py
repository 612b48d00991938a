"""Lipschitz data and abstraction error bounds.

Kernel sensitivities ``d[i, j]`` bound how fast kernel ``j`` changes with
``s_i``.  Weighting by the safe-interval lengths gives arc weights whose
row sums (out-weights) drive the per-dimension bound and whose total
``kappa`` is the Lipschitz constant of the value functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ValidationError
from .model import ProcessModel, SafeSet

SQRT_2PI_E = math.sqrt(2.0 * math.pi * math.e)

POWER_TOL = 1e-10
POWER_MAX_ITER = 200_000


@dataclass(frozen=True, eq=False)
class LipschitzData:
    d: np.ndarray
    w: np.ndarray
    out_weights: np.ndarray
    in_weights: np.ndarray
    kappa: float


@dataclass(frozen=True)
class ErrorReport:
    set_term: float
    grid_term: float
    global_grid_term: float
    per_dimension: tuple[float, ...]

    @property
    def total(self) -> float:
        return self.set_term + self.grid_term

    def as_dict(self) -> dict:
        return {
            "set_term": self.set_term,
            "grid_term": self.grid_term,
            "global_grid_term": self.global_grid_term,
            "per_dimension": list(self.per_dimension),
            "total": self.total,
        }


@dataclass(frozen=True)
class NormBounds:
    entrywise_one_norm: float
    induced_two_norm: float
    lower_holds: bool
    upper_holds: bool
    sparsity_bound: float

    @property
    def equivalence_check(self) -> bool:
        """Both sides of ``n |phi|_2 <= |phi|_1 <= n sqrt(n) |phi|_2``."""
        return self.lower_holds and self.upper_holds


def lipschitz_linear_gaussian(model: ProcessModel) -> np.ndarray:
    """``d[i, j] = |a_ji| / (sigma_j^2 sqrt(2 pi e))``.

    The peak slope of a Gaussian density in its mean is
    ``1 / (sigma^2 sqrt(2 pi e))``; the chain rule contributes ``|a_ji|``.
    """
    if not model.is_linear_gaussian:
        raise ValidationError("closed-form Lipschitz constants need a linear-Gaussian model")
    return np.abs(model.phi).T / (model.sigma[None, :] ** 2 * SQRT_2PI_E)


def lipschitz_constants(model: ProcessModel) -> np.ndarray:
    if model.is_linear_gaussian:
        return lipschitz_linear_gaussian(model)
    if model.lipschitz is None:
        raise ValidationError("generic-kernel models must declare their Lipschitz constants")
    return np.array(model.lipschitz)


def weights(d, lengths) -> LipschitzData:
    """Arc weights ``w[i, j] = d[i, j] * L(D_j)``.

    ``lengths`` may be the interval lengths, a SafeSet, or a partition.
    """
    d = np.array(d, dtype=float)
    if isinstance(lengths, SafeSet):
        lengths = lengths.lengths
    elif hasattr(lengths, "safe_set"):
        lengths = lengths.safe_set.lengths
    lengths = np.asarray(lengths, dtype=float)
    if np.any(d < 0):
        raise ValidationError("Lipschitz constants must be nonnegative")
    if d.shape != (lengths.size, lengths.size):
        raise ValidationError("d must be n x n with one length per dimension")
    w = d * lengths[None, :]
    out_w = w.sum(axis=1)
    in_w = w.sum(axis=0)
    for a in (d, w, out_w, in_w):
        a.setflags(write=False)
    return LipschitzData(d=d, w=w, out_weights=out_w, in_weights=in_w, kappa=float(in_w.sum()))


def _check_set_term(M: float, sym_diff: float) -> float:
    if M < 0 or sym_diff < 0:
        raise ValidationError("M and L(A sym-diff Abar) must be nonnegative")
    return M * sym_diff


def dbn_error(lip: LipschitzData, horizon: int, deltas, M: float = 0.0, sym_diff: float = 0.0) -> ErrorReport:
    """Per-dimension bound ``M N L(sym-diff) + N sum_i O_i delta_i``.

    The global (single-diameter) variant uses ``delta = sqrt(sum delta_i^2)``,
    the diameter of a grid cell.
    """
    deltas = np.asarray(deltas, dtype=float)
    if horizon < 0 or np.any(deltas < 0):
        raise ValidationError("horizon and diameters must be nonnegative")
    per_dim = horizon * lip.out_weights * deltas
    set_term = horizon * _check_set_term(M, sym_diff)
    diameter = float(np.sqrt(np.sum(deltas**2)))
    return ErrorReport(
        set_term=set_term,
        grid_term=float(np.sum(per_dim)),
        global_grid_term=horizon * lip.kappa * diameter,
        per_dimension=tuple(float(x) for x in per_dim),
    )


def two_norm(matrix, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """Largest singular value by power iteration on ``M^T M``.

    Starts from the all-ones vector; if that is annihilated, falls back to
    the standard basis vectors in order.
    """
    M = np.asarray(matrix, dtype=float)
    if M.size == 0 or not np.any(M):
        return 0.0
    gram = M.T @ M
    starts = [np.ones(M.shape[1])] + [e for e in np.eye(M.shape[1])]
    for v in starts:
        v = v / np.linalg.norm(v)
        w = gram @ v
        if np.linalg.norm(w) == 0:
            continue
        lam = float(v @ w)
        for _ in range(max_iter):
            v = w / np.linalg.norm(w)
            w = gram @ v
            new = float(v @ w)
            if abs(new - lam) <= tol * abs(new):
                return math.sqrt(new)
            lam = new
        raise ConvergenceError("power iteration did not converge")
    return 0.0


def aklp_grid_coefficient(model: ProcessModel, A: SafeSet) -> float:
    """Factor multiplying ``N * delta`` in the explicit-chain bound."""
    if not model.is_linear_gaussian:
        raise ValidationError("the explicit-chain bound is defined for linear-Gaussian models")
    scaled = model.phi / model.sigma[:, None]
    n = model.n
    lead = math.exp(-0.5) / (math.sqrt(2.0 * math.pi) ** n * float(np.prod(model.sigma)))
    return lead * two_norm(scaled) * A.volume


def aklp_error(model: ProcessModel, A: SafeSet, horizon: int, delta: float, M: float = 0.0, sym_diff: float = 0.0) -> float:
    """Bound for the explicit Markov-chain abstraction with cell diameter ``delta``."""
    if horizon < 0 or delta < 0:
        raise ValidationError("horizon and diameter must be nonnegative")
    return horizon * _check_set_term(M, sym_diff) + horizon * aklp_grid_coefficient(model, A) * delta


def aklp_bins(model: ProcessModel, A: SafeSet, horizon: int, eps: float, set_term: float = 0.0) -> tuple[int, ...]:
    """Bins per dimension for hypercube cells meeting ``eps`` under the explicit-chain bound."""
    if not eps > 0:
        raise ValidationError("error budget must be positive")
    budget = eps - set_term
    if budget <= 0:
        raise ValidationError("set term already uses the whole budget")
    rate = horizon * aklp_grid_coefficient(model, A)
    if rate == 0:
        return (1,) * A.n
    side = budget / rate / math.sqrt(A.n)
    return tuple(max(1, math.ceil(L / side)) for L in A.lengths)


def aklp_costs(bins_per_dim: float, n: int, horizon: int, convention: str = "per-step") -> dict:
    """Storage and arithmetic for an explicit ``m^n``-state chain.

    ``convention="per-step"`` counts one multiply and one add per
    transition entry per Bellman step, ``2 N m^(2n)``.  ``"table"`` also
    counts building each entry as a product of ``n`` per-dimension
    factors (``n - 1`` multiplies), ``(2N + n - 1) m^(2n)``.
    """
    marginals = float(bins_per_dim) ** (2 * n)
    if convention == "per-step":
        ops = 2.0 * horizon * marginals
    elif convention == "table":
        ops = (2.0 * horizon + n - 1) * marginals
    else:
        raise ValidationError(f"unknown cost convention {convention!r}")
    return {"marginals": marginals, "operations": ops}


def norm_bounds(phi) -> NormBounds:
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise ValidationError("norm bounds need a square matrix")
    n = phi.shape[0]
    one = float(np.abs(phi).sum())
    two = two_norm(phi)
    r = np.abs(phi).sum(axis=1)
    c = np.abs(phi).sum(axis=0)
    rows, cols = np.nonzero(phi)
    sparsity = float(np.sqrt(np.max(r[rows] * c[cols]))) if rows.size else 0.0
    # relative slack for the power-iteration tolerance
    slack = 1e-9 * max(one, 1.0)
    return NormBounds(
        entrywise_one_norm=one,
        induced_two_norm=two,
        lower_holds=n * two <= one + slack,
        upper_holds=one <= n * math.sqrt(n) * two + slack,
        sparsity_bound=sparsity,
    )
