"""Continuous Markov processes with per-dimension kernel factorization.

The one-step density factorizes as a product of one conditional density
per dimension, ``t(sbar | s) = prod_j t_j(sbar_j | s_Pa(j))``.  Two kinds
of models are supported: linear-Gaussian systems ``s' = phi @ s + noise``
with diagonal noise, and generic models built from opaque per-dimension
kernel evaluators.
"""
from __future__ import annotations

import enum
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, ValidationError

SIMPSON_TOL = 1e-10
SIMPSON_MAX_DEPTH = 50
NORMALIZATION_TOL = 1e-6


class ModelKind(enum.Enum):
    LINEAR_GAUSSIAN = "LinearGaussian"
    GENERIC = "GenericKernels"


@dataclass(frozen=True)
class Kernel:
    """Conditional density of one dimension given its parents.

    ``pdf(sbar, parent_values)`` receives the parent values in the order
    of ``parents``.  ``support`` is the range used when checking that the
    density integrates to one.  ``quantile(u, parent_values)``, when
    given, lets the Monte-Carlo estimator sample the kernel.
    """

    parents: tuple[int, ...]
    pdf: Callable[[float, tuple[float, ...]], float]
    support: tuple[float, float] = (-math.inf, math.inf)
    quantile: Callable[[float, tuple[float, ...]], float] | None = None


@dataclass(frozen=True)
class SafeSet:
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_n, hi_n]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __init__(self, lo, hi):
        lo = np.array(lo, dtype=float).reshape(-1)
        hi = np.array(hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValidationError("safe set bounds must be non-empty and of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValidationError("safe set bounds must be finite")
        if np.any(lo >= hi):
            raise ValidationError("safe set needs lo_i < hi_i in every dimension")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self) -> int:
        return self.lo.size

    @property
    def lengths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def contains(self, s) -> bool:
        s = np.asarray(s, dtype=float)
        return bool(np.all(s >= self.lo) and np.all(s <= self.hi))

    def __eq__(self, other):
        if not isinstance(other, SafeSet):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))


@dataclass(frozen=True, eq=False)
class ProcessModel:
    n: int
    kind: ModelKind
    parents: tuple[tuple[int, ...], ...]
    phi_triplets: tuple[tuple[int, int, float], ...] = ()
    sigma: np.ndarray | None = None
    kernels: tuple[Kernel, ...] = ()
    # user-declared d_ij for generic kernels (sensitivity of kernel j to s_i)
    lipschitz: np.ndarray | None = None
    _phi: np.ndarray | None = field(default=None, repr=False)

    @property
    def phi(self) -> np.ndarray:
        if self.kind is not ModelKind.LINEAR_GAUSSIAN:
            raise ValidationError("phi is only defined for linear-Gaussian models")
        return self._phi

    @property
    def is_linear_gaussian(self) -> bool:
        return self.kind is ModelKind.LINEAR_GAUSSIAN

    def mean(self, j: int, parent_values: Sequence[float]) -> float:
        """Mean of dimension ``j``'s Gaussian kernel (linear-Gaussian only)."""
        row = self._phi[j]
        return float(sum(row[i] * v for i, v in zip(self.parents[j], parent_values)))


@dataclass(frozen=True)
class DependencyDag:
    """Two-layer DAG; arc ``(i, j)`` means current ``s_i`` feeds next ``sbar_j``."""

    n: int
    arcs: tuple[tuple[int, int], ...]

    @property
    def parents(self) -> tuple[tuple[int, ...], ...]:
        pa = [[] for _ in range(self.n)]
        for i, j in self.arcs:
            pa[j].append(i)
        return tuple(tuple(p) for p in pa)

    @property
    def children(self) -> tuple[tuple[int, ...], ...]:
        ch = [[] for _ in range(self.n)]
        for i, j in sorted(self.arcs):
            ch[i].append(j)
        return tuple(tuple(c) for c in ch)


def _as_dense_phi(phi, n: int | None = None) -> np.ndarray:
    if isinstance(phi, Mapping):
        if set(phi) != {"triplets"}:
            raise ValidationError("sparse phi must be given as {'triplets': [[i, j, value], ...]}")
        if n is None:
            raise ValidationError("sparse phi needs an explicit dimension n")
        dense = np.zeros((n, n))
        for entry in phi["triplets"]:
            if len(entry) != 3:
                raise ValidationError(f"triplet {entry!r} must have three entries")
            i, j, v = entry
            if not (isinstance(i, (int, np.integer)) and isinstance(j, (int, np.integer))):
                raise ValidationError(f"triplet indices must be integers, got {entry!r}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValidationError(f"triplet index out of range: {entry!r}")
            dense[i, j] += float(v)
        return dense
    if hasattr(phi, "toarray"):
        phi = phi.toarray()
    dense = np.array(phi, dtype=float)
    if dense.ndim == 0:
        dense = dense.reshape(1, 1)
    return dense


def build_linear_gaussian(phi, sigma) -> ProcessModel:
    """Model ``s(t+1) = phi s(t) + zeta(t)`` with ``zeta_j ~ N(0, sigma_j^2)``.

    ``phi`` may be a dense array, a scipy sparse matrix, or a
    ``{"triplets": [[i, j, value], ...]}`` mapping (0-based indices).
    """
    sigma = np.array(sigma, dtype=float).reshape(-1)
    phi = _as_dense_phi(phi, n=sigma.size)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise ValidationError(f"phi must be square, got shape {phi.shape}")
    n = phi.shape[0]
    if sigma.size != n:
        raise ValidationError(f"sigma has length {sigma.size}, expected {n}")
    if not np.all(np.isfinite(phi)):
        raise ValidationError("phi has non-finite entries")
    if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
        raise ValidationError("every sigma_j must be finite and positive")
    rows, cols = np.nonzero(phi)
    triplets = tuple((int(i), int(j), float(phi[i, j])) for i, j in zip(rows, cols))
    parents = tuple(tuple(int(i) for i in np.flatnonzero(phi[j])) for j in range(n))
    phi = phi.copy()
    phi.setflags(write=False)
    sigma.setflags(write=False)
    return ProcessModel(
        n=n,
        kind=ModelKind.LINEAR_GAUSSIAN,
        parents=parents,
        phi_triplets=triplets,
        sigma=sigma,
        _phi=phi,
    )


def build_generic(
    kernels: Sequence[Kernel],
    lipschitz=None,
    check_box: SafeSet | None = None,
    samples: int = 4,
    seed: int = 0,
) -> ProcessModel:
    """Model from opaque per-dimension kernels.

    Each kernel's normalization is checked by quadrature over its
    ``support`` at ``samples`` parent instantiations drawn uniformly from
    ``check_box`` (standard normal draws when no box is given).
    """
    kernels = tuple(kernels)
    n = len(kernels)
    if n == 0:
        raise ValidationError("need at least one kernel")
    for j, k in enumerate(kernels):
        if any(not 0 <= i < n for i in k.parents) or len(set(k.parents)) != len(k.parents):
            raise ValidationError(f"kernel {j} has invalid parent indices {k.parents}")
    kernels = tuple(
        Kernel(tuple(sorted(k.parents)), k.pdf, k.support, k.quantile)
        if tuple(sorted(k.parents)) != k.parents
        else k
        for k in kernels
    )
    parents = tuple(k.parents for k in kernels)

    d = None
    if lipschitz is not None:
        d = np.array(lipschitz, dtype=float)
        if d.shape != (n, n):
            raise ValidationError(f"lipschitz matrix must be {n}x{n}")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValidationError("lipschitz constants must be finite and nonnegative")
        for i in range(n):
            for j in range(n):
                if d[i, j] != 0 and i not in parents[j]:
                    raise ValidationError(
                        f"d[{i},{j}] is nonzero but {i} is not a parent of dimension {j}"
                    )
        d.setflags(write=False)

    rng = np.random.default_rng(seed)
    for j, k in enumerate(kernels):
        for _ in range(samples):
            if check_box is not None:
                vals = tuple(rng.uniform(check_box.lo[i], check_box.hi[i]) for i in k.parents)
            else:
                vals = tuple(rng.standard_normal(len(k.parents)))
            total, _ = integrate.quad(lambda x: k.pdf(x, vals), *k.support, limit=200)
            if abs(total - 1.0) > NORMALIZATION_TOL:
                raise ValidationError(
                    f"kernel {j} integrates to {total:.9g} at parents {vals}, not 1"
                )
    return ProcessModel(n=n, kind=ModelKind.GENERIC, parents=parents, kernels=kernels, lipschitz=d)


def dependency_dag(model: ProcessModel) -> DependencyDag:
    arcs = sorted(((i, j) for j in range(model.n) for i in model.parents[j]), key=lambda a: (a[1], a[0]))
    return DependencyDag(model.n, tuple(arcs))


def _parent_values(model: ProcessModel, j: int, parents) -> tuple[float, ...]:
    pa = model.parents[j]
    if isinstance(parents, Mapping):
        missing = [i for i in pa if i not in parents]
        if missing:
            raise ValidationError(f"missing parent values for dimensions {missing} of kernel {j}")
        vals = tuple(float(parents[i]) for i in pa)
    else:
        parents = np.asarray(parents, dtype=float).reshape(-1)
        if parents.size == model.n:
            vals = tuple(float(parents[i]) for i in pa)
        elif parents.size == len(pa):
            vals = tuple(float(v) for v in parents)
        else:
            raise ValidationError(
                f"kernel {j} needs {len(pa)} parent values or a full state of length {model.n}"
            )
    if not all(math.isfinite(v) for v in vals):
        raise ValidationError("parent values must be finite")
    return vals


def _check_index(model: ProcessModel, j: int) -> None:
    if not 0 <= j < model.n:
        raise ValidationError(f"dimension index {j} out of range for n={model.n}")


def density_eval(model: ProcessModel, j: int, sbar: float, parents) -> float:
    """Evaluate ``t_j(sbar | parents)``.

    ``parents`` is either a mapping ``{dimension: value}``, a full state
    vector, or the parent values in parent order.
    """
    _check_index(model, j)
    sbar = float(sbar)
    if math.isnan(sbar):
        raise ValidationError("sbar is NaN")
    vals = _parent_values(model, j, parents)
    if model.is_linear_gaussian:
        sd = model.sigma[j]
        z = (sbar - model.mean(j, vals)) / sd
        if math.isinf(z):
            return 0.0
        return math.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))
    return max(0.0, float(model.kernels[j].pdf(sbar, vals)))


def gaussian_mass(lo, hi, mean, sd):
    """Mass of ``N(mean, sd^2)`` on ``[lo, hi]``, vectorized.

    Uses the upper tail when the interval lies right of the mean so small
    masses keep their absolute accuracy.
    """
    za = (np.asarray(lo, dtype=float) - mean) / sd
    zb = (np.asarray(hi, dtype=float) - mean) / sd
    right = za > 0
    out = np.where(right, special.ndtr(-za) - special.ndtr(-zb), special.ndtr(zb) - special.ndtr(za))
    return np.maximum(out, 0.0)


def adaptive_simpson(f, a: float, b: float, tol: float = SIMPSON_TOL, max_depth: int = SIMPSON_MAX_DEPTH) -> float:
    """Adaptive Simpson quadrature with Richardson correction.

    Raises ConvergenceError when a panel still misses its tolerance at
    ``max_depth``.
    """
    if a == b:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - est
        if abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        elif depth >= max_depth:
            raise ConvergenceError(f"adaptive Simpson did not converge on [{lo}, {hi}]")
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
    return total


def kernel_mass(model: ProcessModel, j: int, interval, parents) -> float:
    """Probability that ``sbar_j`` lands in ``interval`` given the parents."""
    _check_index(model, j)
    a, b = (float(x) for x in interval)
    if math.isnan(a) or math.isnan(b):
        raise ValidationError("interval bounds are NaN")
    if a > b:
        raise ValidationError(f"interval [{a}, {b}] is reversed")
    if a == b:
        return 0.0
    vals = _parent_values(model, j, parents)
    if model.is_linear_gaussian:
        return float(gaussian_mass(a, b, model.mean(j, vals), model.sigma[j]))
    pdf = model.kernels[j].pdf
    return adaptive_simpson(lambda x: max(0.0, float(pdf(x, vals))), a, b)
