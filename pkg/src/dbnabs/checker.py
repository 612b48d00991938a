"""Finite-horizon probabilistic invariance.

Four routes to the same quantity:

* :func:`check_sum_product` runs the discrete Bellman recursion on the
  DBN by contracting CPDs along an elimination plan, never forming the
  joint transition matrix;
* :func:`check_dense` materializes that matrix (small grids only) and is
  the oracle for the first route;
* :func:`quadrature_reference` solves the continuous recursion by a
  Nystrom scheme for ``n <= 2``;
* :func:`monte_carlo` simulates trajectories.
"""
from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .abstraction import DiscreteDbn
from .bounds import ErrorReport
from .errors import ConvergenceError, ResourceCapError, ValidationError
from .factor_graph import EliminationPlan, build_factor_graph, compile_plan, greedy_ordering
from .model import ProcessModel, SafeSet
from .partition import ABSORBED, GridPartition

DEFAULT_DENSE_CAP = 10**8
DEFAULT_MEMORY_CAP = 10**8

VALUE_MAGIC = b"DBNV"
VALUE_VERSION = 1


@dataclass(frozen=True, eq=False)
class ValueTable:
    """Values over the grid, shape ``counts`` (C order, last dimension fastest)."""

    counts: tuple[int, ...]
    values: np.ndarray
    k: int = 0

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True, eq=False)
class InvarianceResult:
    table: ValueTable
    horizon: int
    method: str
    partition: GridPartition | None = None
    error: ErrorReport | None = None
    history: tuple[ValueTable, ...] = field(default=(), repr=False)

    def probability(self, s0) -> float:
        return lookup(self, s0)


def default_plan(dbn: DiscreteDbn) -> EliminationPlan:
    fg = build_factor_graph(dbn)
    return compile_plan(fg, greedy_ordering(fg), dbn.counts)


def _bellman_step(dbn: DiscreteDbn, plan: EliminationPlan, v_next: np.ndarray) -> np.ndarray:
    n = dbn.n
    # axis labels: z_i -> i, zbar_i -> n + i
    labels = [n + i for i in range(n)]
    current = v_next
    for step in plan.steps:
        operands = [current, labels]
        for j in step.cluster:
            operands += [dbn.cpds[j].transitions, list(dbn.parents[j]) + [n + j]]
        out = [i if kind == "z" else n + i for kind, i in step.scope]
        current = np.einsum(*operands, out, optimize=True)
        labels = out
    # indicator restriction is the identity on a box grid; broadcast any
    # current-state axis no CPD depends on
    present = [lab for lab in labels]
    order = sorted(range(len(present)), key=lambda a: present[a])
    current = np.transpose(current, order)
    shape = [dbn.counts[i] if i in present else 1 for i in range(n)]
    return np.broadcast_to(current.reshape(shape), dbn.counts).copy()


def check_sum_product(
    dbn: DiscreteDbn,
    horizon: int,
    plan: EliminationPlan | None = None,
    memory_cap: int = DEFAULT_MEMORY_CAP,
    keep_history: bool = False,
    error: ErrorReport | None = None,
) -> InvarianceResult:
    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    if plan is None:
        plan = default_plan(dbn)
    if plan.counts != dbn.counts or plan.parents != dbn.parents:
        raise ValidationError("elimination plan does not match the DBN")
    if plan.peak_memory > memory_cap:
        raise ResourceCapError(f"plan needs {plan.peak_memory} live entries, above the cap of {memory_cap}")
    v = np.ones(dbn.counts)
    history = [ValueTable(dbn.counts, v, horizon)]
    for k in range(horizon - 1, -1, -1):
        v = _bellman_step(dbn, plan, v)
        if keep_history:
            history.append(ValueTable(dbn.counts, v, k))
    table = ValueTable(dbn.counts, v, 0)
    return InvarianceResult(
        table=table,
        horizon=horizon,
        method="sum-product",
        partition=dbn.partition,
        error=error,
        history=tuple(reversed(history)) if keep_history else (),
    )


def transition_matrix(dbn: DiscreteDbn, dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Joint transition matrix over non-absorbing cells, rows indexed by current cell."""
    counts = dbn.counts
    cells = math.prod(counts)
    if cells * cells > dense_cap:
        raise ResourceCapError(f"dense matrix would hold {cells * cells} entries, above the cap of {dense_cap}")
    n = dbn.n
    P = np.ones(counts + counts)
    for j, cpd in enumerate(dbn.cpds):
        shape = [1] * (2 * n)
        for i in cpd.parents:
            shape[i] = counts[i]
        shape[n + j] = counts[j]
        P = P * cpd.transitions.reshape(shape)
    return P.reshape(cells, cells)


def check_dense(dbn: DiscreteDbn, horizon: int, dense_cap: int = DEFAULT_DENSE_CAP, keep_history: bool = False,
                error: ErrorReport | None = None) -> InvarianceResult:
    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    P = transition_matrix(dbn, dense_cap)
    v = np.ones(P.shape[0])
    history = [ValueTable(dbn.counts, v.reshape(dbn.counts), horizon)]
    for k in range(horizon - 1, -1, -1):
        v = P @ v
        if keep_history:
            history.append(ValueTable(dbn.counts, v.reshape(dbn.counts), k))
    return InvarianceResult(
        table=ValueTable(dbn.counts, v.reshape(dbn.counts), 0),
        horizon=horizon,
        method="dense",
        partition=dbn.partition,
        error=error,
        history=tuple(reversed(history)) if keep_history else (),
    )


def lookup(result: InvarianceResult, s0) -> float:
    if result.partition is None:
        raise ValidationError("result carries no partition to locate the initial state")
    cell = result.partition.cell_of(s0)
    if ABSORBED in cell:
        raise ValidationError(f"initial state {list(np.ravel(s0))} lies outside the safe set")
    return float(result.table.values[cell])


def aggregate(result: InvarianceResult, weights) -> float:
    """Probability under an initial distribution given as weights over grid cells."""
    w = np.asarray(weights, dtype=float)
    if w.shape != result.table.values.shape and w.size != result.table.values.size:
        raise ValidationError("one weight per grid cell is required")
    w = w.reshape(result.table.values.shape)
    if np.any(w < 0) or w.sum() > 1 + 1e-12:
        raise ValidationError("weights must be nonnegative and sum to at most one")
    return float(np.sum(w * result.table.values))


# --- value-table dump ---------------------------------------------------------


def dumps_values(table: ValueTable) -> bytes:
    buf = io.BytesIO()
    buf.write(VALUE_MAGIC)
    n = len(table.counts)
    buf.write(struct.pack("<II", VALUE_VERSION, n))
    buf.write(struct.pack(f"<{n}Q", *table.counts))
    buf.write(np.ascontiguousarray(table.values, dtype="<f8").tobytes())
    return buf.getvalue()


def loads_values(data: bytes) -> ValueTable:
    if data[:4] != VALUE_MAGIC:
        raise ValidationError("not a value-table dump (bad magic)")
    version, n = struct.unpack_from("<II", data, 4)
    if version != VALUE_VERSION:
        raise ValidationError(f"unsupported value-table version {version}")
    counts = struct.unpack_from(f"<{n}Q", data, 12)
    start = 12 + 8 * n
    size = math.prod(counts)
    if len(data) != start + 8 * size:
        raise ValidationError("value-table dump has the wrong length")
    values = np.frombuffer(data, dtype="<f8", offset=start).astype(float).reshape(counts)
    return ValueTable(tuple(counts), values, 0)


# --- continuous reference -----------------------------------------------------


def _nodes(lo: float, hi: float, points: int, rule: str):
    if rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(points)
        half = 0.5 * (hi - lo)
        return lo + half * (x + 1.0), w * half
    if rule == "trapezoid":
        x = np.linspace(lo, hi, points)
        w = np.full(points, (hi - lo) / (points - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        return x, w
    raise ValidationError(f"unknown quadrature rule {rule!r}")


class QuadratureSolution:
    """Continuous value functions from a fixed product quadrature rule.

    Values at the nodes are stored for every step; off-node values use
    the Nystrom extension ``V_k(s) = 1_A(s) sum_q w_q t(q | s) V_{k+1}(q)``,
    which is exact given the node values.
    """

    # kernel factors are cached when they fit in this many entries and
    # rebuilt chunk by chunk otherwise
    CACHE_ENTRIES = 2 * 10**7
    CHUNK_ENTRIES = 2 * 10**6

    def __init__(self, model: ProcessModel, A: SafeSet, horizon: int, points: int, rule: str):
        self.model, self.A, self.horizon = model, A, horizon
        self.points, self.rule = points, rule
        axes = [_nodes(A.lo[i], A.hi[i], points, rule) for i in range(model.n)]
        self._x = [a[0] for a in axes]
        self._w = [a[1] for a in axes]
        grids = np.meshgrid(*self._x, indexing="ij")
        self._states = np.stack([g.reshape(-1) for g in grids], axis=1)
        cached = None
        if self._states.shape[0] * points * model.n <= self.CACHE_ENTRIES:
            cached = self._kernel_factors(self._states)
        shape = (points,) * model.n
        self._values = [None] * (horizon + 1)
        self._values[horizon] = np.ones(shape)
        for k in range(horizon - 1, -1, -1):
            if cached is not None:
                nxt = self._apply(cached, self._values[k + 1])
            else:
                nxt = self._propagate(self._states, self._values[k + 1])
            self._values[k] = nxt.reshape(shape)

    def _kernel_factors(self, states: np.ndarray) -> list[np.ndarray]:
        """Per-dimension weighted kernel matrices, ``K_j[p, q] = w_q t_j(x_q | s_p)``."""
        m = self.model
        out = []
        for j in range(m.n):
            x, w = self._x[j], self._w[j]
            if m.is_linear_gaussian:
                mean = states @ m.phi[j]
                sd = m.sigma[j]
                z = (x[None, :] - mean[:, None]) / sd
                z *= z
                z *= -0.5
                dens = np.exp(z, out=z)
                dens *= 1.0 / (sd * math.sqrt(2.0 * math.pi))
            else:
                pdf = m.kernels[j].pdf
                pa = m.parents[j]
                dens = np.array([[pdf(xq, tuple(s[i] for i in pa)) for xq in x] for s in states])
            dens *= w[None, :]
            out.append(dens)
        return out

    def _apply(self, factors, v_next: np.ndarray) -> np.ndarray:
        if self.model.n == 1:
            return factors[0] @ v_next
        k1, k2 = factors
        return np.einsum("pa,pa->p", k1, k2 @ v_next.T)

    def _propagate(self, states: np.ndarray, v_next: np.ndarray) -> np.ndarray:
        """``_apply`` over ``states`` without holding every kernel row at once."""
        step = max(1, self.CHUNK_ENTRIES // (self.points * self.model.n))
        out = np.empty(states.shape[0])
        for start in range(0, states.shape[0], step):
            chunk = states[start : start + step]
            out[start : start + step] = self._apply(self._kernel_factors(chunk), v_next)
        return out

    def value(self, s, k: int = 0) -> float:
        s = np.asarray(s, dtype=float).reshape(1, -1)
        if s.shape[1] != self.model.n:
            raise ValidationError(f"state must have length {self.model.n}")
        if not 0 <= k <= self.horizon:
            raise ValidationError(f"step {k} outside 0..{self.horizon}")
        if not self.A.contains(s[0]):
            return 0.0
        if k == self.horizon:
            return 1.0
        return float(self._propagate(s, self._values[k + 1])[0])

    def values(self, states, k: int = 0) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if k == self.horizon:
            return np.array([1.0 if self.A.contains(s) else 0.0 for s in states])
        inside = np.array([self.A.contains(s) for s in states])
        out = self._propagate(states, self._values[k + 1])
        return np.where(inside, out, 0.0)

    __call__ = value


def _probe_states(A: SafeSet, per_dim: int = 5) -> np.ndarray:
    axes = [np.linspace(lo, hi, per_dim + 2)[1:-1] for lo, hi in zip(A.lo, A.hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def quadrature_reference(
    model: ProcessModel,
    A: SafeSet,
    horizon: int,
    points: int = 101,
    rule: str = "gauss",
    tol: float = 1e-6,
    max_points: int | None = None,
) -> QuadratureSolution:
    """Continuous value functions for ``n <= 2``, refined until converged.

    The rule is doubled until ``V_0`` changes by less than ``tol`` on a
    fixed probe grid over the safe set.
    """
    if model.n > 2:
        raise ValidationError("the quadrature reference supports n <= 2 only")
    if points < 101:
        raise ValidationError("use at least 101 quadrature points per dimension")
    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    if max_points is None:
        max_points = 16001 if model.n == 1 else 404
    probes = _probe_states(A)
    sol = QuadratureSolution(model, A, horizon, points, rule)
    prev = sol.values(probes)
    while True:
        points = 2 * points - 1 if rule == "trapezoid" else 2 * points
        if points > max_points:
            raise ConvergenceError(f"quadrature did not converge to {tol} within {max_points} points")
        refined = QuadratureSolution(model, A, horizon, points, rule)
        cur = refined.values(probes)
        if np.max(np.abs(cur - prev)) < tol:
            return refined
        sol, prev = refined, cur


# --- Monte Carlo -----------------------------------------------------------------


@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    half_width95: float
    samples: int
    successes: int


def _uniforms(seed: int, first: int, count: int, per_traj: int) -> np.ndarray:
    """Counter-addressed uniforms: trajectory ``t`` always gets the same draws."""
    words = -(-per_traj // 4) * 4
    gen = np.random.Philox(key=seed, counter=first * words // 4)
    raw = gen.random_raw(count * words).reshape(count, words)[:, :per_traj]
    return ((raw >> np.uint64(11)).astype(float) + 0.5) / 2.0**53


def monte_carlo(
    model: ProcessModel,
    A: SafeSet,
    horizon: int,
    s0,
    samples: int,
    seed: int = 0,
    chunk: int = 100_000,
) -> MonteCarloEstimate:
    s0 = np.asarray(s0, dtype=float).reshape(-1)
    if s0.size != model.n:
        raise ValidationError(f"initial state must have length {model.n}")
    if not A.contains(s0):
        raise ValidationError("initial state lies outside the safe set")
    if samples < 1:
        raise ValidationError("need at least one sample")
    if horizon == 0:
        return MonteCarloEstimate(1.0, 0.0, samples, samples)
    n = model.n
    per_traj = horizon * n
    successes = 0
    for first in range(0, samples, chunk):
        count = min(chunk, samples - first)
        u = _uniforms(seed, first, count, per_traj).reshape(count, horizon, n)
        s = np.broadcast_to(s0, (count, n)).copy()
        alive = np.ones(count, dtype=bool)
        for t in range(horizon):
            if model.is_linear_gaussian:
                s = s @ model.phi.T + special.ndtri(u[:, t, :]) * model.sigma
            else:
                s = _step_generic(model, s, u[:, t, :])
            alive &= np.all((s >= A.lo) & (s <= A.hi), axis=1)
        successes += int(alive.sum())
    p = successes / samples
    return MonteCarloEstimate(p, 1.959963984540054 * math.sqrt(p * (1.0 - p) / samples), samples, successes)


def _step_generic(model: ProcessModel, s: np.ndarray, u: np.ndarray) -> np.ndarray:
    nxt = np.empty_like(s)
    for j, k in enumerate(model.kernels):
        if k.quantile is None:
            raise ValidationError(f"kernel {j} has no quantile function; cannot simulate")
        for r in range(s.shape[0]):
            nxt[r, j] = k.quantile(u[r, j], tuple(s[r, i] for i in k.parents))
    return nxt
