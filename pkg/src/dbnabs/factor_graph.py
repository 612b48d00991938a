"""Factor graph of the Bellman summand and its elimination schedule.

Variables ``z_i`` (current bins) and ``zbar_i`` (next bins); function
nodes ``T_j`` (CPDs), ``V`` (next value table) and ``I`` (safe-set
indicator).  The greedy ordering clusters CPDs with equal live parent
sets and repeatedly picks the cluster with the fewest live parents; the
resulting schedule is compiled into a plan with predicted table sizes
and operation counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError


def z(i: int) -> tuple[str, int]:
    return ("z", i)


def zbar(i: int) -> tuple[str, int]:
    return ("zbar", i)


@dataclass(frozen=True)
class FactorGraph:
    n: int
    parents: tuple[tuple[int, ...], ...]

    @property
    def variables(self) -> tuple:
        return tuple(z(i) for i in range(self.n)) + tuple(zbar(i) for i in range(self.n))

    @property
    def functions(self) -> tuple:
        return tuple(("T", j) for j in range(self.n)) + (("V",), ("I",))

    @property
    def arcs(self) -> tuple:
        arcs = []
        for j, pa in enumerate(self.parents):
            arcs.extend((("T", j), z(i)) for i in pa)
            arcs.append((("T", j), zbar(j)))
        arcs.extend((("V",), zbar(i)) for i in range(self.n))
        arcs.extend((("I",), z(i)) for i in range(self.n))
        return tuple(arcs)

    def neighbours(self, node) -> tuple:
        return tuple(v for f, v in self.arcs if f == node)


def build_factor_graph(structure) -> FactorGraph:
    """Factor graph from anything exposing ``parents`` (DBN, DAG, model) or a parent list."""
    parents = getattr(structure, "parents", structure)
    parents = tuple(tuple(sorted(int(i) for i in pa)) for pa in parents)
    n = len(parents)
    if any(not 0 <= i < n for pa in parents for i in pa):
        raise ValidationError("parent index out of range")
    return FactorGraph(n, parents)


@dataclass(frozen=True)
class Ordering:
    """Greedy schedule, outermost sum first.

    ``clusters[k]`` are the CPD indices multiplied at position ``k`` and
    ``groups[k]`` the ``zbar`` indices summed there.  ``stretched[k]``
    lists current-state variables that had been stretched into the
    intermediate's arguments and are absorbed by this cluster.
    """

    clusters: tuple[tuple[int, ...], ...]
    groups: tuple[tuple[int, ...], ...]
    stretched: tuple[tuple[int, ...], ...]

    @property
    def kappa(self) -> tuple[int, ...]:
        """Flattened summation order over ``zbar`` indices."""
        return tuple(i for g in self.groups for i in g)

    @property
    def functions(self) -> tuple[int, ...]:
        return tuple(j for c in self.clusters for j in c)


def greedy_ordering(fg: FactorGraph) -> Ordering:
    live_z = set(range(fg.n))                       # U1
    live_children = {zbar(i) for i in range(fg.n)}  # U2, may gain stretched z nodes
    live_t = set(range(fg.n))                       # U3 (ungrouped)
    clusters, groups, stretched = [], [], []

    # Loop on U3 rather than U1: CPDs with no live parents (e.g. phi = 0)
    # never shrink U1 and must still be scheduled.
    while live_t:
        classes: dict[frozenset, list[int]] = {}
        for j in sorted(live_t):
            pa = frozenset(i for i in fg.parents[j] if i in live_z)
            classes.setdefault(pa, []).append(j)
        pa_f, members = min(classes.items(), key=lambda kv: (len(kv[0]), min(kv[1])))
        adjacent = set()
        for j in members:
            adjacent.add(zbar(j))
            adjacent.update(z(i) for i in fg.parents[j])
        ch_f = adjacent & live_children
        clusters.insert(0, tuple(members))
        groups.insert(0, tuple(sorted(i for kind, i in ch_f if kind == "zbar")))
        stretched.insert(0, tuple(sorted(i for kind, i in ch_f if kind == "z")))
        live_z -= pa_f
        live_children = (live_children | {z(i) for i in pa_f}) - ch_f
        live_t -= set(members)
    return Ordering(tuple(clusters), tuple(groups), tuple(stretched))


@dataclass(frozen=True)
class PlanStep:
    cluster: tuple[int, ...]
    eliminated: tuple[int, ...]
    scope: tuple                 # variables of the intermediate produced
    table_size: int
    operations: int


@dataclass(frozen=True)
class EliminationPlan:
    n: int
    counts: tuple[int, ...]
    parents: tuple[tuple[int, ...], ...]
    steps: tuple[PlanStep, ...]   # innermost first
    final_scope: tuple

    @property
    def operations(self) -> int:
        """Arithmetic per Bellman iteration."""
        return sum(s.operations for s in self.steps)

    @property
    def peak_memory(self) -> int:
        """Largest sum of simultaneously live intermediate tables (input + output)."""
        live = math.prod(self.counts)  # V_next
        peak = live
        for s in self.steps:
            peak = max(peak, live + s.table_size)
            live = s.table_size
        return peak

    def describe(self) -> str:
        lines = []
        for k, s in enumerate(self.steps):
            cluster = ",".join(f"T{j + 1}" for j in s.cluster)
            group = ",".join(f"zbar{i + 1}" for i in s.eliminated)
            scope = ",".join(f"{kind}{i + 1}" for kind, i in s.scope)
            lines.append(
                f"step {k + 1}: cluster {{{cluster}}}  sum {{{group}}}  scope ({scope})  "
                f"size {s.table_size:.3e}  ops {s.operations:.3e}"
            )
        lines.append(f"per-iteration ops {self.operations:.3e}  peak memory {self.peak_memory:.3e}")
        return "\n".join(lines)


def _scope_key(v):
    return (0 if v[0] == "z" else 1, v[1])


def compile_plan(fg: FactorGraph, ordering: Ordering, counts) -> EliminationPlan:
    """Turn an outermost-first ordering into an innermost-first contraction schedule.

    Each step multiplies its CPDs into the running intermediate (initially
    the next value table over all ``zbar``) and sums out its group.  A step
    costs one multiply and one add per accumulated term.  The indicator is
    applied at the end as a free restriction that also broadcasts over
    any ``z`` no CPD depends on.
    """
    counts = tuple(int(c) for c in counts)
    if len(counts) != fg.n:
        raise ValidationError(f"need {fg.n} bin counts")
    used = sorted(j for c in ordering.clusters for j in c)
    if used != list(range(fg.n)):
        raise ValidationError("ordering must use every CPD exactly once")
    summed = sorted(ordering.kappa)
    if summed != list(range(fg.n)):
        raise ValidationError("ordering must sum every zbar exactly once")

    def size(vars_):
        return math.prod(counts[i] for _, i in vars_)

    scope = {zbar(i) for i in range(fg.n)}
    steps = []
    for cluster, group in zip(reversed(ordering.clusters), reversed(ordering.groups)):
        if sorted(group) != sorted(cluster):
            raise ValidationError(f"cluster {cluster} must sum exactly its own zbar variables")
        for j in cluster:
            scope.add(zbar(j))
            scope.update(z(i) for i in fg.parents[j])
        eliminated = {zbar(i) for i in group}
        scope -= eliminated
        table = size(scope)
        steps.append(
            PlanStep(
                cluster=tuple(cluster),
                eliminated=tuple(group),
                scope=tuple(sorted(scope, key=_scope_key)),
                table_size=table,
                operations=2 * table * size(eliminated),
            )
        )
    final = tuple(z(i) for i in range(fg.n))
    return EliminationPlan(n=fg.n, counts=counts, parents=fg.parents, steps=tuple(steps), final_scope=final)


def plan_cost(plan: EliminationPlan, horizon: int) -> dict:
    """Totals over ``horizon`` Bellman iterations plus CPD storage."""
    from .abstraction import count_marginals

    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    return {
        "operations": horizon * plan.operations,
        "peak_memory": plan.peak_memory,
        "marginals": count_marginals(plan.parents, plan.counts),
    }
