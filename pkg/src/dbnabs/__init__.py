"""Dynamic Bayesian network abstractions of continuous-state Markov processes.

Build a factored finite abstraction of a linear-Gaussian (or generic
conditionally factored) process over a box-shaped safe set, bound the
error it introduces, and compute finite-horizon invariance probabilities
by variable elimination over the abstraction's factor graph.
"""
from .abstraction import (
    Cpd,
    DiscreteDbn,
    build_cpd,
    build_dbn,
    count_marginals,
    dump_dbn,
    dumps_dbn,
    load_dbn,
    loads_dbn,
    marginal_count,
)
from .bounds import (
    ErrorReport,
    LipschitzData,
    NormBounds,
    aklp_bins,
    aklp_costs,
    aklp_error,
    dbn_error,
    lipschitz_constants,
    norm_bounds,
    two_norm,
    weights,
)
from .checker import (
    InvarianceResult,
    MonteCarloEstimate,
    QuadratureSolution,
    ValueTable,
    aggregate,
    check_dense,
    check_sum_product,
    dumps_values,
    loads_values,
    lookup,
    monte_carlo,
    quadrature_reference,
    transition_matrix,
)
from .errors import ConvergenceError, DbnError, ResourceCapError, ValidationError
from .factor_graph import (
    EliminationPlan,
    FactorGraph,
    Ordering,
    build_factor_graph,
    compile_plan,
    greedy_ordering,
    plan_cost,
)
from .model import (
    DependencyDag,
    Kernel,
    ModelKind,
    ProcessModel,
    SafeSet,
    build_generic,
    build_linear_gaussian,
    density_eval,
    dependency_dag,
    kernel_mass,
)
from .modelfile import ModelFile, load_model_file, parse_model_text
from .partition import (
    ABSORBED,
    DimensionPartition,
    GridPartition,
    abstraction_map,
    grid_partition,
    refinement_map,
    size_from_budget,
    uniform_partition,
)
from .report import CostReport, bidiagonal, compare

__version__ = "0.1.0"
