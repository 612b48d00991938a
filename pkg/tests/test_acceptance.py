"""Acceptance checks, one test per criterion.

Each test logs a single PASS/FAIL line (collected in the terminal summary)
and then asserts, so a failing criterion shows up both ways.
"""
import math
import time

import numpy as np
import pytest

from dbnabs import (
    ResourceCapError,
    SafeSet,
    aklp_costs,
    bidiagonal,
    build_dbn,
    build_factor_graph,
    build_linear_gaussian,
    check_dense,
    check_sum_product,
    compare,
    dbn_error,
    dumps_dbn,
    grid_partition,
    greedy_ordering,
    lipschitz_constants,
    loads_dbn,
    lookup,
    monte_carlo,
    norm_bounds,
    quadrature_reference,
    size_from_budget,
    weights,
)

# Reference comparison table for the bidiagonal family, n = 1..8
# (alpha = 1, sigma = 0.2, N = 10, eps = 0.2).
TABLE_BINS_AKLP = [1.2e3, 1.1e4, 6.0e4, 2.9e5, 1.3e6, 5.8e6, 2.5e7, 1.1e8]
TABLE_BINS_DBN = [1.2e3, 3.6e3, 6.0e3, 8.5e3, 1.1e4, 1.3e4, 1.6e4, 1.8e4]
TABLE_MARG_AKLP = [1.5e6, 1.5e16, 4.8e28, 4.8e43, 1.5e61, 1.5e81, 4.3e103, 3.5e128]
TABLE_MARG_DBN = [1.5e6, 4.8e10, 4.4e11, 1.8e12, 5.2e12, 1.2e13, 2.3e13, 4.2e13]
TABLE_OPS_AKLP = [2.9e7, 3.1e17, 1.0e30, 1.1e45, 3.7e62, 3.7e82, 1.1e105, 9.5e129]
TABLE_OPS_DBN = [2.9e7, 1.9e12, 8.0e16, 3.5e21, 1.7e26, 8.9e30, 5.2e35, 3.4e40]

GOLDEN_SCALAR = 0.989212077


def two_sig_figs_match(ours, reference):
    """``ours`` rounds to ``reference`` at two significant figures."""
    exp = math.floor(math.log10(reference))
    return abs(ours - reference) <= 0.05 * 10**exp * (1 + 1e-9)


def ratio(a, b):
    return max(a / b, b / a)


@pytest.fixture(scope="module")
def table_report():
    start = time.perf_counter()
    report = compare("bidiagonal", range(1, 9), alpha=1.0, sigma=0.2, horizon=10, eps=0.2)
    return report, time.perf_counter() - start


def test_criterion_1_bins_per_dimension(table_report, acceptance_log):
    report, elapsed = table_report
    bad = []
    for r, a, d in zip(report.rows, TABLE_BINS_AKLP, TABLE_BINS_DBN):
        if not two_sig_figs_match(r.aklp.bins_per_dim, a):
            bad.append(f"AKLP n={r.n}: {r.aklp.bins_per_dim} vs {a:.1e}")
        if not two_sig_figs_match(r.dbn.bins_per_dim, d):
            bad.append(f"DBN n={r.n}: {r.dbn.bins_per_dim} vs {d:.1e}")
    ok = not bad and elapsed < 1.0
    acceptance_log(1, ok, f"16/16 bins/dim entries at 2 s.f. in {elapsed:.3f}s" if ok else f"{bad} time {elapsed:.3f}s")
    assert ok


def test_criterion_2_marginals(table_report, acceptance_log):
    report, _ = table_report
    bad = []
    worst = 1.0
    for r, a, d in zip(report.rows, TABLE_MARG_AKLP, TABLE_MARG_DBN):
        if not two_sig_figs_match(r.dbn.marginals, d):
            bad.append(f"DBN n={r.n}: {r.dbn.marginals:.3e} vs {d:.1e}")
        worst = max(worst, ratio(r.aklp.marginals, a))
        if ratio(r.aklp.marginals, a) > 1.1:
            bad.append(f"AKLP n={r.n}: {r.aklp.marginals:.3e} vs {a:.1e}")
    ok = not bad
    acceptance_log(2, ok, f"DBN 8/8 at 2 s.f., AKLP worst factor {worst:.3f} (<= 1.1)" if ok else str(bad))
    assert ok


def test_criterion_3_operations(table_report, acceptance_log):
    report, _ = table_report
    dbn_worst = max(ratio(r.dbn.operations, p) for r, p in zip(report.rows, TABLE_OPS_DBN))
    # the stated explicit-chain cost model: one multiply and one add per
    # transition entry per step
    aklp = [aklp_costs(r.aklp.bins_per_dim, r.n, 10, "per-step")["operations"] for r in report.rows]
    aklp_ratios = [ratio(a, p) for a, p in zip(aklp, TABLE_OPS_AKLP)]
    aklp_bad = [f"n={n}: x{q:.3f}" for n, q in zip(range(1, 9), aklp_ratios) if q > 1.2]
    chain = all(
        math.isclose(r.dbn.operations, 2 * r.n * r.dbn.bins_per_dim ** (r.n + 1) * 10, rel_tol=1e-12)
        for r in report.rows
    )
    ok = dbn_worst <= 1.2 and chain and not aklp_bad
    detail = f"DBN worst factor {dbn_worst:.3f}, chain closed form {'holds' if chain else 'broken'}; "
    detail += "AKLP 2*N*m^(2n) " + (f"exceeds factor 1.2 at {', '.join(aklp_bad)}" if aklp_bad else "within 1.2")
    acceptance_log(3, ok, detail)
    assert ok


def test_criterion_4_oracle_equivalence(acceptance_log):
    model = build_linear_gaussian(bidiagonal(3), [0.2] * 3)
    A = SafeSet([-1.0] * 3, [1.0] * 3)
    start = time.perf_counter()
    dbn = build_dbn(model, A, (5, 5, 5))
    a = check_sum_product(dbn, 5).table.values
    b = check_dense(dbn, 5).table.values
    elapsed = time.perf_counter() - start
    err = float(np.max(np.abs(a - b)))
    ok = a.size == 125 and err <= 1e-12 and elapsed < 10
    acceptance_log(4, ok, f"max |sum-product - dense| = {err:.2e} over {a.size} cells in {elapsed:.3f}s")
    assert ok


SOUNDNESS_INSTANCES = [
    ("1-D", [[0.8]], [0.2]),
    ("2-D", [[0.8, 0.0], [0.5, 0.8]], [0.2, 0.2]),
]


def test_criterion_5_error_bound_soundness(acceptance_log):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    outcomes = []
    ok = True
    for name, phi, sigma in SOUNDNESS_INSTANCES:
        model = build_linear_gaussian(phi, sigma)
        n = model.n
        A = SafeSet([-1.0] * n, [1.0] * n)
        reference = quadrature_reference(model, A, 10)
        states = rng.uniform(-1.0, 1.0, size=(25, n))
        truth = reference.values(states, 0)
        lip = weights(lipschitz_constants(model), A)
        for eps in (0.5, 0.1):
            counts = size_from_budget(model, A, 10, eps)
            try:
                dbn = build_dbn(model, A, counts)
                result = check_sum_product(dbn, 10)
            except ResourceCapError as exc:
                ok = False
                outcomes.append(f"{name} eps={eps}: {counts[0]} bins/dim not runnable ({exc})")
                continue
            bound = dbn_error(lip, 10, grid_partition(A, counts).deltas).total
            gap = max(abs(lookup(result, s) - t) for s, t in zip(states, truth))
            good = gap <= bound + 2e-6
            ok &= good
            outcomes.append(f"{name} eps={eps}: gap {gap:.2e} <= {bound:.3f}" if good else f"{name} eps={eps}: gap {gap:.2e} > {bound:.3f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    acceptance_log(5, ok, "; ".join(outcomes) + f"; {elapsed:.1f}s")
    assert ok


def test_criterion_6_value_function_lipschitz(acceptance_log):
    rng = np.random.default_rng(7)
    worst = -np.inf
    for name, phi, sigma in SOUNDNESS_INSTANCES:
        model = build_linear_gaussian(phi, sigma)
        n = model.n
        A = SafeSet([-1.0] * n, [1.0] * n)
        kappa = weights(lipschitz_constants(model), A).kappa
        reference = quadrature_reference(model, A, 10)
        s = rng.uniform(-1, 1, size=(100, n))
        t = rng.uniform(-1, 1, size=(100, n))
        dist = np.linalg.norm(s - t, axis=1)
        for k in range(11):
            diff = np.abs(reference.values(s, k) - reference.values(t, k))
            worst = max(worst, float(np.max(diff - kappa * dist)))
    ok = worst <= 1e-3
    acceptance_log(6, ok, f"max(|W_k(s)-W_k(s')| - kappa*|s-s'|) = {worst:.3e} over 2 x 11 x 100 pairs")
    assert ok


def test_criterion_7_greedy_ordering(acceptance_log):
    model = build_linear_gaussian(bidiagonal(4), [0.2] * 4)
    order = greedy_ordering(build_factor_graph(model))
    kappa = tuple(f"zbar{i + 1}" for i in order.kappa)
    funcs = tuple(f"T{j + 1}" for j in order.functions)
    ok = kappa == ("zbar4", "zbar3", "zbar2", "zbar1") and funcs == ("T4", "T3", "T2", "T1")
    acceptance_log(7, ok, f"kappa_f = {kappa}, e_f = {funcs}")
    assert ok


def test_criterion_8_norm_inequalities(acceptance_log):
    rng = np.random.default_rng(11)
    lower = upper = sparsity = 0
    example = None
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        phi = rng.normal(size=(n, n)) * (rng.random((n, n)) < rng.uniform(0.2, 1.0))
        nb = norm_bounds(phi)
        if not nb.lower_holds:
            lower += 1
            if example is None:
                example = (n, nb.entrywise_one_norm, nb.induced_two_norm)
        upper += not nb.upper_holds
        sparsity += nb.induced_two_norm > nb.sparsity_bound * (1 + 1e-9)
    ok = lower == upper == sparsity == 0
    detail = (
        f"violations over 1000 matrices: n*|P|_2 <= |P|_1: {lower}, "
        f"|P|_1 <= n*sqrt(n)*|P|_2: {upper}, sparsity bound: {sparsity}"
    )
    if example:
        n, one, two = example
        detail += f" (e.g. n={n}: n*|P|_2 = {n * two:.3f} > |P|_1 = {one:.3f})"
    acceptance_log(8, ok, detail)
    assert ok


def test_criterion_9_property_suites(acceptance_log):
    checks = {}
    rng = np.random.default_rng(5)

    stochastic = True
    bounded = monotone = True
    for _ in range(20):
        n = int(rng.integers(1, 4))
        phi = rng.normal(scale=0.6, size=(n, n)) * (rng.random((n, n)) < 0.7)
        model = build_linear_gaussian(phi, rng.uniform(0.05, 1.0, n))
        A = SafeSet(-rng.uniform(0.5, 2, n), rng.uniform(0.5, 2, n))
        dbn = build_dbn(model, A, tuple(int(c) for c in rng.integers(1, 7, n)))
        for cpd in dbn.cpds:
            stochastic &= bool(np.all(cpd.table >= 0) and np.allclose(cpd.table.sum(axis=-1), 1.0, atol=1e-12))
        hist = check_sum_product(dbn, 6, keep_history=True).history
        for h in hist:
            bounded &= bool(np.all(h.values >= -1e-15) and np.all(h.values <= 1 + 1e-12))
        for a, b in zip(hist, hist[1:]):
            monotone &= bool(np.all(a.values <= b.values + 1e-12))
        blob = dumps_dbn(dbn, {"seed": 5})
        back, _ = loads_dbn(blob)
        checks.setdefault("dump round-trip", True)
        checks["dump round-trip"] &= dumps_dbn(back, {"seed": 5}) == blob
        g = dbn.partition
        for i, dim in enumerate(g.dims):
            checks.setdefault("partition round-trip", True)
            checks["partition round-trip"] &= bool(np.all(dim.locate(dim.centers) == np.arange(dim.count)))
            checks["partition round-trip"] &= bool(np.all(dim.locate(dim.edges[:-1]) == np.arange(dim.count)))
    checks["CPD row-stochastic"] = stochastic
    checks["V_k in [0,1]"] = bounded
    checks["V_k <= V_k+1"] = monotone

    scalar = build_linear_gaussian([[0.8]], [0.2])
    A1 = SafeSet([-1.0], [1.0])
    runs = [monte_carlo(scalar, A1, 10, [0.0], 50_000, seed=9, chunk=c) for c in (50_000, 7_000)]
    checks["seeded Monte Carlo deterministic"] = runs[0] == runs[1]

    reference = quadrature_reference(scalar, A1, 10).value([0.0], 0)
    est = monte_carlo(scalar, A1, 10, [0.0], 10**6, seed=0)
    sd = est.half_width95 / 1.959963984540054
    checks["Monte Carlo within 3 sd of quadrature"] = abs(est.estimate - reference) <= 3 * sd
    checks["quadrature golden value"] = abs(reference - GOLDEN_SCALAR) <= 1e-9

    ok = all(checks.values())
    failing = [k for k, v in checks.items() if not v]
    detail = f"{len(checks)} suites green; MC {est.estimate:.6f} vs quadrature {reference:.6f} (sd {sd:.1e})"
    acceptance_log(9, ok, detail if ok else f"failing: {failing}")
    assert ok
