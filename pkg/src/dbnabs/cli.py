"""Command-line front end.

Subcommands: ``abstract``, ``check``, ``compare``, ``mc`` and ``cost``.
Exit codes: 0 success, 2 validation error, 3 resource-cap error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time

import numpy as np

from .abstraction import DEFAULT_TABLE_CAP, MAGIC, build_dbn, dumps_dbn, load_dbn, marginal_count
from .bounds import dbn_error, lipschitz_constants, weights
from .checker import (
    DEFAULT_DENSE_CAP,
    DEFAULT_MEMORY_CAP,
    check_dense,
    check_sum_product,
    default_plan,
    dumps_values,
    lookup,
    monte_carlo,
)
from .errors import ConvergenceError, ResourceCapError, ValidationError
from .factor_graph import build_factor_graph, compile_plan, greedy_ordering, plan_cost
from .modelfile import ModelFile, load_model_file
from .partition import size_from_budget
from .report import compare

EXIT_OK, EXIT_VALIDATION, EXIT_RESOURCE = 0, 2, 3


def _emit(obj, out=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        _atomic_write(out, text.encode("utf-8"))
    else:
        sys.stdout.write(text)
    return text


def _atomic_write(path, data: bytes) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _counts(mf: ModelFile) -> tuple[int, ...]:
    if mf.bins_per_dim is not None:
        return mf.bins_per_dim
    return size_from_budget(mf.model, mf.safe_set, mf.horizon, mf.epsilon)


def _bounds(model, A, horizon, partition) -> dict:
    lip = weights(lipschitz_constants(model), A.lengths)
    report = dbn_error(lip, horizon, partition.deltas)
    out = report.as_dict()
    out["kappa"] = lip.kappa
    out["out_weights"] = [float(x) for x in lip.out_weights]
    return out


def _parse_state(text: str, n: int) -> np.ndarray:
    try:
        s = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise ValidationError(f"--init must be {n} comma-separated numbers") from None
    if s.size != n:
        raise ValidationError(f"--init must be {n} comma-separated numbers")
    return s


def _config(mf: ModelFile) -> dict:
    return {key: mf.raw[key] for key in sorted(mf.raw)}


def cmd_abstract(args) -> int:
    mf = load_model_file(args.model)
    counts = _counts(mf)
    dbn = build_dbn(mf.model, mf.safe_set, counts, table_cap=args.table_cap)
    meta = {"horizon": mf.horizon, "config": _config(mf)}
    bounds = _bounds(mf.model, mf.safe_set, mf.horizon, dbn.partition)
    sidecar = {
        "config": meta["config"],
        "bins_per_dim": list(counts),
        "bounds": bounds,
        "costs": {
            "marginals": marginal_count(dbn),
            "marginals_with_absorbing": marginal_count(dbn, include_absorbing=True),
        },
    }
    sidecar_text = json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    _atomic_write(args.out, dumps_dbn(dbn, meta))
    _atomic_write(args.out + ".report.json", sidecar_text.encode("utf-8"))
    return EXIT_OK


def _load_for_check(path, table_cap):
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        dbn, meta = load_dbn(path)
        if "horizon" not in meta:
            raise ValidationError("dump carries no horizon; re-create it with 'abstract'")
        return dbn, meta["horizon"], meta.get("config", {})
    mf = load_model_file(path)
    dbn = build_dbn(mf.model, mf.safe_set, _counts(mf), table_cap=table_cap)
    return dbn, mf.horizon, _config(mf)


def cmd_check(args) -> int:
    dbn, horizon, config = _load_for_check(args.model, args.table_cap)
    s0 = _parse_state(args.init, dbn.n) if args.init else None
    if s0 is not None and not dbn.safe_set.contains(s0):
        raise ValidationError(f"--init {args.init} lies outside the safe set")
    bounds = _bounds(dbn.model, dbn.safe_set, horizon, dbn.partition) if dbn.model else None
    plan = default_plan(dbn)
    start = time.perf_counter()
    if args.dense:
        result = check_dense(dbn, horizon, dense_cap=args.dense_cap)
    else:
        result = check_sum_product(dbn, horizon, plan=plan, memory_cap=args.memory_cap)
    elapsed = time.perf_counter() - start
    report = {
        "config": config,
        "method": result.method,
        "bins_per_dim": list(dbn.counts),
        "bounds": bounds,
        "costs": {**plan_cost(plan, horizon), "plan": plan.describe().splitlines()},
        "timing": {"check_seconds": elapsed},
    }
    if s0 is not None:
        report["probability"] = lookup(result, s0)
    if args.out:
        _atomic_write(args.out, dumps_values(result.table))
    _emit(report, args.report)
    return EXIT_OK


def _parse_dims(text: str) -> list[int]:
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(x) for x in text.split(",")]


def cmd_compare(args) -> int:
    report = compare(
        family=args.family,
        dims=_parse_dims(args.n),
        alpha=args.alpha,
        sigma=args.sigma,
        horizon=args.N,
        eps=args.epsilon,
        aklp_convention=args.aklp_convention,
    )
    payload = report.as_dict()
    if args.out:
        _atomic_write(args.out, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8"))
        _atomic_write(args.out + ".txt", (report.table() + "\n").encode("utf-8"))
    sys.stdout.write(report.table() + "\n")
    return EXIT_OK


def cmd_mc(args) -> int:
    mf = load_model_file(args.model)
    s0 = _parse_state(args.init, mf.model.n)
    est = monte_carlo(mf.model, mf.safe_set, mf.horizon, s0, args.samples, seed=args.seed)
    _emit(
        {
            "config": _config(mf),
            "init": [float(x) for x in s0],
            "seed": args.seed,
            "samples": est.samples,
            "successes": est.successes,
            "estimate": est.estimate,
            "half_width95": est.half_width95,
        },
        args.out,
    )
    return EXIT_OK


def cmd_cost(args) -> int:
    mf = load_model_file(args.model)
    counts = _counts(mf)
    fg = build_factor_graph(mf.model)
    plan = compile_plan(fg, greedy_ordering(fg), counts)
    sys.stdout.write(plan.describe() + "\n")
    cost = plan_cost(plan, mf.horizon)
    sys.stdout.write(
        f"bins/dim {list(counts)}  marginals {cost['marginals']:.3e}  "
        f"operations over N={mf.horizon}: {cost['operations']:.3e}\n"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dbnabs", description="DBN abstraction and invariance checking")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("abstract", help="build the DBN abstraction and write a DBNA dump")
    a.add_argument("model")
    a.add_argument("--out", required=True)
    a.add_argument("--table-cap", type=int, default=DEFAULT_TABLE_CAP)
    a.set_defaults(func=cmd_abstract)

    c = sub.add_parser("check", help="compute the invariance probability")
    c.add_argument("model", help="model file or DBNA dump")
    c.add_argument("--dense", action="store_true", help="use the explicit transition matrix")
    c.add_argument("--init", help="initial state 's_1,...,s_n'")
    c.add_argument("--out", help="write the value table as a DBNV dump")
    c.add_argument("--report", help="write the JSON report here instead of stdout")
    c.add_argument("--table-cap", type=int, default=DEFAULT_TABLE_CAP)
    c.add_argument("--memory-cap", type=int, default=DEFAULT_MEMORY_CAP)
    c.add_argument("--dense-cap", type=int, default=DEFAULT_DENSE_CAP)
    c.set_defaults(func=cmd_check)

    k = sub.add_parser("compare", help="cost/bin comparison against an explicit chain")
    k.add_argument("--family", default="bidiagonal")
    k.add_argument("--n", default="1..8", help="dimensions, 'a..b' or comma list")
    k.add_argument("--alpha", type=float, default=1.0)
    k.add_argument("--sigma", type=float, default=0.2)
    k.add_argument("--N", type=int, default=10)
    k.add_argument("--epsilon", type=float, default=0.2)
    k.add_argument("--aklp-convention", choices=("per-step", "table"), default="per-step")
    k.add_argument("--out", help="write JSON here and the text table to OUT.txt")
    k.set_defaults(func=cmd_compare)

    m = sub.add_parser("mc", help="Monte-Carlo estimate of the invariance probability")
    m.add_argument("model")
    m.add_argument("--init", required=True)
    m.add_argument("--samples", type=int, default=100_000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out")
    m.set_defaults(func=cmd_mc)

    s = sub.add_parser("cost", help="print the elimination plan and its cost")
    s.add_argument("model")
    s.set_defaults(func=cmd_cost)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ResourceCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValidationError, ConvergenceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
