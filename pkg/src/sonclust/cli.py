"""Command line interface.

Exit codes: 0 on success, 1 on a domain failure (every experiment trial has
an empty lambda window, or a ``--strict`` check fails), 2 on usage or
malformed input.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .certificate import REFINE_MAX_ITERATIONS, check_sufficient
from .clusterpath import (
    AgglomerationError,
    check_agglomeration,
    compute_path,
    fusion_scale,
    lambda_grid,
    merge_tree,
)
from .core import InputError
from .io import (
    FormatError,
    document,
    dumps,
    load_model,
    partition_from_doc,
    read_dataset_csv,
    read_json,
    write_dataset_csv,
    write_labels_csv,
)
from .mixture import (
    INFEASIBLE_WINDOW,
    MIDPOINT,
    default_epsilon,
    lambda_lower_bound,
    lambda_upper_bound,
    min_mean_separation,
    run_recovery_experiment,
    sample_mixture,
    separation_bound,
)
from .solver import SolverConfig, solve
from .special import chi2_cdf


class UsageError(InputError):
    pass


def _manifest(args, started: float, inputs=(), outputs=()) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("func",)}
    return {
        "command": args.command,
        "parameters": {k: str(v) if isinstance(v, Path) else v for k, v in params.items()},
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "inputs": [str(p) for p in inputs if p is not None],
        "outputs": [str(p) for p in outputs if p is not None],
        "duration_seconds": round(time.perf_counter() - started, 6),
    }


def _emit(doc: dict, out) -> None:
    text = dumps(doc)
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _solver_config(args, lam: float) -> SolverConfig:
    delta = "auto" if args.delta is None else args.delta
    return SolverConfig(lam=lam, rho=args.rho, tol_primal=args.tol, tol_dual=args.tol,
                        max_iterations=args.max_iterations, cluster_delta=delta)


def parse_grid(spec: str, scale: float) -> list[float]:
    """``start:stop:count:geometric|linear``; a trailing ``D`` on an endpoint
    multiplies it by ``diam / n`` of the dataset."""
    parts = spec.split(":")
    if len(parts) != 4:
        raise UsageError(f"bad grid spec {spec!r}; expected start:stop:count:geometric|linear")

    def endpoint(text):
        text = text.strip()
        factor = 1.0
        if text.endswith("D"):
            text, factor = text[:-1] or "1", scale
        try:
            return float(text) * factor
        except ValueError:
            raise UsageError(f"bad grid endpoint {text!r}") from None

    try:
        count = int(parts[2])
    except ValueError:
        raise UsageError(f"bad grid count {parts[2]!r}") from None
    return lambda_grid(endpoint(parts[0]), endpoint(parts[1]), count, parts[3].strip())


def parse_cluster(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(" ", "").split(",") if tok]
    except ValueError:
        raise UsageError(f"bad cluster spec {text!r}; expected comma-separated indices") from None


def solution_doc(sol) -> dict:
    return document(
        "solution",
        **{"lambda": sol.lam},
        x_star=sol.x_star,
        partition=sol.partition.to_lists(),
        assignment=list(sol.partition.assignment),
        n_clusters=sol.partition.n_clusters,
        iterations=sol.iterations,
        primal_residual=sol.primal_residual,
        dual_residual=sol.dual_residual,
        objective=sol.objective_value,
        converged=sol.converged,
    )


def certificate_entry(result) -> dict:
    m = result.multipliers
    pairs = []
    cl = m.cluster
    for p, (i, j) in enumerate(zip(*np.triu_indices(len(cl), 1))):
        pairs.append({"i": cl[i], "j": cl[j], "z": m.z[p]})
    return {
        "cluster": list(cl),
        "status": result.status.value,
        "feasible": result.feasible,
        "max_norm": m.max_norm,
        "equality_residual": m.equality_residual,
        "iterations_used": result.iterations_used,
        "multipliers": pairs,
    }


def cmd_gen(args) -> int:
    started = time.perf_counter()
    model = load_model(args.model)
    ds, labels = sample_mixture(model, args.n, args.seed)
    labels_path = args.labels or args.out.with_name(args.out.stem + ".labels.csv")
    write_dataset_csv(args.out, ds, header=args.header)
    write_labels_csv(labels_path, labels)
    manifest_path = args.out.with_name(args.out.name + ".manifest.json")
    manifest = _manifest(args, started, [args.model], [args.out, labels_path])
    _emit(document("manifest", manifest=manifest), manifest_path)
    return 0


def cmd_solve(args) -> int:
    started = time.perf_counter()
    ds = read_dataset_csv(args.dataset, header=args.header)
    sol = solve(ds, _solver_config(args, args.lam))
    doc = solution_doc(sol)
    doc["manifest"] = _manifest(args, started, [args.dataset], [args.out])
    _emit(doc, args.out)
    if args.strict and not sol.converged:
        return 1
    return 0


def cmd_certify(args) -> int:
    started = time.perf_counter()
    ds = read_dataset_csv(args.dataset, header=args.header)
    lam = args.lam
    if args.from_solution is not None:
        sol_doc = read_json(args.from_solution)
        if not isinstance(sol_doc, dict):
            raise FormatError(f"{args.from_solution}:1: expected a solution object")
        clusters = partition_from_doc(sol_doc, args.from_solution).to_lists()
        if lam is None:
            lam = sol_doc.get("lambda")
    else:
        clusters = [parse_cluster(c) for c in args.cluster]
    if lam is None:
        raise UsageError("--lambda is required unless the solution file records one")
    results = [check_sufficient(ds, c, float(lam), max_iterations=args.max_iterations)
               for c in clusters]
    doc = document(
        "certificate",
        **{"lambda": float(lam)},
        certificates=[certificate_entry(r) for r in results],
        manifest=_manifest(args, started, [args.dataset, args.from_solution], [args.out]),
    )
    _emit(doc, args.out)
    if args.strict and not all(r.feasible for r in results):
        return 1
    return 0


def cmd_path(args) -> int:
    started = time.perf_counter()
    ds = read_dataset_csv(args.dataset, header=args.header)
    grid = parse_grid(args.lambda_grid, fusion_scale(ds))
    path = compute_path(ds, grid, _solver_config(args, grid[0]), refine_merges=args.refine)
    violations = check_agglomeration(path)
    dendro_path = args.dendrogram or args.out.with_name(args.out.stem + ".dendrogram.json")
    manifest = _manifest(args, started, [args.dataset], [args.out, dendro_path])

    doc = document(
        "path",
        lambdas=path.lambdas,
        partitions=[p.to_lists() for p in path.partitions],
        cluster_counts=path.cluster_counts,
        merge_events=[
            {"lambda_index": e.lambda_index, "lambda": path.lambdas[e.lambda_index],
             "lambda_refined": e.lambda_refined,
             "children": [list(c) for c in e.children], "parent": list(e.parent)}
            for e in path.merge_events
        ],
        solutions_meta=[vars(m) for m in path.solutions_meta],
        agglomeration={"holds": not violations,
                       "violations": [[k, k + 1] for k in violations]},
        manifest=manifest,
    )
    _emit(doc, args.out)
    try:
        tree = merge_tree(path)
        dendro = document(
            "dendrogram",
            leaves=[list(c) for c in tree.leaves],
            nodes=[{"lambda": node.lam, "children": [list(c) for c in node.children],
                    "parent": list(node.parent)} for node in tree.nodes],
            manifest=manifest,
        )
    except AgglomerationError as exc:
        dendro = document("dendrogram", leaves=None, nodes=None, error=str(exc), manifest=manifest)
    _emit(dendro, dendro_path)
    if args.strict and violations:
        return 1
    return 0


def cmd_bounds(args) -> int:
    started = time.perf_counter()
    model = load_model(args.model)
    eps = default_epsilon(model) if args.epsilon is None else args.epsilon
    lower = [lambda_lower_bound(model, m, args.theta, eps, args.n) for m in range(model.k)]
    upper = lambda_upper_bound(model, args.n) if model.k >= 2 else None
    doc = document(
        "bounds",
        n=args.n,
        theta=args.theta,
        epsilon=eps,
        d=model.d,
        chi2_cdf=chi2_cdf(args.theta, model.d),
        lambda_lower=lower,
        lambda_upper=upper,
        window_nonempty=None if upper is None else max(lower) < upper,
        separation_bound=separation_bound(model),
        min_mean_separation=min_mean_separation(model) if model.k >= 2 else None,
        manifest=_manifest(args, started, [args.model], [args.out]),
    )
    _emit(doc, args.out)
    return 0


def cmd_experiment(args) -> int:
    started = time.perf_counter()
    model = load_model(args.model)
    if args.lam == MIDPOINT:
        policy = MIDPOINT
    else:
        try:
            policy = float(args.lam)
        except ValueError:
            raise UsageError(f"--lambda must be a number or 'midpoint', got {args.lam!r}") from None
    reports = run_recovery_experiment(model, args.n, args.theta, args.epsilon, policy,
                                      args.trials, args.seed)
    doc = document(
        "recovery",
        reports=[dict(vars(r), recovered=r.recovered) for r in reports],
        recovered=sum(r.recovered for r in reports),
        trials=len(reports),
        manifest=_manifest(args, started, [args.model], [args.out]),
    )
    _emit(doc, args.out)
    if all(r.status == INFEASIBLE_WINDOW for r in reports):
        return 1
    return 0


def _add_solver_flags(p):
    p.add_argument("--rho", type=float, default=1.0, help="ADMM penalty (default 1)")
    p.add_argument("--tol", type=float, default=1e-8, help="primal and dual tolerance")
    p.add_argument("--max-iterations", type=int, default=100_000)
    p.add_argument("--delta", type=float, default=None,
                   help="merge threshold (default 1e-5 * data diameter)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sonclust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a Gaussian mixture to CSV")
    p.add_argument("--model", type=Path, required=True, help="mixture config JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True, help="dataset CSV")
    p.add_argument("--labels", type=Path, help="labels CSV (default <out>.labels.csv)")
    p.add_argument("--header", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve sum-of-norms clustering at one lambda")
    p.add_argument("dataset", type=Path)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--out", type=Path)
    p.add_argument("--header", action="store_true")
    p.add_argument("--strict", action="store_true", help="exit 1 if the solver did not converge")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="check fusion certificates for candidate clusters")
    p.add_argument("dataset", type=Path)
    p.add_argument("--lambda", dest="lam", type=float)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--cluster", action="append", help="comma-separated 0-based indices; repeatable")
    src.add_argument("--from-solution", type=Path, help="solution JSON from `solve`")
    p.add_argument("--max-iterations", type=int, default=REFINE_MAX_ITERATIONS)
    p.add_argument("--out", type=Path)
    p.add_argument("--header", action="store_true")
    p.add_argument("--strict", action="store_true", help="exit 1 unless every cluster is certified")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("path", help="cluster path over a lambda grid")
    p.add_argument("dataset", type=Path)
    p.add_argument("--lambda-grid", required=True,
                   help="start:stop:count:geometric|linear; suffix D scales by diam/n")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--dendrogram", type=Path, help="default <out>.dendrogram.json")
    p.add_argument("--refine", action="store_true", help="bisect merge lambdas")
    p.add_argument("--header", action="store_true")
    p.add_argument("--strict", action="store_true", help="exit 1 on agglomeration violations")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("bounds", help="recovery lambda bounds for a mixture")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--epsilon", type=float, help="default c_d * w_min / 2")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("experiment", help="mixture recovery trials")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--epsilon", type=float, help="default c_d * w_min / 2")
    p.add_argument("--lambda", dest="lam", default=MIDPOINT, help="number or 'midpoint'")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InputError, ValueError) as exc:
        print(f"sonclust {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
