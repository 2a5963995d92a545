"""Regularization paths over a lambda grid, merge events and the merge tree."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import InputError, Partition, as_dataset, diameter, is_refinement
from .solver import SolverConfig, SplittingState, solve, with_lambda


class AgglomerationError(InputError):
    """Raised when a tree is requested from a path whose clusters split."""

    def __init__(self, violations):
        self.violations = list(violations)
        pairs = ", ".join(f"({k}, {k + 1})" for k in self.violations)
        super().__init__(f"partitions are not nested at grid index pairs {pairs}")


@dataclass(frozen=True)
class MergeEvent:
    lambda_index: int
    children: tuple[tuple[int, ...], ...]
    parent: tuple[int, ...]
    # set when the merge lambda was narrowed by bisection
    lambda_refined: Optional[float] = None


@dataclass(frozen=True)
class SolveMeta:
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool


@dataclass
class ClusterPath:
    lambdas: list[float]
    partitions: list[Partition]
    merge_events: list[MergeEvent] = field(default_factory=list)
    solutions_meta: list[SolveMeta] = field(default_factory=list)

    def __post_init__(self):
        if len(self.lambdas) != len(self.partitions):
            raise InputError("need exactly one partition per lambda")
        if any(b <= a for a, b in zip(self.lambdas, self.lambdas[1:])):
            raise InputError("lambdas must be strictly increasing")

    @property
    def cluster_counts(self) -> list[int]:
        return [p.n_clusters for p in self.partitions]


@dataclass(frozen=True)
class MergeNode:
    lam: float
    children: tuple[tuple[int, ...], ...]
    parent: tuple[int, ...]


@dataclass(frozen=True)
class Dendrogram:
    leaves: tuple[tuple[int, ...], ...]
    nodes: tuple[MergeNode, ...]


def fusion_scale(dataset) -> float:
    """``diam(a) / n``: at or above this lambda every point is fused."""
    ds = as_dataset(dataset)
    return diameter(ds.points) / ds.n


def lambda_grid(start: float, stop: float, count: int, kind: str = "geometric") -> list[float]:
    if count < 1:
        raise InputError("grid count must be at least 1")
    if kind == "geometric":
        if not (start > 0 and stop > 0):
            raise InputError("geometric grids need positive endpoints")
        grid = np.geomspace(start, stop, count)
    elif kind == "linear":
        grid = np.linspace(start, stop, count)
    else:
        raise InputError(f"unknown grid kind {kind!r}")
    return [float(v) for v in grid]


def _merge_events(prev: Partition, curr: Partition, index: int) -> list[MergeEvent]:
    events = []
    for parent in curr.clusters:
        ids = sorted({prev.assignment[i] for i in parent})
        if len(ids) > 1:
            children = tuple(prev.clusters[c] for c in ids)
            events.append(MergeEvent(index, children, parent))
    return events


def _co_clustered(partition: Partition, members: Sequence[int]) -> bool:
    return len({partition.assignment[i] for i in members}) == 1


def _refine_merge(ds, config, event: MergeEvent, lo: float, hi: float, state, tol: float) -> float:
    # smallest grid-resolution lambda at which the event's parent set is fused
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        sol = solve(ds, with_lambda(config, mid), warm_start=state)
        if _co_clustered(sol.partition, event.parent):
            hi = mid
        else:
            lo = mid
    return hi


def compute_path(
    dataset,
    lambdas: Sequence[float],
    config: Optional[SolverConfig] = None,
    refine_merges: bool = False,
) -> ClusterPath:
    """Solve at every lambda in ascending order, warm-starting each solve.

    Between grid points the scaled duals are multiplied by
    ``lam_prev / lam_next``.  With ``refine_merges`` each merge event's lambda
    is narrowed by bisection to within ``1e-6 * diam / n``.
    """
    ds = as_dataset(dataset)
    lambdas = [float(v) for v in lambdas]
    if not lambdas:
        raise InputError("lambda grid is empty")
    if any(v < 0 for v in lambdas):
        raise InputError("lambdas must be nonnegative")
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise InputError("lambda grid must be strictly increasing")
    config = config or SolverConfig(lam=lambdas[0])

    partitions: list[Partition] = []
    meta: list[SolveMeta] = []
    events: list[MergeEvent] = []
    state: Optional[SplittingState] = None
    prev_lam = None
    bisect_tol = 1e-6 * fusion_scale(ds)
    for k, lam in enumerate(lambdas):
        warm = None
        if state is not None:
            scale = prev_lam / lam if prev_lam > 0 else 1.0
            warm = SplittingState(state.x, state.u, state.y * scale)
        sol = solve(ds, with_lambda(config, lam), warm_start=warm)
        partitions.append(sol.partition)
        meta.append(SolveMeta(sol.iterations, sol.primal_residual, sol.dual_residual, sol.converged))
        if k > 0:
            new_events = _merge_events(partitions[k - 1], sol.partition, k)
            if refine_merges and bisect_tol > 0:
                new_events = [
                    MergeEvent(e.lambda_index, e.children, e.parent,
                               _refine_merge(ds, config, e, prev_lam, lam, state, bisect_tol))
                    for e in new_events
                ]
            events.extend(new_events)
        state, prev_lam = sol.state, lam
    return ClusterPath(lambdas, partitions, events, meta)


def check_agglomeration(path: ClusterPath) -> list[int]:
    """Indices ``k`` where ``partitions[k]`` does not refine ``partitions[k + 1]``."""
    parts = path.partitions
    return [k for k in range(len(parts) - 1) if not is_refinement(parts[k], parts[k + 1])]


def merge_tree(path: ClusterPath) -> Dendrogram:
    violations = check_agglomeration(path)
    if violations:
        raise AgglomerationError(violations)
    leaves = path.partitions[0].clusters if path.partitions else ()
    nodes = []
    for k in range(1, len(path.partitions)):
        for event in _merge_events(path.partitions[k - 1], path.partitions[k], k):
            nodes.append(MergeNode(path.lambdas[k], event.children, event.parent))
    return Dendrogram(tuple(leaves), tuple(nodes))
