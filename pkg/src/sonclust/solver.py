"""ADMM solver for equal-weight sum-of-norms clustering.

The fusion penalty is split over every pair ``i < j`` with an auxiliary
difference ``u_ij = x_i - x_j`` and a scaled dual ``y_ij``.  Because the
fusion graph is complete, the x-update system ``(I + rho*(n I - 11^T)) x = rhs``
is inverted in closed form and preserves the centroid exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .core import (
    Dataset,
    InputError,
    Partition,
    as_dataset,
    diameter,
    extract_clusters,
    objective,
)

AUTO = "auto"


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    rho: float = 1.0
    tol_primal: float = 1e-8
    tol_dual: float = 1e-8
    max_iterations: int = 100_000
    cluster_delta: Union[float, str] = AUTO

    def __post_init__(self):
        if not self.lam >= 0:
            raise InputError(f"lambda must be nonnegative, got {self.lam}")
        if not self.rho > 0:
            raise InputError(f"rho must be positive, got {self.rho}")
        if not (self.tol_primal > 0 and self.tol_dual > 0):
            raise InputError("tolerances must be positive")
        if int(self.max_iterations) < 1:
            raise InputError("max_iterations must be at least 1")
        if self.cluster_delta != AUTO and not float(self.cluster_delta) > 0:
            raise InputError("cluster_delta must be positive or 'auto'")


@dataclass
class SplittingState:
    """Primal points ``x`` (n, d); pair differences ``u`` and scaled duals ``y`` (n(n-1)/2, d).

    Pairs are ordered as ``numpy.triu_indices(n, 1)``.
    """

    x: np.ndarray
    u: np.ndarray
    y: np.ndarray

    @classmethod
    def cold_start(cls, dataset) -> "SplittingState":
        ds = as_dataset(dataset)
        i, j = np.triu_indices(ds.n, 1)
        a = ds.points
        return cls(x=a.copy(), u=a[i] - a[j], y=np.zeros((len(i), ds.d)))

    def copy(self) -> "SplittingState":
        return SplittingState(self.x.copy(), self.u.copy(), self.y.copy())

    def check_shape(self, n: int, d: int) -> None:
        m = n * (n - 1) // 2
        if self.x.shape != (n, d) or self.u.shape != (m, d) or self.y.shape != (m, d):
            raise InputError(
                f"state shapes x{self.x.shape} u{self.u.shape} y{self.y.shape} "
                f"do not match n={n}, d={d}"
            )


@dataclass
class SonSolution:
    x_star: np.ndarray
    partition: Partition
    lam: float
    iterations: int
    primal_residual: float
    dual_residual: float
    objective_value: float
    converged: bool
    state: SplittingState = field(repr=False)
    residual_history: Optional[list[tuple[float, float]]] = field(default=None, repr=False)


def prox_group_norm(v, kappa: float) -> np.ndarray:
    """Block soft-threshold: proximal map of ``kappa * ||.||``.

    Works row-wise on 2-D input.
    """
    v = np.asarray(v, dtype=float)
    if kappa < 0:
        raise InputError("kappa must be nonnegative")
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    scale = np.zeros_like(norms)
    outside = norms > kappa
    scale[outside] = 1.0 - kappa / norms[outside]
    return v * scale


class _Pairs:
    # cached pair indices and data sums for one dataset
    def __init__(self, ds: Dataset):
        self.n, self.d = ds.n, ds.d
        self.i, self.j = np.triu_indices(ds.n, 1)
        self.a = ds.points
        self.a_sum = ds.points.sum(axis=0)

    def row_sums(self, s: np.ndarray) -> np.ndarray:
        # b_i = sum_{j>i} s_ij - sum_{j<i} s_ji, fixed reduction order
        b = np.empty((self.n, self.d))
        for c in range(self.d):
            b[:, c] = np.bincount(self.i, s[:, c], self.n) - np.bincount(self.j, s[:, c], self.n)
        return b


def _step(pairs: _Pairs, state: SplittingState, lam: float, rho: float):
    n = pairs.n
    b = pairs.row_sums(state.u - state.y)
    x = (pairs.a + rho * b + rho * pairs.a_sum) / (1.0 + rho * n)
    diff = x[pairs.i] - x[pairs.j]
    u = prox_group_norm(diff + state.y, lam / rho)
    r = diff - u
    y = state.y + r
    if len(r):
        primal = float(np.sqrt(np.einsum("pk,pk->p", r, r).max()))
        du = u - state.u
        dual = rho * float(np.sqrt(np.einsum("pk,pk->p", du, du).max()))
    else:
        primal = dual = 0.0
    return SplittingState(x, u, y), primal, dual


def splitting_step(dataset, state: SplittingState, config: SolverConfig):
    """One ADMM sweep (x-update, u-update, y-update).

    Returns ``(new_state, primal_residual, dual_residual)`` where the primal
    residual is ``max ||x_i - x_j - u_ij||`` and the dual residual is
    ``rho * max ||u_ij - u_ij_prev||``.
    """
    ds = as_dataset(dataset)
    state.check_shape(ds.n, ds.d)
    return _step(_Pairs(ds), state, config.lam, config.rho)


def resolve_delta(dataset: Dataset, config: SolverConfig) -> float:
    if config.cluster_delta == AUTO:
        diam = diameter(dataset.points)
        return 1e-5 * (diam if diam > 0 else 1.0)
    return float(config.cluster_delta)


def solve(
    dataset,
    config: SolverConfig,
    warm_start: Optional[SplittingState] = None,
    track_residuals: bool = False,
) -> SonSolution:
    """Minimize the sum-of-norms objective at ``config.lam``.

    Stops once both residuals are within tolerance.  Hitting
    ``max_iterations`` is not an error: the last iterate is returned with
    ``converged=False``.
    """
    ds = as_dataset(dataset)
    if warm_start is None:
        state = SplittingState.cold_start(ds)
    else:
        warm_start.check_shape(ds.n, ds.d)
        state = warm_start.copy()

    pairs = _Pairs(ds)
    history = [] if track_residuals else None
    primal = dual = 0.0
    iterations = 0
    converged = ds.n < 2
    if not converged:
        for iterations in range(1, int(config.max_iterations) + 1):
            state, primal, dual = _step(pairs, state, config.lam, config.rho)
            if history is not None:
                history.append((primal, dual))
            if primal <= config.tol_primal and dual <= config.tol_dual:
                converged = True
                break

    x = state.x
    return SonSolution(
        x_star=x,
        partition=extract_clusters(x, resolve_delta(ds, config)),
        lam=float(config.lam),
        iterations=iterations,
        primal_residual=primal,
        dual_residual=dual,
        objective_value=objective(ds, x, config.lam),
        converged=converged,
        state=state,
        residual_history=history,
    )


def with_lambda(config: SolverConfig, lam: float) -> SolverConfig:
    return replace(config, lam=lam)
