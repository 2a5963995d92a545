"""Spherical Gaussian mixtures and sum-of-norms recovery guarantees.

For component ``m`` let ``V_m`` be the samples within ``theta * sigma_m`` of
``mu_m``.  With ``F = chi2_cdf(theta, d)``, every ``V_m`` is fused once

    lam >= 2 theta sigma_m / ((F w_m - eps) n)

(with probability exponentially close to one in ``n``), and ``V_m``, ``V_m'``
stay in distinct clusters while

    lam < ||mu_m - mu_m'|| / (2 (n - 1)).

Fixing ``theta = 2d`` and ``eps = c_d w_min / 2`` with ``c_d = F(2d, d)``, a
common lambda exists when the minimum mean separation exceeds
``16 d sigma_max / (c_d w_min)``.  Unlike earlier polylog(n) separation
conditions this does not grow with ``n``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import Dataset, InputError
from .solver import SolverConfig, solve, with_lambda
from .special import chi2_cdf

MIDPOINT = "midpoint"
INFEASIBLE_WINDOW = "infeasible-lambda-window"


@dataclass(frozen=True)
class MixtureModel:
    means: np.ndarray
    sigmas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        means = np.array(self.means, dtype=float)
        if means.ndim == 1:
            means = means.reshape(-1, 1)
        sigmas = np.array(self.sigmas, dtype=float).reshape(-1)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        k = len(means)
        if k < 1:
            raise InputError("mixture needs at least one component")
        if len(sigmas) != k or len(weights) != k:
            raise InputError(f"got {k} means, {len(sigmas)} sigmas, {len(weights)} weights")
        if not np.all(np.isfinite(means)):
            raise InputError("means must be finite")
        if not np.all(sigmas > 0):
            raise InputError("sigmas must be positive")
        if not np.all(weights > 0):
            raise InputError("weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise InputError(f"weights sum to {weights.sum()!r}, not 1")
        for name, arr in (("means", means), ("sigmas", sigmas), ("weights", weights)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return len(self.means)

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def translated(self, shift) -> "MixtureModel":
        return MixtureModel(self.means + np.asarray(shift, dtype=float), self.sigmas, self.weights)


def _box_muller(rng: np.random.Generator, count: int) -> np.ndarray:
    pairs = (count + 1) // 2
    u1 = rng.random(pairs)
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:count]


def sample_mixture(model: MixtureModel, n: int, seed: int) -> tuple[Dataset, np.ndarray]:
    """Draw ``n`` labelled samples.

    Randomness comes from ``numpy.random.PCG64(seed)``: first ``n`` uniforms
    pick components by inverse CDF over the weights, then ``n*d`` Gaussian
    deviates are produced by the Box-Muller transform in row-major order.
    """
    if n < 0:
        raise InputError("n must be nonnegative")
    rng = np.random.Generator(np.random.PCG64(seed))
    cumulative = np.cumsum(model.weights)
    cumulative[-1] = 1.0
    labels = np.searchsorted(cumulative, rng.random(n), side="right")
    z = _box_muller(rng, n * model.d).reshape(n, model.d)
    points = model.means[labels] + model.sigmas[labels, None] * z
    return Dataset(points.reshape(n, model.d)), labels


def lambda_lower_bound(model: MixtureModel, m: int, theta: float, epsilon: float, n: int) -> float:
    """Smallest lambda fusing ``V_m`` with high probability."""
    if not theta > 0:
        raise InputError("theta must be positive")
    if n < 1:
        raise InputError("n must be at least 1")
    mass = chi2_cdf(theta, model.d) * model.weights[m]
    if epsilon >= mass:
        raise InputError(f"epsilon={epsilon} must be below F(theta, d) * w_m = {mass}")
    return float(2.0 * theta * model.sigmas[m] / ((mass - epsilon) * n))


def min_mean_separation(model: MixtureModel) -> float:
    if model.k < 2:
        raise InputError("separation needs at least two components")
    return min(
        float(np.linalg.norm(model.means[p] - model.means[q]))
        for p, q in itertools.combinations(range(model.k), 2)
    )


def lambda_upper_bound(model: MixtureModel, n: int) -> float:
    """Every lambda strictly below this keeps all ``V_m`` pairwise apart."""
    if n < 2:
        raise InputError("n must be at least 2")
    return min_mean_separation(model) / (2.0 * (n - 1))


def default_epsilon(model: MixtureModel) -> float:
    d = model.d
    return chi2_cdf(2.0 * d, d) * float(model.weights.min()) / 2.0


def separation_bound(model: MixtureModel, d: Optional[int] = None) -> float:
    d = model.d if d is None else int(d)
    c_d = chi2_cdf(2.0 * d, d)
    return 16.0 * d * float(model.sigmas.max()) / (c_d * float(model.weights.min()))


def component_sets(points: np.ndarray, model: MixtureModel, theta: float) -> list[np.ndarray]:
    """Indices of ``V_m`` for each component; a point may belong to several."""
    dist = np.linalg.norm(points[:, None, :] - model.means[None, :, :], axis=2)
    return [np.flatnonzero(dist[:, m] <= theta * model.sigmas[m]) for m in range(model.k)]


@dataclass
class RecoveryReport:
    trial: int
    seed: int
    status: str
    v_sizes: list[int]
    coherent: list[bool]
    distinct: list[list[bool]]
    lambda_used: Optional[float]
    lambda_lower: list[float]
    lambda_upper: Optional[float]
    n_clusters: Optional[int] = None
    converged: Optional[bool] = None

    @property
    def recovered(self) -> bool:
        """All ``V_m`` coherent and pairwise distinct."""
        if self.status != "ok":
            return False
        k = len(self.coherent)
        return all(self.coherent) and all(
            self.distinct[p][q] for p in range(k) for q in range(k) if p != q
        )


def _coherence(assignment: np.ndarray, sets: list[np.ndarray]):
    ids = [set(assignment[idx].tolist()) for idx in sets]
    coherent = [len(s) <= 1 for s in ids]
    k = len(sets)
    distinct = [[p == q or not (ids[p] & ids[q]) for q in range(k)] for p in range(k)]
    return coherent, distinct


def run_recovery_experiment(
    model: MixtureModel,
    n: int,
    theta: float,
    epsilon: Optional[float] = None,
    lambda_policy: Union[float, str] = MIDPOINT,
    trials: int = 1,
    seed: int = 0,
    solver_config: Optional[SolverConfig] = None,
) -> list[RecoveryReport]:
    """Sample, solve and score ``trials`` independent datasets.

    Trial ``t`` uses seed ``seed + t``.  The midpoint policy takes the
    geometric mean of ``max_m lambda_lower`` and ``lambda_upper``; when that
    window is empty the trial is reported with status
    ``infeasible-lambda-window`` and not solved.
    """
    if trials < 1:
        raise InputError("trials must be at least 1")
    if epsilon is None:
        epsilon = default_epsilon(model)
    lower = [lambda_lower_bound(model, m, theta, epsilon, n) for m in range(model.k)]
    upper = lambda_upper_bound(model, n) if model.k >= 2 and n >= 2 else None

    if lambda_policy == MIDPOINT:
        if upper is None:
            raise InputError("midpoint policy needs at least two components and n >= 2")
        lam = float(np.sqrt(max(lower) * upper)) if max(lower) < upper else None
    else:
        lam = float(lambda_policy)
        if lam < 0:
            raise InputError("lambda must be nonnegative")

    reports = []
    for t in range(trials):
        trial_seed = seed + t
        ds, _ = sample_mixture(model, n, trial_seed)
        sets = component_sets(ds.points, model, theta)
        base = dict(trial=t, seed=trial_seed, v_sizes=[len(s) for s in sets],
                    lambda_lower=lower, lambda_upper=upper)
        if lam is None:
            k = model.k
            reports.append(RecoveryReport(
                status=INFEASIBLE_WINDOW, coherent=[False] * k,
                distinct=[[False] * k for _ in range(k)], lambda_used=None, **base))
            continue
        sol = solve(ds, with_lambda(solver_config or SolverConfig(lam), lam))
        coherent, distinct = _coherence(np.asarray(sol.partition.assignment), sets)
        reports.append(RecoveryReport(
            status="ok", coherent=coherent, distinct=distinct, lambda_used=lam,
            n_clusters=sol.partition.n_clusters, converged=sol.converged, **base))
    return reports
