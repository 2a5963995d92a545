"""Fusion certificates for candidate clusters.

A set ``C`` of indices is fused by the sum-of-norms optimizer at ``lam``
whenever there are antisymmetric multipliers ``z_ij`` (``i, j`` in ``C``) with
``||z_ij|| <= 1`` and

    a_i - mean(a_C) = lam * sum_{j in C, j != i} z_ij     for every i in C.

Conversely every exact cluster of the optimizer admits such multipliers.
Feasibility says nothing about maximality: ``C`` may be a strict subset of
the optimizer's cluster.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import InputError, as_dataset

TOL_CERT = 1e-8
REFINE_MAX_ITERATIONS = 5000


class Status(str, enum.Enum):
    FEASIBLE_LS = "feasible-by-least-squares"
    FEASIBLE_REFINED = "feasible-by-refinement"
    INCONCLUSIVE = "infeasible-at-refinement-limit"

    @property
    def feasible(self) -> bool:
        return self is not Status.INCONCLUSIVE


def _pair_index(m: int):
    return np.triu_indices(m, 1)


def _row_sums(z: np.ndarray, m: int, pi: np.ndarray, pj: np.ndarray) -> np.ndarray:
    # sum_{j != i} z_ij with z_ji = -z_ij
    out = np.empty((m, z.shape[1]))
    for c in range(z.shape[1]):
        out[:, c] = np.bincount(pi, z[:, c], m) - np.bincount(pj, z[:, c], m)
    return out


def _max_norm(z: np.ndarray) -> float:
    if len(z) == 0:
        return 0.0
    return float(np.sqrt(np.einsum("pk,pk->p", z, z).max()))


@dataclass(frozen=True)
class Multipliers:
    """Antisymmetric multiplier family, stored once per unordered pair.

    ``z[p]`` holds ``z_{C[i], C[j]}`` for the ``p``-th pair ``(i, j)`` of
    ``numpy.triu_indices(len(cluster), 1)``; ``z_ji = -z_ij`` on access.
    """

    cluster: tuple[int, ...]
    z: np.ndarray
    lam: float
    max_norm: float
    equality_residual: float

    def feasible(self, tol: float = TOL_CERT) -> bool:
        return self.max_norm <= 1.0 + tol and self.equality_residual <= tol

    def pair(self, i: int, j: int) -> np.ndarray:
        """``z_ij`` for data indices ``i != j`` in the cluster."""
        pos = {k: p for p, k in enumerate(self.cluster)}
        if i not in pos or j not in pos or i == j:
            raise KeyError((i, j))
        pi, pj = pos[i], pos[j]
        sign = 1.0
        if pi > pj:
            pi, pj, sign = pj, pi, -1.0
        m = len(self.cluster)
        p = pi * m - pi * (pi + 1) // 2 + (pj - pi - 1)
        return sign * self.z[p]

    def dense(self) -> np.ndarray:
        """``(m, m, d)`` array with ``out[i, j] = z_ij`` in cluster-local indices."""
        m = len(self.cluster)
        d = self.z.shape[1] if self.z.ndim == 2 else 0
        out = np.zeros((m, m, d))
        pi, pj = _pair_index(m)
        out[pi, pj] = self.z
        out[pj, pi] = -self.z
        return out


@dataclass(frozen=True)
class CertificateResult:
    status: Status
    multipliers: Multipliers
    iterations_used: int

    @property
    def feasible(self) -> bool:
        return self.status.feasible


def _validate_cluster(C: Iterable[int], n: int) -> tuple[int, ...]:
    members = [int(i) for i in C]
    if not members:
        raise InputError("cluster must be nonempty")
    if len(set(members)) != len(members):
        raise InputError("cluster contains duplicate indices")
    bad = [i for i in members if not 0 <= i < n]
    if bad:
        raise InputError(f"cluster indices out of range for n={n}: {bad}")
    return tuple(sorted(members))


class _System:
    # equality constraints of the certificate for one (C, lam)
    def __init__(self, dataset, C, lam: float):
        ds = as_dataset(dataset)
        if not lam > 0:
            raise InputError(f"lambda must be positive, got {lam}")
        self.cluster = _validate_cluster(C, ds.n)
        self.lam = float(lam)
        self.a = ds.points[list(self.cluster)]
        self.m = len(self.cluster)
        self.pi, self.pj = _pair_index(self.m)
        self.centered = self.a - self.a.mean(axis=0)
        self.target = self.centered / self.lam

    def residual(self, z: np.ndarray) -> float:
        r = self.centered - self.lam * _row_sums(z, self.m, self.pi, self.pj)
        return float(np.linalg.norm(r, axis=1).max())

    def pack(self, z: np.ndarray) -> Multipliers:
        return Multipliers(self.cluster, z, self.lam, _max_norm(z), self.residual(z))

    def least_squares(self) -> np.ndarray:
        return (self.a[self.pi] - self.a[self.pj]) / (self.lam * self.m)

    def project_affine(self, z: np.ndarray) -> np.ndarray:
        # minimum-norm correction onto the equality set; z is antisymmetric by storage
        r = _row_sums(z, self.m, self.pi, self.pj) - self.target
        return z - (r[self.pi] - r[self.pj]) / self.m


def _clip_unit(z: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    return z * np.minimum(1.0, 1.0 / np.maximum(norms, 1e-300))


def least_squares_multipliers(dataset, C, lam: float) -> Multipliers:
    """Closed-form minimum-norm multipliers ``z_ij = (a_i - a_j) / (lam * |C|)``."""
    system = _System(dataset, C, lam)
    return system.pack(system.least_squares())


def refine_multipliers(
    dataset,
    C,
    lam: float,
    max_iterations: int = REFINE_MAX_ITERATIONS,
    tol: float = TOL_CERT,
) -> CertificateResult:
    """Search for feasible multipliers by Dykstra's alternating projections.

    Starts at the least-squares point and alternates between the unit-ball
    product set and the equality set.  The equality set is affine, so only
    the ball projection carries a Dykstra correction.  Returns the iterate
    with the smallest ``max_norm``; running out of iterations is reported as
    inconclusive, never as proof of infeasibility.
    """
    system = _System(dataset, C, lam)
    z = system.least_squares()
    best = system.pack(z)
    if best.feasible(tol):
        return CertificateResult(Status.FEASIBLE_LS, best, 0)

    correction = np.zeros_like(z)
    for it in range(1, int(max_iterations) + 1):
        shifted = z + correction
        clipped = _clip_unit(shifted)
        correction = shifted - clipped
        z = system.project_affine(clipped)
        norm = _max_norm(z)
        if norm < best.max_norm:
            best = system.pack(z)
            if best.feasible(tol):
                return CertificateResult(Status.FEASIBLE_REFINED, best, it)
    return CertificateResult(Status.INCONCLUSIVE, best, int(max_iterations))


def check_sufficient(
    dataset,
    C,
    lam: float,
    max_iterations: int = REFINE_MAX_ITERATIONS,
    tol: float = TOL_CERT,
) -> CertificateResult:
    """Decide whether ``C`` is certified to fuse at ``lam``.

    A feasible result guarantees every point of ``C`` shares one optimizer
    value, whatever the remaining points are.
    """
    system = _System(dataset, C, lam)
    if system.m == 1:
        return CertificateResult(Status.FEASIBLE_LS, system.pack(system.least_squares()), 0)
    return refine_multipliers(dataset, system.cluster, lam, max_iterations, tol)


def certify_partition(dataset, solution, max_iterations: int = REFINE_MAX_ITERATIONS,
                      tol: float = TOL_CERT) -> list[CertificateResult]:
    """Certificate for every cluster of a solver solution, in cluster-id order.

    Exact clusters always admit multipliers, so an inconclusive result
    points at solver inaccuracy or an over-generous merge threshold.
    """
    if not solution.lam > 0:
        raise InputError("certificates need lambda > 0")
    return [
        check_sufficient(dataset, members, solution.lam, max_iterations, tol)
        for members in solution.partition.clusters
    ]


def rescale_certificate(m: Multipliers, lambda_bar: float) -> Multipliers:
    """Transport multipliers from ``m.lam`` to a larger ``lambda_bar``.

    ``lam * z`` is unchanged, so the equality residual is preserved while
    ``max_norm`` shrinks by ``m.lam / lambda_bar``.
    """
    if lambda_bar < m.lam:
        raise InputError(f"lambda_bar={lambda_bar} is below lambda={m.lam}")
    factor = m.lam / lambda_bar
    z = m.z * factor
    return Multipliers(m.cluster, z, float(lambda_bar), _max_norm(z), m.equality_residual)
