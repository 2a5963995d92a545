"""Shared types for sum-of-norms clustering: datasets, partitions, the objective.

Indices are 0-based throughout the library.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class InputError(ValueError):
    """Raised when arguments violate an operation's preconditions."""


@dataclass(frozen=True)
class Dataset:
    """``n`` points in ``R^d`` stored as an ``(n, d)`` float array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise InputError(f"points must be 2-D (n, d), got shape {pts.shape}")
        if pts.shape[1] < 1:
            raise InputError("points must have at least one coordinate")
        if not np.all(np.isfinite(pts)):
            raise InputError("points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n


def as_dataset(data) -> Dataset:
    if isinstance(data, Dataset):
        return data
    return Dataset(data)


@dataclass(frozen=True)
class Partition:
    """Canonical cluster assignment of indices ``0..n-1``.

    Cluster ids are contiguous and ordered by smallest member, so two
    partitions describing the same set family compare equal.
    """

    assignment: tuple[int, ...]
    _clusters: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(int(c) for c in self.assignment)
        canonical = _canonicalize(labels)
        if canonical != labels:
            raise InputError("assignment is not in canonical form; use Partition.from_labels")
        groups: list[list[int]] = [[] for _ in range(max(labels, default=-1) + 1)]
        for i, c in enumerate(labels):
            groups[c].append(i)
        object.__setattr__(self, "assignment", labels)
        object.__setattr__(self, "_clusters", tuple(tuple(g) for g in groups))

    @classmethod
    def from_labels(cls, labels: Iterable) -> "Partition":
        return cls(_canonicalize(tuple(labels)))

    @classmethod
    def from_clusters(cls, clusters: Iterable[Iterable[int]], n: int | None = None) -> "Partition":
        clusters = [list(c) for c in clusters]
        if n is None:
            n = sum(len(c) for c in clusters)
        labels = [-1] * n
        for k, members in enumerate(clusters):
            for i in members:
                if not 0 <= i < n:
                    raise InputError(f"index {i} out of range for n={n}")
                if labels[i] != -1:
                    raise InputError(f"index {i} assigned twice")
                labels[i] = k
        if -1 in labels:
            raise InputError(f"index {labels.index(-1)} is unassigned")
        return cls.from_labels(labels)

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.assignment)

    @property
    def n_clusters(self) -> int:
        return len(self._clusters)

    @property
    def clusters(self) -> tuple[tuple[int, ...], ...]:
        return self._clusters

    def to_lists(self) -> list[list[int]]:
        return [list(c) for c in self._clusters]

    def __len__(self):
        return self.n_clusters


def _canonicalize(labels: Sequence) -> tuple[int, ...]:
    remap: dict = {}
    out = []
    for lab in labels:
        if lab not in remap:
            remap[lab] = len(remap)
        out.append(remap[lab])
    return tuple(out)


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i: int) -> int:
        parent = self.parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]
        return True

    def labels(self) -> list[int]:
        return [self.find(i) for i in range(len(self.parent))]


def pairwise_distances(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def diameter(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if len(x) < 2:
        return 0.0
    return float(pairwise_distances(x).max())


def default_delta(x) -> float:
    """Merge threshold ``1e-5 * diam(x)``, or ``1e-5`` when ``x`` has zero diameter."""
    diam = diameter(x)
    return 1e-5 * (diam if diam > 0 else 1.0)


def objective(dataset, x, lam: float) -> float:
    """Sum-of-norms clustering objective.

    ``0.5 * sum_i ||x_i - a_i||^2 + lam * sum_{i<j} ||x_i - x_j||``
    """
    ds = as_dataset(dataset)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.shape != ds.points.shape:
        raise InputError(f"x has shape {x.shape}, dataset has shape {ds.points.shape}")
    if lam < 0:
        raise InputError("lambda must be nonnegative")
    fidelity = 0.5 * float(np.sum((x - ds.points) ** 2))
    if lam == 0 or ds.n < 2:
        return fidelity
    i, j = np.triu_indices(ds.n, 1)
    fusion = float(np.linalg.norm(x[i] - x[j], axis=1).sum())
    return fidelity + lam * fusion


def extract_clusters(x, delta: float | None = None) -> Partition:
    """Connected components of the graph joining points within ``delta``.

    Chaining is intended: ``x_1 ~ x_2 ~ x_3`` puts all three together even
    when ``||x_1 - x_3|| > delta``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if delta is None:
        delta = default_delta(x)
    if not delta > 0:
        raise InputError("delta must be positive")
    n = len(x)
    uf = UnionFind(n)
    if n > 1:
        close_i, close_j = np.nonzero(np.triu(pairwise_distances(x) <= delta, 1))
        for i, j in zip(close_i.tolist(), close_j.tolist()):
            uf.union(i, j)
    return Partition.from_labels(uf.labels())


def is_refinement(fine: Partition, coarse: Partition) -> bool:
    """True when every cluster of ``fine`` lies inside one cluster of ``coarse``."""
    if fine.n != coarse.n:
        raise InputError(f"partitions cover different sizes ({fine.n} vs {coarse.n})")
    target = coarse.assignment
    return all(len({target[i] for i in members}) == 1 for members in fine.clusters)
