"""Spatial partitioning of city blocks via K-Means++.

Blocks with and without parking data are clustered separately; the number
of clusters on the unmonitored side follows the proportional rule
k_without = floor(ratio * k_with) with the city's block-count ratio
(default 2.6).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from parkcast.ingest import Block

DEFAULT_RATIO = 2.6
DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6  # degrees of centroid shift

GROUP_WITH = "with_data"
GROUP_WITHOUT = "without_data"


@dataclass(frozen=True)
class Cluster:
    cluster_id: int
    group: str
    block_ids: frozenset[str]
    centroid: tuple[float, float]


@dataclass
class ClusterPartition:
    clusters_with: list[Cluster]
    clusters_without: list[Cluster]
    k_with: int
    k_without: int
    seed: int
    ratio: float = DEFAULT_RATIO

    def cluster(self, group: str, cluster_id: int) -> Cluster:
        pool = self.clusters_with if group == GROUP_WITH else self.clusters_without
        return pool[cluster_id]


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    n_iter: int
    objective_history: list[float] = field(default_factory=list)


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """K-Means++ seeding: first center uniform, then D^2-weighted draws."""
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = _sq_dists(points, centers[:1]).min(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # All remaining mass on already-chosen positions; spread uniformly.
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers[i] = points[idx]
        d2 = np.minimum(d2, _sq_dists(points, centers[i : i + 1]).min(axis=1))
    return centers


def kmeans(
    points: np.ndarray | list[tuple[float, float]],
    k: int,
    seed: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> KMeansResult:
    """Lloyd iterations with K-Means++ seeding on raw (lat, lon) pairs.

    Squared Euclidean distance on degrees, per the source method; fine at
    city scale. Deterministic for a fixed seed. Clusters emptied by an
    iteration are reseeded to the point currently farthest from its
    assigned center, so the final partition has no empty clusters.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("points must be a non-empty (n, 2) array")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n_distinct = len(np.unique(pts, axis=0))
    if k < 1 or k > n_distinct:
        raise ValueError(f"k={k} must be in [1, {n_distinct}] (distinct points)")

    rng = np.random.default_rng(seed)
    centers = _plus_plus_init(pts, k, rng)
    labels = np.zeros(len(pts), dtype=int)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _sq_dists(pts, centers)
        labels = d2.argmin(axis=1)
        labels = _repair_empty(pts, labels, d2, k)
        new_centers = np.array([pts[labels == j].mean(axis=0) for j in range(k)])
        history.append(float(_sq_dists(pts, new_centers)[np.arange(len(pts)), labels].sum()))
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < tol:
            break
    return KMeansResult(labels=labels, centers=centers, n_iter=n_iter, objective_history=history)


def _repair_empty(
    pts: np.ndarray, labels: np.ndarray, d2: np.ndarray, k: int
) -> np.ndarray:
    """Reseed each empty cluster with the point farthest from its own center."""
    labels = labels.copy()
    for j in range(k):
        if (labels == j).any():
            continue
        sizes = np.bincount(labels, minlength=k)
        own = d2[np.arange(len(pts)), labels].copy()
        # Never steal the sole member of another cluster.
        own[sizes[labels] <= 1] = -1.0
        far = int(own.argmax())
        labels[far] = j
    return labels


def partition_city(
    blocks: list[Block],
    k_with: int,
    ratio: float = DEFAULT_RATIO,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> ClusterPartition:
    """Cluster monitored and unmonitored blocks separately.

    k_without = floor(ratio * k_with), the only rounding consistent with
    the 8 -> 20 and 16 -> 41 reference configurations at ratio 2.6.
    """
    if k_with < 1:
        raise ValueError("k_with must be >= 1")
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    with_blocks = [b for b in blocks if b.has_parking_data]
    wout_blocks = [b for b in blocks if not b.has_parking_data]
    if not with_blocks or not wout_blocks:
        raise ValueError("need both monitored and unmonitored blocks")
    k_without = int(math.floor(ratio * k_with))

    clusters_with = _cluster_group(with_blocks, k_with, GROUP_WITH, seed, max_iter, tol)
    clusters_without = _cluster_group(wout_blocks, k_without, GROUP_WITHOUT, seed + 1, max_iter, tol)
    return ClusterPartition(
        clusters_with=clusters_with,
        clusters_without=clusters_without,
        k_with=k_with,
        k_without=k_without,
        seed=seed,
        ratio=ratio,
    )


def _cluster_group(
    blocks: list[Block], k: int, group: str, seed: int, max_iter: int, tol: float
) -> list[Cluster]:
    pts = np.array([b.centroid for b in blocks])
    result = kmeans(pts, k, seed=seed, max_iter=max_iter, tol=tol)
    clusters = []
    for j in range(k):
        member_ids = frozenset(b.block_id for b, lab in zip(blocks, result.labels) if lab == j)
        clusters.append(
            Cluster(
                cluster_id=j,
                group=group,
                block_ids=member_ids,
                centroid=(float(result.centers[j][0]), float(result.centers[j][1])),
            )
        )
    return clusters


def size_dispersion(clusters: list[Cluster]) -> float:
    """Coefficient of variation of cluster sizes, reported as a diagnostic."""
    sizes = np.array([len(c.block_ids) for c in clusters], dtype=float)
    return float(sizes.std() / sizes.mean())
