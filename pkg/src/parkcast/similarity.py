"""Similarity measures between cluster representations.

Cosine similarity compares category-count vectors; the earth mover's
distance compares normalized cluster curves on their shared binned
support, computed as the exact 1-D optimal-transport cost (integrated
absolute CDF difference). The closed-form Gaussian 2-Wasserstein distance
is provided as a reference diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from parkcast.represent import ClusterGaussian, ClusterVector, ZeroMassError, normalize

_MASS_TOL = 1e-9


@dataclass
class SimilarityMatrix:
    """Pairwise values between source (rows) and target (columns) clusters."""

    metric: str  # "cosine" | "emd"
    basis: str  # "time_spent" | "area"
    source_ids: list[int]
    target_ids: list[int]
    values: np.ndarray
    degenerate_pairs: int = 0  # pairs involving an amenity-free cluster

    def value(self, source_id: int, target_id: int) -> float:
        i = self.source_ids.index(source_id)
        j = self.target_ids.index(target_id)
        return float(self.values[i, j])


def cosine_similarity(a: ClusterVector | np.ndarray, b: ClusterVector | np.ndarray) -> float:
    """Cosine of the angle between two nonnegative count vectors.

    Zero vectors (amenity-free clusters) compare as 0 against anything.
    """
    va = a.as_array() if isinstance(a, ClusterVector) else np.asarray(a, dtype=float)
    vb = b.as_array() if isinstance(b, ClusterVector) else np.asarray(b, dtype=float)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(va, vb) / (na * nb))


def _check_comparable(p: ClusterGaussian, q: ClusterGaussian) -> None:
    if p.support != q.support:
        raise ValueError("cluster curves must share one support")
    for g, name in ((p, "first"), (q, "second")):
        if abs(g.mass - 1.0) > _MASS_TOL:
            raise ValueError(f"{name} curve is not normalized (mass {g.mass})")


def discrete_emd(p: ClusterGaussian, q: ClusterGaussian) -> float:
    """Exact 1-D earth mover's distance between two unit-mass binned curves.

    Equals the integrated absolute difference of the two CDFs, which is
    the optimal mass-times-distance transport cost on the line.
    """
    _check_comparable(p, q)
    w = p.support.bin_width
    cdf_p = np.cumsum(p.heights * w)
    cdf_q = np.cumsum(q.heights * w)
    return float(np.abs(cdf_p - cdf_q).sum() * w)


def emd_normalized(p: ClusterGaussian, q: ClusterGaussian) -> float:
    """EMD scaled into [0, 1] by the support length, the maximum transport cost."""
    return discrete_emd(p, q) / p.support.support_length


def gaussian_w2(m1: float, s1: float, m2: float, s2: float) -> float:
    """Closed-form 2-Wasserstein distance between two 1-D normal distributions."""
    if s1 < 0 or s2 < 0:
        raise ValueError("standard deviations must be nonnegative")
    return math.sqrt((m1 - m2) ** 2 + (s1 - s2) ** 2)


def cosine_matrix(
    sources: dict[int, ClusterVector],
    targets: dict[int, ClusterVector],
    basis: str,
) -> SimilarityMatrix:
    source_ids = sorted(sources)
    target_ids = sorted(targets)
    values = np.zeros((len(source_ids), len(target_ids)))
    degenerate = 0
    for i, s in enumerate(source_ids):
        for j, t in enumerate(target_ids):
            if sources[s].total == 0 or targets[t].total == 0:
                degenerate += 1
            values[i, j] = cosine_similarity(sources[s], targets[t])
    return SimilarityMatrix("cosine", basis, source_ids, target_ids, values, degenerate)


def emd_matrix(
    sources: dict[int, ClusterGaussian],
    targets: dict[int, ClusterGaussian],
    basis: str,
) -> SimilarityMatrix:
    """Normalized-EMD matrix; amenity-free clusters land at maximal distance 1."""
    source_ids = sorted(sources)
    target_ids = sorted(targets)
    norm_s = {k: _try_normalize(g) for k, g in sources.items()}
    norm_t = {k: _try_normalize(g) for k, g in targets.items()}
    values = np.zeros((len(source_ids), len(target_ids)))
    degenerate = 0
    for i, s in enumerate(source_ids):
        for j, t in enumerate(target_ids):
            if norm_s[s] is None or norm_t[t] is None:
                values[i, j] = 1.0
                degenerate += 1
            else:
                values[i, j] = emd_normalized(norm_s[s], norm_t[t])
    return SimilarityMatrix("emd", basis, source_ids, target_ids, values, degenerate)


def _try_normalize(g: ClusterGaussian) -> ClusterGaussian | None:
    try:
        return normalize(g)
    except ZeroMassError:
        return None
