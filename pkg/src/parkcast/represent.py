"""Per-cluster mathematical representations.

Two objects summarize a cluster's amenity landscape: a category-count
vector (input to cosine similarity) and a summed, binned Gaussian curve
over the visiting-duration (or reduced-area) axis (input to the earth
mover's distance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from parkcast.geocluster import Cluster
from parkcast.ingest import AmenityStats, BlockAmenityIndex

TIME_SPENT_THRESHOLDS = (30.0, 90.0)
AREA_THRESHOLDS = (35.0, 100.0)  # reduced units (m^2 / 20)


@dataclass(frozen=True)
class CategoryScheme:
    """Maps an amenity's mean duration/area to a category 1..n."""

    basis: str
    thresholds: tuple[float, ...]

    @classmethod
    def for_basis(cls, basis: str) -> "CategoryScheme":
        if basis == "time_spent":
            return cls(basis, TIME_SPENT_THRESHOLDS)
        if basis == "area":
            return cls(basis, AREA_THRESHOLDS)
        raise ValueError(f"unknown basis {basis!r}, expected time_spent or area")

    @property
    def n_categories(self) -> int:
        return len(self.thresholds) + 1


def category_for_mean(mean: float, scheme: CategoryScheme) -> int:
    """Category of a raw mean value under the scheme thresholds (inclusive upper bounds)."""
    for cat, upper in enumerate(scheme.thresholds, start=1):
        if mean <= upper:
            return cat
    return scheme.n_categories


def categorize_amenity(stats: AmenityStats, scheme: CategoryScheme) -> int:
    if stats.mean <= 0:
        raise ValueError(f"{stats.amenity}: mean must be positive")
    return category_for_mean(stats.mean, scheme)


@dataclass(frozen=True)
class ClusterVector:
    """Category counts of the (deduplicated) amenity occurrences in a cluster."""

    counts: tuple[int, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float)

    @property
    def total(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class SupportSpec:
    """Shared binning of the duration/area axis for one run.

    ``n_bins`` width-``bin_width`` bins cover [-offset, max_mean + offset];
    bin i is represented by the grid point -offset + (i + 1) * bin_width,
    so integer amenity means fall exactly on the grid.
    """

    offset: float
    n_bins: int
    bin_width: float = 1.0

    @property
    def support_length(self) -> float:
        return self.n_bins * self.bin_width

    def positions(self) -> np.ndarray:
        return -self.offset + (np.arange(self.n_bins) + 1.0) * self.bin_width

    def nearest_bin(self, x: float) -> int:
        i = int(round((x + self.offset) / self.bin_width - 1.0))
        return min(max(i, 0), self.n_bins - 1)


@dataclass(frozen=True)
class ClusterGaussian:
    """Summed per-occurrence Gaussian curves on a shared support."""

    support: SupportSpec
    heights: np.ndarray
    normalized: bool = False

    @property
    def mass(self) -> float:
        return float(self.heights.sum() * self.support.bin_width)


def support_spec(stats: Mapping[str, AmenityStats]) -> SupportSpec:
    """Support shared by all clusters of a run, derived from the stats table.

    The axis is buffered by 3x the largest standard deviation on both
    sides, so every amenity's curve fits: offset = 3 * max stdev and the
    bin count is max_mean + 6 * max_stdev (rounded up for non-integer
    tables).
    """
    if not stats:
        raise ValueError("empty amenity stats table")
    max_mean = max(s.mean for s in stats.values())
    max_stdev = max(s.stdev for s in stats.values())
    offset = 3.0 * max_stdev
    n_bins = int(math.ceil(max_mean + 6.0 * max_stdev))
    return SupportSpec(offset=offset, n_bins=n_bins)


def build_cluster_vector(
    cluster: Cluster,
    index: BlockAmenityIndex,
    stats: Mapping[str, AmenityStats],
    scheme: CategoryScheme,
) -> ClusterVector:
    """Count the cluster's amenity occurrences per category.

    Occurrences are deduplicated per cluster: a POI matched to several
    blocks of the same cluster counts once. Amenity names missing from the
    stats table are skipped (they carry no duration information).
    """
    counts = [0] * scheme.n_categories
    for occ in index.cluster_occurrences(cluster.block_ids):
        st = stats.get(occ.amenity)
        if st is None:
            continue
        counts[categorize_amenity(st, scheme) - 1] += 1
    return ClusterVector(tuple(counts))


def unknown_amenities(
    index: BlockAmenityIndex, stats: Mapping[str, AmenityStats]
) -> set[str]:
    """Amenity names present in the index but absent from the stats table."""
    names = {m.amenity for ms in index.matches.values() for m in ms}
    return names - set(stats)


def build_cluster_gaussian(
    cluster: Cluster,
    index: BlockAmenityIndex,
    stats: Mapping[str, AmenityStats],
    support: SupportSpec,
) -> ClusterGaussian:
    """Sum one discretized Gaussian per amenity occurrence in the cluster.

    Each occurrence contributes exactly unit mass: the density of
    N(mean, stdev^2) is evaluated at the bin grid and rescaled to sum 1;
    zero-stdev amenities become a unit point mass at the nearest bin. The
    result is unnormalized, total mass = occurrence count.
    """
    heights = np.zeros(support.n_bins)
    x = support.positions()
    max_pos = -support.offset + support.support_length
    for occ in index.cluster_occurrences(cluster.block_ids):
        st = stats.get(occ.amenity)
        if st is None:
            continue
        assert -support.offset <= st.mean <= max_pos, (
            f"amenity mean {st.mean} outside support; support_spec must be "
            f"built from the same stats table"
        )
        if st.stdev == 0.0:
            heights[support.nearest_bin(st.mean)] += 1.0
        else:
            g = np.exp(-((x - st.mean) ** 2) / (2.0 * st.stdev**2))
            heights += g / g.sum()
    return ClusterGaussian(support=support, heights=heights, normalized=False)


class ZeroMassError(ValueError):
    """Raised when normalizing an amenity-free (zero-mass) cluster curve."""


def normalize(g: ClusterGaussian) -> ClusterGaussian:
    """Scale heights so the curve has unit mass (sum of heights x bin width)."""
    mass = g.mass
    if mass <= 0.0:
        raise ZeroMassError("cannot normalize a zero-mass cluster curve")
    return ClusterGaussian(g.support, g.heights / mass, normalized=True)


def gaussian_magnitude_feature(g: ClusterGaussian) -> float:
    """First moment of the unnormalized curve: sum of x * f(x) * bin width.

    Interpreted as the total accumulated duration (or area) over all
    amenity occurrences in the cluster; used as an extra model feature.
    """
    if g.normalized:
        raise ValueError("magnitude feature is defined on the unnormalized curve")
    return float((g.support.positions() * g.heights).sum() * g.support.bin_width)
