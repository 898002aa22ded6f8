"""Per-cluster aggregation of raw records and model-feature extraction.

Raw per-block readings are averaged per timestamp across the blocks of a
cluster, producing one training row per distinct timestamp. Occupancy is
kept as a fraction in [0, 1] internally and rendered as a percent only at
the edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Sequence

from parkcast.ingest import OccupancyRecord

OCCUPANCY_MODES = ("rate", "count")


@dataclass(frozen=True)
class AggregatedPoint:
    """Cluster-average training row for one timestamp.

    ``occupancy`` is the fraction in [0, 1]; ``occupied`` keeps the plain
    mean of the raw occupied counts for exact reproduction of count-based
    aggregation examples.
    """

    timestamp: datetime
    price_rate: float
    total_spots: float
    occupancy: float
    occupied: float


@dataclass(frozen=True)
class FeatureVector:
    year: int
    week: int
    weekday: int  # Monday=1 .. Sunday=7
    hour: int
    price_rate: float
    total_spots: float

    def as_tuple(self) -> tuple[float, ...]:
        return (
            float(self.year),
            float(self.week),
            float(self.weekday),
            float(self.hour),
            self.price_rate,
            self.total_spots,
        )


FEATURE_NAMES = ("year", "week", "weekday", "hour", "price_rate", "total_spots")


@dataclass
class AggregationResult:
    points: list[AggregatedPoint]
    capped_rows: int = 0  # records with occupied > total_spots


def occupancy_rate(record: OccupancyRecord) -> float:
    """occupied / total_spots capped at 1.0 (sensor streams contain overfills)."""
    if record.total_spots < 1:
        raise ValueError("total_spots must be >= 1")
    return min(record.occupied / record.total_spots, 1.0)


def aggregate_cluster(
    records: Iterable[OccupancyRecord],
    blocks_in_cluster: set[str],
    occupancy_mode: str = "rate",
) -> AggregationResult:
    """Average records per timestamp across the cluster's blocks.

    ``occupancy_mode`` selects how the occupancy fraction is formed:
    "rate" (default) averages per-record capped rates, which is the
    quantity bounded in [0, 1]; "count" divides the mean occupied count by
    the mean capacity, matching plain count averaging.
    """
    if occupancy_mode not in OCCUPANCY_MODES:
        raise ValueError(f"occupancy_mode must be one of {OCCUPANCY_MODES}")
    buckets: dict[datetime, list[OccupancyRecord]] = {}
    capped = 0
    for r in records:
        if r.block_id not in blocks_in_cluster:
            continue
        if r.occupied > r.total_spots:
            capped += 1
        buckets.setdefault(r.timestamp, []).append(r)
    points = []
    for ts in sorted(buckets):
        rows = buckets[ts]
        n = len(rows)
        price = sum(r.price_rate for r in rows) / n
        spots = sum(r.total_spots for r in rows) / n
        occupied = sum(r.occupied for r in rows) / n
        if occupancy_mode == "rate":
            occ = sum(occupancy_rate(r) for r in rows) / n
        else:
            occ = min(occupied / spots, 1.0)
        points.append(AggregatedPoint(ts, price, spots, occ, occupied))
    return AggregationResult(points, capped)


def extract_features(
    timestamp: datetime, price_rate: float, total_spots: float
) -> FeatureVector:
    """Decompose a timestamp into ISO-8601 calendar features plus the two scalars.

    The (year, week, weekday) triple follows the ISO calendar, so early
    January dates can map to week 52/53 of the prior ISO year and week
    ranges over [1, 53].
    """
    iso = timestamp.isocalendar()
    return FeatureVector(
        year=int(iso[0]),
        week=int(iso[1]),
        weekday=int(iso[2]),
        hour=timestamp.hour,
        price_rate=float(price_rate),
        total_spots=float(total_spots),
    )


def features_for_points(points: Sequence[AggregatedPoint]) -> list[FeatureVector]:
    return [extract_features(p.timestamp, p.price_rate, p.total_spots) for p in points]
