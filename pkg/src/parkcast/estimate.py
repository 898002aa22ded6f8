"""Similarity-widened occupancy intervals for unmonitored clusters.

A monitored cluster's model gives a point estimate; the similarity to the
target cluster stretches it into an interval, [point - (1 - sim),
point + (1 - sim)] for cosine or +- the normalized EMD, clamped to [0, 1].
Ordering the sources best-similarity-first and intersecting the intervals
cumulatively yields the (possibly empty) intersection intervals.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, time
from typing import Mapping, Sequence

from parkcast.aggregate import FeatureVector, extract_features
from parkcast.geocluster import Cluster
from parkcast.learn import TrainedModel, predict
from parkcast.similarity import SimilarityMatrix

METRIC_COSINE = "cosine"
METRIC_EMD = "emd"

DEFAULT_HOURS = (0, 3, 6, 9, 12, 15, 18, 21)
DEFAULT_PRICE_RATE = 1.0
DEFAULT_TOTAL_SPOTS = 20.0


@dataclass(frozen=True)
class EstimationInterval:
    lo: float
    hi: float
    point: float
    source_cluster: int
    similarity: float
    metric: str

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass
class EstimateTable:
    """Per-target ranking of source intervals with running intersections."""

    target_cluster: int
    timestamp: datetime
    metric: str
    rows: list[tuple[EstimationInterval, tuple[float, float] | None]]


def _make_interval(point: float, widening: float, similarity: float,
                   metric: str, source_cluster: int) -> EstimationInterval:
    if not 0.0 <= point <= 1.0:
        raise ValueError(f"point estimate {point} outside [0, 1]")
    if not 0.0 <= similarity <= 1.0:
        raise ValueError(f"similarity {similarity} outside [0, 1]")
    return EstimationInterval(
        lo=max(point - widening, 0.0),
        hi=min(point + widening, 1.0),
        point=point,
        source_cluster=source_cluster,
        similarity=similarity,
        metric=metric,
    )


def interval_cosine(point: float, sim: float, source_cluster: int = 0) -> EstimationInterval:
    """Widen a point estimate by (1 - cosine similarity) on each side."""
    return _make_interval(point, 1.0 - sim, sim, METRIC_COSINE, source_cluster)


def interval_emd(point: float, emd: float, source_cluster: int = 0) -> EstimationInterval:
    """Widen a point estimate by the normalized EMD on each side."""
    return _make_interval(point, emd, emd, METRIC_EMD, source_cluster)


def _similarity_sort_key(interval: EstimationInterval) -> tuple:
    # Best similarity first: high cosine / low distance; ties by source id.
    if interval.metric == METRIC_COSINE:
        return (-interval.similarity, interval.source_cluster)
    return (interval.similarity, interval.source_cluster)


def intersection_intervals(
    rows: Sequence[EstimationInterval],
) -> list[tuple[float, float] | None]:
    """Running intersection over best-similarity-first ordered intervals.

    Entry k is the intersection of intervals 1..k; once it becomes empty it
    stays empty (reported as None).
    """
    keys = [_similarity_sort_key(r) for r in rows]
    if keys != sorted(keys):
        raise ValueError("intervals must be ordered best-similarity-first")
    out: list[tuple[float, float] | None] = []
    lo, hi = 0.0, 1.0
    alive = True
    for r in rows:
        if alive:
            lo = max(lo, r.lo)
            hi = min(hi, r.hi)
            alive = lo <= hi
        out.append((lo, hi) if alive else None)
    return out


def build_unmonitored_input(
    day: date,
    hours: Sequence[int] = DEFAULT_HOURS,
    price_rate: float = DEFAULT_PRICE_RATE,
    total_spots: float = DEFAULT_TOTAL_SPOTS,
) -> list[FeatureVector]:
    """Model inputs for a cluster without data: one row per requested hour.

    Defaults follow the reference grid of 8 times at 3-hour spacing with
    price 1.0 and capacity 20; pass cluster averages computed from the
    monitored data to use the data-driven variant.
    """
    if not hours:
        raise ValueError("at least one time required")
    return [
        extract_features(datetime.combine(day, time(hour=h)), price_rate, total_spots)
        for h in hours
    ]


def monitored_averages(points_by_cluster: Mapping[int, Sequence]) -> tuple[float, float]:
    """Mean price rate and capacity over all monitored clusters' training rows."""
    prices, spots = [], []
    for points in points_by_cluster.values():
        for p in points:
            prices.append(p.price_rate)
            spots.append(p.total_spots)
    if not prices:
        raise ValueError("no monitored training rows")
    return sum(prices) / len(prices), sum(spots) / len(spots)


def estimate_for_target(
    target: Cluster | int,
    models: Mapping[int, TrainedModel],
    sims: SimilarityMatrix,
    features: FeatureVector,
    metric: str,
    timestamp: datetime | None = None,
) -> EstimateTable:
    """Build the full source-ranked interval table for one unmonitored cluster."""
    if metric not in (METRIC_COSINE, METRIC_EMD):
        raise ValueError(f"unknown metric {metric!r}")
    target_id = target.cluster_id if isinstance(target, Cluster) else int(target)
    intervals = []
    for source_id in sorted(models):
        model = models[source_id]
        try:
            value = sims.value(source_id, target_id)
        except ValueError as exc:
            raise ValueError(
                f"no similarity entry for source {source_id}, target {target_id}"
            ) from exc
        point = predict(model, features)
        if metric == METRIC_COSINE:
            intervals.append(interval_cosine(point, value, source_id))
        else:
            intervals.append(interval_emd(point, value, source_id))
    intervals.sort(key=_similarity_sort_key)
    running = intersection_intervals(intervals)
    ts = timestamp or datetime(2000, 1, 1)
    return EstimateTable(
        target_cluster=target_id,
        timestamp=ts,
        metric=metric,
        rows=list(zip(intervals, running)),
    )


def format_table(table: EstimateTable) -> str:
    """Fixed-width text rendering with whole-percent interval bounds."""
    lines = [
        f"target cluster {table.target_cluster}  "
        f"{table.timestamp:%Y-%m-%d %H:%M}  metric={table.metric}",
        f"{'source_id':>9}  {'similarity':>10}  {'lo%':>4}  {'hi%':>4}  {'eii_lo%':>7}  {'eii_hi%':>7}",
    ]
    for interval, eii in table.rows:
        lo = round(interval.lo * 100)
        hi = round(interval.hi * 100)
        if eii is None:
            eii_lo = eii_hi = "empty"
        else:
            eii_lo, eii_hi = str(round(eii[0] * 100)), str(round(eii[1] * 100))
        lines.append(
            f"{interval.source_cluster:>9}  {interval.similarity:>10.4f}  "
            f"{lo:>4}  {hi:>4}  {eii_lo:>7}  {eii_hi:>7}"
        )
    return "\n".join(lines)
