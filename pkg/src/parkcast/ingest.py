"""Input parsing and spatial matching.

Readers for the three input families (occupancy CSV, blocks/POIs GeoJSON,
amenity-statistics CSV) plus the great-circle matcher that attaches each
amenity point to every block within a configurable merge distance.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_M = 6_371_000.0

OCCUPANCY_COLUMNS = ("block_id", "timestamp", "price_rate", "total_spots", "occupied")
STATS_COLUMNS = ("amenity", "mean", "stdev", "category")

_TS_FORMATS = ("%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M")


@dataclass(frozen=True)
class OccupancyRecord:
    """One sensor reading for one street block at one timestamp."""

    block_id: str
    timestamp: datetime
    price_rate: float
    total_spots: int
    occupied: int


@dataclass(frozen=True)
class Block:
    """A street block, the smallest location unit of the occupancy data."""

    block_id: str
    centroid: tuple[float, float]  # (lat, lon) degrees
    has_parking_data: bool
    geometry: tuple[tuple[float, float], ...] | None = None  # (lat, lon) vertices


@dataclass(frozen=True)
class Poi:
    """A point of interest; ``amenity`` is None when the map tag is empty."""

    poi_id: str
    position: tuple[float, float]  # (lat, lon) degrees
    amenity: str | None = None
    area_m2: float | None = None


@dataclass(frozen=True)
class AmenityStats:
    """Mean/stdev of an amenity's visiting duration (minutes) or reduced area."""

    amenity: str
    mean: float
    stdev: float
    category: int


@dataclass(frozen=True)
class RowIssue:
    """A recoverable per-row parse or validation failure."""

    line: int
    message: str


@dataclass
class ParsedOccupancy:
    records: list[OccupancyRecord]
    issues: list[RowIssue] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class PoiMatch:
    poi_id: str
    amenity: str


@dataclass
class BlockAmenityIndex:
    """Per-block multiset of amenity points within the merge distance.

    A POI may attach to several blocks; occurrence counting with or without
    per-cluster deduplication is left to the consumer via
    :meth:`cluster_occurrences`.
    """

    matches: dict[str, list[PoiMatch]]
    merge_distance_m: float
    unmatched_pois: int = 0
    skipped_pois: int = 0

    def amenity_counts(self, block_id: str) -> Counter:
        return Counter(m.amenity for m in self.matches.get(block_id, []))

    def cluster_occurrences(
        self, block_ids: Iterable[str], dedup: bool = True
    ) -> list[PoiMatch]:
        """Amenity occurrences across a set of blocks.

        With ``dedup`` (the default) a POI reachable from several blocks of
        the set counts once; without it, once per reachable block.
        """
        occurrences = []
        for bid in sorted(set(block_ids)):
            occurrences.extend(self.matches.get(bid, []))
        if not dedup:
            return occurrences
        seen: dict[str, PoiMatch] = {}
        for m in occurrences:
            seen.setdefault(m.poi_id, m)
        return [seen[k] for k in sorted(seen)]


def parse_occupancy_csv(
    path: str | Path, columns: Sequence[str] = OCCUPANCY_COLUMNS
) -> ParsedOccupancy:
    """Parse an occupancy CSV into records, collecting row-level issues.

    The header must match ``columns`` exactly (whitespace-trimmed). Rows
    that fail to parse or violate a field invariant are reported in
    ``issues`` with their 1-based line number; they are never silently
    dropped.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected header {','.join(columns)}")
        if [h.strip() for h in header] != list(columns):
            raise ValueError(
                f"{path}: malformed header {header!r}, expected {list(columns)}"
            )
        records: list[OccupancyRecord] = []
        issues: list[RowIssue] = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(columns):
                issues.append(RowIssue(line_no, f"expected {len(columns)} fields, got {len(row)}"))
                continue
            try:
                records.append(_parse_occupancy_row([c.strip() for c in row]))
            except ValueError as exc:
                issues.append(RowIssue(line_no, str(exc)))
    return ParsedOccupancy(records, issues)


def _parse_occupancy_row(row: list[str]) -> OccupancyRecord:
    block_id, ts_raw, price_raw, spots_raw, occupied_raw = row
    if not block_id:
        raise ValueError("empty block_id")
    ts = parse_timestamp(ts_raw)
    price = float(price_raw)
    if price < 0:
        raise ValueError(f"negative price_rate {price}")
    spots = int(spots_raw)
    if spots < 1:
        raise ValueError(f"total_spots must be >= 1, got {spots}")
    occupied = int(occupied_raw)
    if occupied < 0:
        raise ValueError(f"negative occupied {occupied}")
    return OccupancyRecord(block_id, ts, price, spots, occupied)


def parse_timestamp(raw: str) -> datetime:
    """Parse a naive local timestamp, seconds optional, hour zero-pad optional."""
    for fmt in _TS_FORMATS:
        try:
            return datetime.strptime(raw, fmt)
        except ValueError:
            continue
    raise ValueError(f"unparseable timestamp {raw!r}")


def records_to_csv(records: Iterable[OccupancyRecord], path: str | Path) -> None:
    """Serialize records back to the canonical occupancy CSV layout."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(OCCUPANCY_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.block_id,
                    r.timestamp.strftime("%Y-%m-%d %H:%M:%S"),
                    repr(r.price_rate),
                    r.total_spots,
                    r.occupied,
                ]
            )


def _check_lat_lon(lat: float, lon: float, where: str) -> None:
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise ValueError(f"{where}: coordinates ({lat}, {lon}) out of range")


def _vertices(geometry: dict, where: str) -> list[tuple[float, float]]:
    """Geometry vertices as (lat, lon), GeoJSON order [lon, lat] flipped."""
    gtype = geometry.get("type")
    coords = geometry.get("coordinates")
    if gtype == "Point":
        pts = [coords]
    elif gtype == "LineString":
        pts = list(coords)
    elif gtype == "Polygon":
        ring = list(coords[0])
        # GeoJSON rings repeat the first vertex at the end; drop the duplicate.
        if len(ring) > 1 and ring[0] == ring[-1]:
            ring = ring[:-1]
        pts = ring
    else:
        raise ValueError(f"{where}: unsupported geometry type {gtype!r}")
    out = []
    for lon, lat in pts:
        _check_lat_lon(lat, lon, where)
        out.append((float(lat), float(lon)))
    return out


def _polygon_area_m2(vertices: list[tuple[float, float]]) -> float:
    """Shoelace area on a local equirectangular projection, in m^2."""
    if len(vertices) < 3:
        return 0.0
    lat0 = math.radians(sum(v[0] for v in vertices) / len(vertices))
    deg = EARTH_RADIUS_M * math.pi / 180.0
    xy = [(lon * deg * math.cos(lat0), lat * deg) for lat, lon in vertices]
    area = 0.0
    for (x1, y1), (x2, y2) in zip(xy, xy[1:] + xy[:1]):
        area += x1 * y2 - x2 * y1
    return abs(area) / 2.0


def _load_feature_collection(path: Path) -> list[dict]:
    with path.open(encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ValueError(f"{path}: not a GeoJSON FeatureCollection")
    features = doc.get("features")
    if not isinstance(features, list):
        raise ValueError(f"{path}: missing features array")
    return features


def parse_geodata(
    blocks_path: str | Path, pois_path: str | Path
) -> tuple[list[Block], list[Poi]]:
    """Load block and POI FeatureCollections.

    Block features must carry ``block_id`` and ``has_parking_data``
    properties. POIs keep an empty/missing ``amenity`` tag as None: they
    are retained but unusable for similarity. Polygon POIs get their area
    computed when no ``area_m2`` property is present.
    """
    blocks: list[Block] = []
    seen_ids: set[str] = set()
    for i, feat in enumerate(_load_feature_collection(Path(blocks_path))):
        where = f"{blocks_path}: block feature {i}"
        props = feat.get("properties") or {}
        block_id = props.get("block_id")
        if block_id is None:
            raise ValueError(f"{where}: missing block_id property")
        block_id = str(block_id)
        if block_id in seen_ids:
            raise ValueError(f"{where}: duplicate block_id {block_id!r}")
        seen_ids.add(block_id)
        if "has_parking_data" not in props:
            raise ValueError(f"{where}: missing has_parking_data property")
        verts = _vertices(feat.get("geometry") or {}, where)
        lat = sum(v[0] for v in verts) / len(verts)
        lon = sum(v[1] for v in verts) / len(verts)
        blocks.append(
            Block(
                block_id=block_id,
                centroid=(lat, lon),
                has_parking_data=bool(props["has_parking_data"]),
                geometry=tuple(verts) if len(verts) > 1 else None,
            )
        )

    pois: list[Poi] = []
    for i, feat in enumerate(_load_feature_collection(Path(pois_path))):
        where = f"{pois_path}: POI feature {i}"
        props = feat.get("properties") or {}
        geometry = feat.get("geometry") or {}
        verts = _vertices(geometry, where)
        lat = sum(v[0] for v in verts) / len(verts)
        lon = sum(v[1] for v in verts) / len(verts)
        amenity = props.get("amenity")
        if amenity is not None:
            amenity = str(amenity).strip().lower() or None
        area = props.get("area_m2")
        if area is None and geometry.get("type") == "Polygon":
            area = _polygon_area_m2(verts)
        poi_id = str(feat.get("id") or props.get("poi_id") or f"poi{i}")
        pois.append(Poi(poi_id, (lat, lon), amenity, None if area is None else float(area)))
    return blocks, pois


def load_amenity_stats(path: str | Path, basis: str) -> dict[str, AmenityStats]:
    """Load the amenity statistics table for the given basis.

    ``basis`` is ``time_spent`` (means/stdevs in minutes) or ``area``
    (values already reduced by the 20x convention). Each row's category is
    checked against the basis thresholds; inconsistent rows are an error.
    """
    from parkcast.represent import CategoryScheme, category_for_mean

    scheme = CategoryScheme.for_basis(basis)  # raises on unknown basis
    path = Path(path)
    table: dict[str, AmenityStats] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != list(STATS_COLUMNS):
            raise ValueError(f"{path}: malformed header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            name, mean_raw, stdev_raw, cat_raw = [c.strip() for c in row]
            if name in table:
                raise ValueError(f"{path}:{line_no}: duplicate amenity {name!r}")
            mean = float(mean_raw)
            stdev = float(stdev_raw)
            category = int(cat_raw)
            if mean <= 0:
                raise ValueError(f"{path}:{line_no}: mean must be positive, got {mean}")
            if stdev < 0:
                raise ValueError(f"{path}:{line_no}: negative stdev {stdev}")
            expected = category_for_mean(mean, scheme)
            if category != expected:
                raise ValueError(
                    f"{path}:{line_no}: {name!r} has category {category}, "
                    f"mean {mean} implies {expected}"
                )
            table[name] = AmenityStats(name, mean, stdev, category)
    return table


def haversine(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in meters between two (lat, lon) points.

    Spherical model with radius 6,371,000 m; symmetric and non-negative.
    """
    lat1, lon1 = a
    lat2, lon2 = b
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlam = math.radians(lon2 - lon1)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.atan2(math.sqrt(h), math.sqrt(1.0 - h))


def _haversine_matrix(points: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Pairwise distances (meters), shape (len(points), len(targets))."""
    p = np.radians(points)[:, None, :]
    t = np.radians(targets)[None, :, :]
    dphi = t[..., 0] - p[..., 0]
    dlam = t[..., 1] - p[..., 1]
    h = np.sin(dphi / 2.0) ** 2 + np.cos(p[..., 0]) * np.cos(t[..., 0]) * np.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arctan2(np.sqrt(h), np.sqrt(1.0 - h))


def match_amenities(
    blocks: Sequence[Block], pois: Sequence[Poi], merge_distance_m: float
) -> BlockAmenityIndex:
    """Attach every named POI to all blocks within ``merge_distance_m``.

    The boundary is inclusive: a POI exactly at the merge distance counts
    as matched. POIs without an amenity name are skipped; named POIs that
    reach no block are tallied in the diagnostics.
    """
    if merge_distance_m <= 0:
        raise ValueError(f"merge_distance_m must be positive, got {merge_distance_m}")
    if not blocks:
        raise ValueError("empty block list")
    named = [p for p in pois if p.amenity]
    index = BlockAmenityIndex(
        matches={b.block_id: [] for b in blocks},
        merge_distance_m=float(merge_distance_m),
        skipped_pois=len(pois) - len(named),
    )
    if not named:
        return index
    block_ids = [b.block_id for b in blocks]
    block_xy = np.array([b.centroid for b in blocks], dtype=float)
    poi_xy = np.array([p.position for p in named], dtype=float)
    # Chunked so the distance matrix stays small for city-scale POI counts.
    chunk = 2048
    unmatched = 0
    for start in range(0, len(named), chunk):
        dist = _haversine_matrix(poi_xy[start : start + chunk], block_xy)
        within = dist <= merge_distance_m
        for local_i, poi in enumerate(named[start : start + chunk]):
            hits = np.nonzero(within[local_i])[0]
            if hits.size == 0:
                unmatched += 1
                continue
            m = PoiMatch(poi.poi_id, poi.amenity)
            for j in hits:
                index.matches[block_ids[j]].append(m)
    index.unmatched_pois = unmatched
    return index
