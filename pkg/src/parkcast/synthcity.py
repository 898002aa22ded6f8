"""Deterministic synthetic cities for desk-scale verification.

Blocks sit on a jittered grid split into a monitored west half and an
unmonitored east half. Contiguous zones of blocks share an archetype
(office / residential / leisure) that drives both the nearby amenity draws
and the diurnal occupancy curve, so spatial clusters end up with
archetype-specific amenity mixes and occupancy patterns. All four
ingest-ready files are emitted byte-identically for a given config.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from pathlib import Path

import numpy as np

CITY_LAT = 37.77
CITY_LON = -122.42
LAT_SPACING = 0.0018  # ~200 m
LON_SPACING = 0.0022  # ~190 m at this latitude


@dataclass(frozen=True)
class Archetype:
    """A land-use profile: its amenity pool and its occupancy curve."""

    name: str
    amenities: tuple[tuple[str, float, float], ...]  # (name, mean, stdev)
    weights: tuple[float, ...]
    curve: str


DEFAULT_ARCHETYPES = (
    Archetype(
        name="office",
        amenities=(
            ("coffee_kiosk", 12.0, 4.0),
            ("copy_centre", 18.0, 6.0),
            ("parcel_counter", 25.0, 8.0),
            ("lunch_diner", 45.0, 12.0),
        ),
        weights=(0.3, 0.3, 0.3, 0.1),
        curve="office",
    ),
    Archetype(
        name="residential",
        amenities=(
            ("community_hall", 150.0, 30.0),
            ("fitness_studio", 110.0, 20.0),
            ("laundrette", 70.0, 15.0),
        ),
        weights=(0.4, 0.4, 0.2),
        curve="residential",
    ),
    Archetype(
        name="leisure",
        amenities=(
            ("bistro", 65.0, 15.0),
            ("wine_bar", 80.0, 18.0),
            ("gelato_stand", 28.0, 9.0),
            ("billiards_hall", 120.0, 25.0),
        ),
        weights=(0.35, 0.35, 0.15, 0.15),
        curve="leisure",
    ),
)


def _curve_office(weekday: int, hour: int) -> float:
    return 0.85 if weekday <= 5 and 9 <= hour <= 17 else 0.15


def _curve_residential(weekday: int, hour: int) -> float:
    return 0.8 if hour >= 19 or hour <= 6 else 0.35


def _curve_leisure(weekday: int, hour: int) -> float:
    if weekday <= 5:
        return 0.75 if 17 <= hour <= 23 else 0.25
    return 0.7 if 11 <= hour <= 23 else 0.3


_CURVES = {
    "office": _curve_office,
    "residential": _curve_residential,
    "leisure": _curve_leisure,
}


@dataclass(frozen=True)
class SyntheticCityConfig:
    n_blocks: int = 200
    n_archetypes: int = 3
    days: int = 30
    noise: float = 0.05
    seed: int = 0
    monitored_fraction: float = 0.5
    start: date = date(2023, 3, 6)  # a Monday
    archetypes: tuple[Archetype, ...] = DEFAULT_ARCHETYPES

    def __post_init__(self) -> None:
        if self.n_blocks < 4:
            raise ValueError("need at least 4 blocks")
        if not 1 <= self.n_archetypes <= len(self.archetypes):
            raise ValueError("n_archetypes out of range")
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")
        if not 0.0 < self.monitored_fraction < 1.0:
            raise ValueError("monitored_fraction must be in (0, 1)")


@dataclass
class SyntheticCityFiles:
    blocks: Path
    pois: Path
    occupancy: Path
    stats: Path

    def as_dict(self) -> dict:
        return {
            "blocks": str(self.blocks),
            "pois": str(self.pois),
            "occupancy": str(self.occupancy),
            "stats": str(self.stats),
        }


@dataclass
class _BlockSpec:
    block_id: str
    lat: float
    lon: float
    monitored: bool
    archetype: Archetype
    capacity: int = 0
    price: float = 0.0
    offset: float = 0.0


def _layout_blocks(config: SyntheticCityConfig, rng: np.random.Generator) -> list[_BlockSpec]:
    n = config.n_blocks
    n_cols = max(2, round(math.sqrt(2.0 * n)))
    n_rows = math.ceil(n / n_cols)
    monitored_cols = min(max(1, round(n_cols * config.monitored_fraction)), n_cols - 1)
    blocks = []
    for i in range(n):
        row, col = divmod(i, n_cols)
        monitored = col < monitored_cols
        # Quadrant zones inside each half keep archetypes spatially
        # contiguous and larger than a typical cluster.
        half_cols = monitored_cols if monitored else n_cols - monitored_cols
        col_in_half = col if monitored else col - monitored_cols
        quadrant = 2 * int(row >= n_rows / 2) + int(col_in_half >= half_cols / 2)
        cycle = quadrant if monitored else quadrant + 1
        archetype = config.archetypes[cycle % config.n_archetypes]
        lat = CITY_LAT + row * LAT_SPACING + rng.uniform(-0.0002, 0.0002)
        lon = CITY_LON + col * LON_SPACING + rng.uniform(-0.0002, 0.0002)
        blocks.append(
            _BlockSpec(
                block_id=f"b{i:04d}",
                lat=round(lat, 6),
                lon=round(lon, 6),
                monitored=monitored,
                archetype=archetype,
                capacity=int(rng.integers(12, 41)),
                price=float(rng.choice((0.5, 1.0, 1.5, 2.0, 2.5, 3.0))),
                offset=float(rng.normal(0.0, 0.5 * config.noise)),
            )
        )
    return blocks


def generate_synthetic_city(
    config: SyntheticCityConfig, out_dir: str | Path
) -> SyntheticCityFiles:
    """Write blocks.geojson, pois.geojson, occupancy.csv and amenity_stats.csv.

    Deterministic: the same config yields byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    blocks = _layout_blocks(config, rng)

    files = SyntheticCityFiles(
        blocks=out / "blocks.geojson",
        pois=out / "pois.geojson",
        occupancy=out / "occupancy.csv",
        stats=out / "amenity_stats.csv",
    )
    _write_blocks(blocks, files.blocks)
    _write_pois(blocks, files.pois, rng)
    _write_occupancy(blocks, files.occupancy, config, rng)
    _write_stats(config, files.stats)
    return files


def _write_blocks(blocks: list[_BlockSpec], path: Path) -> None:
    features = []
    for b in blocks:
        # Short west-east polyline, like a street block.
        half = 0.0004
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [
                        [round(b.lon - half, 6), b.lat],
                        [round(b.lon + half, 6), b.lat],
                    ],
                },
                "properties": {
                    "block_id": b.block_id,
                    "has_parking_data": b.monitored,
                    "archetype": b.archetype.name,
                },
            }
        )
    _dump_geojson(features, path)


def _write_pois(blocks: list[_BlockSpec], path: Path, rng: np.random.Generator) -> None:
    features = []
    poi_no = 0
    for b in blocks:
        for _ in range(int(rng.integers(2, 6))):
            lat = round(b.lat + rng.uniform(-0.0003, 0.0003), 6)
            lon = round(b.lon + rng.uniform(-0.0003, 0.0003), 6)
            props: dict = {"poi_id": f"p{poi_no:05d}"}
            # One in ten map points has no amenity tag, like real map data.
            if rng.random() >= 0.1:
                names = [a[0] for a in b.archetype.amenities]
                props["amenity"] = str(rng.choice(names, p=b.archetype.weights))
            features.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": [lon, lat]},
                    "properties": props,
                }
            )
            poi_no += 1
    _dump_geojson(features, path)


def _write_occupancy(
    blocks: list[_BlockSpec],
    path: Path,
    config: SyntheticCityConfig,
    rng: np.random.Generator,
) -> None:
    hours = [
        datetime.combine(config.start, time()) + timedelta(hours=h)
        for h in range(24 * config.days)
    ]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block_id", "timestamp", "price_rate", "total_spots", "occupied"])
        for b in blocks:
            if not b.monitored:
                continue
            curve = _CURVES[b.archetype.curve]
            eps = rng.normal(0.0, config.noise, size=len(hours)) if config.noise else None
            for i, ts in enumerate(hours):
                occ = curve(ts.isoweekday(), ts.hour) + b.offset
                if eps is not None:
                    occ += eps[i]
                occ = min(max(occ, 0.0), 1.0)
                writer.writerow(
                    [
                        b.block_id,
                        ts.strftime("%Y-%m-%d %H:%M:%S"),
                        b.price,
                        b.capacity,
                        int(round(occ * b.capacity)),
                    ]
                )


def _write_stats(config: SyntheticCityConfig, path: Path) -> None:
    from parkcast.represent import CategoryScheme, category_for_mean

    scheme = CategoryScheme.for_basis("time_spent")
    rows = []
    for arch in config.archetypes[: config.n_archetypes]:
        for name, mean, stdev in arch.amenities:
            rows.append((name, mean, stdev, category_for_mean(mean, scheme)))
    rows.sort()
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["amenity", "mean", "stdev", "category"])
        for name, mean, stdev, cat in rows:
            writer.writerow([name, repr(mean), repr(stdev), cat])


def _dump_geojson(features: list[dict], path: Path) -> None:
    doc = {"type": "FeatureCollection", "features": features}
    path.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8")
