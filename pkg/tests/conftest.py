from dataclasses import dataclass
from pathlib import Path

import pytest

from parkcast.ingest import (
    AmenityStats,
    Block,
    Poi,
    load_amenity_stats,
    parse_geodata,
    parse_occupancy_csv,
)
from parkcast.synthcity import SyntheticCityConfig, SyntheticCityFiles, generate_synthetic_city

DATA_DIR = Path(__file__).parent / "data"


@dataclass
class City:
    """A generated city parsed into memory, shared by integration tests."""

    files: SyntheticCityFiles
    blocks: list[Block]
    pois: list[Poi]
    records: list
    stats: dict[str, AmenityStats]
    config: SyntheticCityConfig


def make_city(out_dir: Path, **overrides) -> City:
    config = SyntheticCityConfig(**overrides)
    files = generate_synthetic_city(config, out_dir)
    parsed = parse_occupancy_csv(files.occupancy)
    assert not parsed.issues
    blocks, pois = parse_geodata(files.blocks, files.pois)
    stats = load_amenity_stats(files.stats, "time_spent")
    return City(files, blocks, pois, parsed.records, stats, config)


@pytest.fixture(scope="session")
def small_city(tmp_path_factory) -> City:
    """60 blocks, 5 days: fast enough for per-module integration tests."""
    return make_city(tmp_path_factory.mktemp("small_city"), n_blocks=60, days=5, seed=7)


def build_pipeline(city: City, root: Path, k: int = 3, seed: int = 1):
    """Run every stage over a generated city into a workspace directory."""
    from parkcast.workspace import Workspace

    ws = Workspace(root)
    ws.ingest(
        occupancy=city.files.occupancy,
        blocks=city.files.blocks,
        pois=city.files.pois,
        amenity_stats=city.files.stats,
        basis="time_spent",
        merge_distance_m=100.0,
    )
    ws.cluster(k, 2.6, seed)
    ws.train("gbt", seed)
    ws.build_similarity("cosine", "time_spent")
    ws.build_similarity("emd", "time_spent")
    return ws


@pytest.fixture(scope="session")
def small_workspace(small_city, tmp_path_factory):
    return build_pipeline(small_city, tmp_path_factory.mktemp("workspace"))


@pytest.fixture(scope="session")
def duration_stats_path() -> Path:
    return DATA_DIR / "duration_stats.csv"


@pytest.fixture(scope="session")
def area_stats_path() -> Path:
    return DATA_DIR / "area_stats.csv"
