"""Generate a synthetic city and split it into monitored/unmonitored clusters.

Walks the first two pipeline stages in memory and prints what they produce.
Run from the repository root:  python demos/01_generate_and_cluster.py
"""

import tempfile
from collections import Counter
from pathlib import Path

from parkcast.geocluster import partition_city, size_dispersion
from parkcast.ingest import match_amenities, parse_geodata, parse_occupancy_csv
from parkcast.synthcity import SyntheticCityConfig, generate_synthetic_city

out = Path(tempfile.mkdtemp(prefix="parkcast_demo_"))
config = SyntheticCityConfig(n_blocks=120, n_archetypes=3, days=7, seed=7)
files = generate_synthetic_city(config, out)
print(f"city written to {out}")

# Parse everything back the way the ingest stage would.
parsed = parse_occupancy_csv(files.occupancy)
blocks, pois = parse_geodata(files.blocks, files.pois)
print(f"{len(parsed.records)} occupancy records, {len(blocks)} blocks, {len(pois)} POIs")

monitored = sum(b.has_parking_data for b in blocks)
print(f"{monitored} monitored blocks, {len(blocks) - monitored} unmonitored")

# Attach amenities to blocks within walking distance.
index = match_amenities(blocks, pois, merge_distance_m=100.0)
n_attached = sum(len(ms) for ms in index.matches.values())
print(
    f"merge distance 100 m: {n_attached} block-amenity attachments, "
    f"{index.skipped_pois} POIs without a name, {index.unmatched_pois} out of reach"
)

# Two separate K-Means++ runs, one per group, with the proportional k rule.
partition = partition_city(blocks, k_with=4, ratio=2.6, seed=42)
print(f"\nk_with=4 -> k_without={partition.k_without} (floor of 2.6 x 4)")
for cluster in partition.clusters_with:
    amenities = Counter(
        m.amenity for m in index.cluster_occurrences(cluster.block_ids)
    ).most_common(3)
    print(
        f"  monitored cluster {cluster.cluster_id}: {len(cluster.block_ids)} blocks, "
        f"top amenities {amenities}"
    )
print(f"cluster-size dispersion (diagnostic): {size_dispersion(partition.clusters_with):.2f}")
