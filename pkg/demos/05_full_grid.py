"""Sweep cluster counts and merge distances, the full reporting grid.

By default this runs on a generated city. Point it at a real export to
reproduce the reporting layout on actual data:

    python demos/05_full_grid.py --occupancy occ.csv --blocks blocks.geojson \
        --pois pois.geojson --stats amenity_stats.csv
"""

import argparse
import tempfile
from pathlib import Path

from parkcast.evaluate import evaluate_city
from parkcast.ingest import load_amenity_stats, parse_geodata, parse_occupancy_csv
from parkcast.synthcity import SyntheticCityConfig, generate_synthetic_city

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--occupancy")
parser.add_argument("--blocks")
parser.add_argument("--pois")
parser.add_argument("--stats")
parser.add_argument("--basis", default="time_spent", choices=("time_spent", "area"))
parser.add_argument("--ks", type=int, nargs="+", default=[4, 8])
parser.add_argument("--merges", type=float, nargs="+", default=[100.0, 200.0, 400.0])
parser.add_argument("--seed", type=int, default=42)
args = parser.parse_args()

if args.occupancy:
    occ_path, blocks_path, pois_path, stats_path = (
        args.occupancy, args.blocks, args.pois, args.stats,
    )
else:
    out = Path(tempfile.mkdtemp(prefix="parkcast_demo_"))
    files = generate_synthetic_city(SyntheticCityConfig(n_blocks=160, days=10, seed=7), out)
    occ_path, blocks_path, pois_path, stats_path = (
        files.occupancy, files.blocks, files.pois, files.stats,
    )
    print(f"(no inputs given; using a generated city in {out})\n")

parsed = parse_occupancy_csv(occ_path)
blocks, pois = parse_geodata(blocks_path, pois_path)
stats = load_amenity_stats(stats_path, args.basis)

print(f"{'k':>3} {'merge':>6} {'cosine':>8} {'rank_cos':>9} {'emd':>8} {'rank_emd':>9}")
for k in args.ks:
    for merge in args.merges:
        result = evaluate_city(
            blocks, parsed.records, pois, stats,
            k=k, merge_distance_m=merge, basis=args.basis,
            seed=args.seed, learners=("gbt",),
        )
        m = result.correlations["gbt"].means

        def fmt(v):
            return "   --" if v is None else f"{v:8.2f}"

        print(
            f"{k:>3} {merge:>6.0f} {fmt(m['cosine'])} {fmt(m['rank_cosine']):>9} "
            f"{fmt(m['emd'])} {fmt(m['rank_emd']):>9}"
        )
