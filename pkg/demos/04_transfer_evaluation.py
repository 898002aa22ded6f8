"""Does similarity predict how well a model transfers? The core experiment.

Every monitored cluster's model is tested on every other monitored cluster;
the per-source error rows are then correlated against the similarity rows.
Cosine similarity should correlate negatively with the error (more similar,
less error) and the earth mover's distance positively.
"""

import tempfile
from pathlib import Path

from parkcast.evaluate import evaluate_city
from parkcast.ingest import load_amenity_stats, parse_geodata, parse_occupancy_csv
from parkcast.synthcity import SyntheticCityConfig, generate_synthetic_city

out = Path(tempfile.mkdtemp(prefix="parkcast_demo_"))
files = generate_synthetic_city(
    SyntheticCityConfig(n_blocks=120, n_archetypes=3, days=10, seed=7), out
)
parsed = parse_occupancy_csv(files.occupancy)
blocks, pois = parse_geodata(files.blocks, files.pois)
stats = load_amenity_stats(files.stats, "time_spent")

result = evaluate_city(
    blocks,
    parsed.records,
    pois,
    stats,
    k=4,
    merge_distance_m=100.0,
    seed=42,
    learners=("gbt", "decision_tree"),
    run_extended=True,
)

for learner, matrix in result.transfer.items():
    errs = sorted(matrix.errors.items())
    print(f"{learner}: transfer RMSE (percent scale) over {len(errs)} ordered pairs")
    for (s, t), e in errs[:6]:
        print(f"  {s} -> {t}: {e:.1f}")
    print("  ...")

print("\nbest-learner fractions over all pairs:", result.fractions)

for learner, report in result.correlations.items():
    means = {name: round(v, 3) for name, v in report.means.items() if v is not None}
    print(f"{learner} similarity-vs-error correlations: {means}")

ext = result.extended
print(
    f"\nall-but-one models: base {ext.mean_base:.2f}% vs "
    f"amenity-extended {ext.mean_extended:.2f}% mean held-out RMSE"
)
