"""Train per-cluster models and read estimation intervals for a sensorless area.

Uses the workspace layer end to end, exactly like the command line would:
    parkcast synth / ingest / cluster / train / similarity / estimate
"""

import tempfile
from datetime import datetime
from pathlib import Path

from parkcast.estimate import format_table
from parkcast.synthcity import SyntheticCityConfig, generate_synthetic_city
from parkcast.workspace import Workspace

root = Path(tempfile.mkdtemp(prefix="parkcast_demo_"))
files = generate_synthetic_city(SyntheticCityConfig(n_blocks=120, days=7, seed=7), root / "city")

ws = Workspace(root)
ws.ingest(
    occupancy=files.occupancy,
    blocks=files.blocks,
    pois=files.pois,
    amenity_stats=files.stats,
    basis="time_spent",
    merge_distance_m=100.0,
)
ws.cluster(k=4, ratio=2.6, seed=42)

models = ws.train("gbt", seed=42)
print("trained one boosted-trees model per monitored cluster:")
for cid, model in sorted(models.items()):
    print(f"  cluster {cid}: cv_rmse {model.cv_rmse * 100:.2f}%  {model.hyperparameters}")

ws.build_similarity("cosine", "time_spent")
ws.build_similarity("emd", "time_spent")

# Interval tables for one unmonitored cluster at two times of day. The
# widening is (1 - cosine) or the normalized EMD; rows are ranked best
# similarity first and intersected cumulatively.
for hour in (9, 21):
    table = ws.estimate(target_id=2, timestamp=datetime(2017, 11, 4, hour), metric="cosine")
    print()
    print(format_table(table))
