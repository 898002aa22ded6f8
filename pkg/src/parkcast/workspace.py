"""Workspace persistence and stage orchestration.

A workspace directory accumulates the artifacts of the pipeline stages:

    meta.json                  ingest configuration + diagnostics
    occupancy.csv              normalized occupancy records
    geodata.json               parsed blocks and POIs
    amenity_index.json         block -> matched POI list (merge distance)
    stats/<basis>.csv          validated amenity statistics
    partition.json             spatial clusters of both groups
    training/with_data/<id>.csv   aggregated training rows per cluster
    models/<id>.model          one serialized model per monitored cluster
    models/index.json          model summaries
    representations.json       per-cluster vectors and curve heights
    similarity/<metric>-<basis>.csv   monitored x unmonitored values

All writers are deterministic: rerunning a stage with the same inputs and
seeds reproduces each file byte for byte.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from parkcast import aggregate as agg
from parkcast import estimate as est
from parkcast import learn, represent, similarity
from parkcast.geocluster import (
    GROUP_WITH,
    GROUP_WITHOUT,
    Cluster,
    ClusterPartition,
    partition_city,
)
from parkcast.ingest import (
    AmenityStats,
    Block,
    BlockAmenityIndex,
    OccupancyRecord,
    Poi,
    PoiMatch,
    load_amenity_stats,
    match_amenities,
    parse_geodata,
    parse_occupancy_csv,
    parse_timestamp,
    records_to_csv,
)

SCHEMA_VERSION = "1"


class WorkspaceError(RuntimeError):
    """A required artifact is missing or artifacts disagree."""


def _dump_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(doc, sort_keys=True, indent=1, separators=(",", ": ")) + "\n",
        encoding="utf-8",
    )


def _load_json(path: Path):
    if not path.exists():
        raise WorkspaceError(f"missing workspace artifact: {path.name}")
    return json.loads(path.read_text(encoding="utf-8"))


@dataclass
class Workspace:
    root: Path

    def __init__(self, root: str | Path):
        self.root = Path(root)

    # -- paths ------------------------------------------------------------

    @property
    def meta_path(self) -> Path:
        return self.root / "meta.json"

    @property
    def partition_path(self) -> Path:
        return self.root / "partition.json"

    def stats_path(self, basis: str) -> Path:
        return self.root / "stats" / f"{basis}.csv"

    def similarity_path(self, metric: str, basis: str) -> Path:
        return self.root / "similarity" / f"{metric}-{basis}.csv"

    def training_path(self, cluster_id: int) -> Path:
        return self.root / "training" / GROUP_WITH / f"{cluster_id}.csv"

    def model_path(self, cluster_id: int) -> Path:
        return self.root / "models" / f"{cluster_id}.model"

    # -- ingest stage -------------------------------------------------------

    def ingest(
        self,
        occupancy: str | Path,
        blocks: str | Path,
        pois: str | Path,
        amenity_stats: str | Path,
        basis: str,
        merge_distance_m: float,
    ) -> dict:
        """Parse and validate all inputs, match amenities, persist everything."""
        self.root.mkdir(parents=True, exist_ok=True)
        parsed = parse_occupancy_csv(occupancy)
        block_list, poi_list = parse_geodata(blocks, pois)
        stats = load_amenity_stats(amenity_stats, basis)
        index = match_amenities(block_list, poi_list, merge_distance_m)

        records_to_csv(parsed.records, self.root / "occupancy.csv")
        _dump_json(
            self.root / "geodata.json",
            {
                "blocks": [
                    {
                        "block_id": b.block_id,
                        "centroid": list(b.centroid),
                        "has_parking_data": b.has_parking_data,
                        "geometry": [list(v) for v in b.geometry] if b.geometry else None,
                    }
                    for b in block_list
                ],
                "pois": [
                    {
                        "poi_id": p.poi_id,
                        "position": list(p.position),
                        "amenity": p.amenity,
                        "area_m2": p.area_m2,
                    }
                    for p in poi_list
                ],
            },
        )
        _dump_json(
            self.root / "amenity_index.json",
            {
                "merge_distance_m": index.merge_distance_m,
                "unmatched_pois": index.unmatched_pois,
                "skipped_pois": index.skipped_pois,
                "matches": {
                    bid: [[m.poi_id, m.amenity] for m in ms]
                    for bid, ms in index.matches.items()
                },
            },
        )
        stats_dst = self.stats_path(basis)
        stats_dst.parent.mkdir(parents=True, exist_ok=True)
        with stats_dst.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["amenity", "mean", "stdev", "category"])
            for name in sorted(stats):
                s = stats[name]
                writer.writerow([s.amenity, repr(s.mean), repr(s.stdev), s.category])
        unknown = sorted(represent.unknown_amenities(index, stats))
        diagnostics = {
            "records": len(parsed.records),
            "row_issues": len(parsed.issues),
            "blocks": len(block_list),
            "pois": len(poi_list),
            "pois_without_amenity": index.skipped_pois,
            "pois_unmatched": index.unmatched_pois,
            "amenities_without_stats": unknown,
        }
        meta = {"version": SCHEMA_VERSION, "basis": basis,
                "merge_distance_m": float(merge_distance_m), "diagnostics": diagnostics}
        if self.meta_path.exists():
            old = _load_json(self.meta_path)
            meta["bases"] = sorted(set(old.get("bases", [old.get("basis")])) | {basis})
        else:
            meta["bases"] = [basis]
        _dump_json(self.meta_path, meta)
        return diagnostics

    # -- loading ------------------------------------------------------------

    def meta(self) -> dict:
        return _load_json(self.meta_path)

    def load_records(self) -> list[OccupancyRecord]:
        parsed = parse_occupancy_csv(self.root / "occupancy.csv")
        if parsed.issues:
            raise WorkspaceError("normalized occupancy.csv failed to re-parse")
        return parsed.records

    def load_blocks_pois(self) -> tuple[list[Block], list[Poi]]:
        doc = _load_json(self.root / "geodata.json")
        blocks = [
            Block(
                block_id=b["block_id"],
                centroid=tuple(b["centroid"]),
                has_parking_data=b["has_parking_data"],
                geometry=tuple(tuple(v) for v in b["geometry"]) if b["geometry"] else None,
            )
            for b in doc["blocks"]
        ]
        pois = [
            Poi(p["poi_id"], tuple(p["position"]), p["amenity"], p["area_m2"])
            for p in doc["pois"]
        ]
        return blocks, pois

    def load_index(self) -> BlockAmenityIndex:
        doc = _load_json(self.root / "amenity_index.json")
        return BlockAmenityIndex(
            matches={
                bid: [PoiMatch(pid, name) for pid, name in ms]
                for bid, ms in doc["matches"].items()
            },
            merge_distance_m=doc["merge_distance_m"],
            unmatched_pois=doc["unmatched_pois"],
            skipped_pois=doc["skipped_pois"],
        )

    def load_stats(self, basis: str) -> dict[str, AmenityStats]:
        path = self.stats_path(basis)
        if not path.exists():
            raise WorkspaceError(f"no amenity stats ingested for basis {basis!r}")
        return load_amenity_stats(path, basis)

    # -- cluster stage --------------------------------------------------------

    def cluster(self, k: int, ratio: float, seed: int) -> ClusterPartition:
        blocks, _ = self.load_blocks_pois()
        partition = partition_city(blocks, k_with=k, ratio=ratio, seed=seed)
        _dump_json(self.partition_path, _partition_doc(partition))
        return partition

    def load_partition(self) -> ClusterPartition:
        doc = _load_json(self.partition_path)
        def make(group):
            return [
                Cluster(
                    cluster_id=c["cluster_id"],
                    group=c["group"],
                    block_ids=frozenset(c["block_ids"]),
                    centroid=tuple(c["centroid"]),
                )
                for c in doc["clusters"]
                if c["group"] == group
            ]
        return ClusterPartition(
            clusters_with=make(GROUP_WITH),
            clusters_without=make(GROUP_WITHOUT),
            k_with=doc["k_with"],
            k_without=doc["k_without"],
            seed=doc["seed"],
            ratio=doc["ratio"],
        )

    # -- aggregation + training ------------------------------------------------

    def aggregated_points(
        self, occupancy_mode: str = "rate"
    ) -> dict[int, list[agg.AggregatedPoint]]:
        """Aggregated training rows per monitored cluster (also persisted)."""
        partition = self.load_partition()
        records = self.load_records()
        by_cluster = {}
        for cluster in partition.clusters_with:
            result = agg.aggregate_cluster(records, set(cluster.block_ids), occupancy_mode)
            by_cluster[cluster.cluster_id] = result.points
            self._write_training(cluster.cluster_id, result.points)
        return by_cluster

    def _write_training(self, cluster_id: int, points: list[agg.AggregatedPoint]) -> None:
        path = self.training_path(cluster_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["timestamp", "year", "week", "weekday", "hour",
                 "price_rate", "total_spots", "occupancy"]
            )
            for p in points:
                fv = agg.extract_features(p.timestamp, p.price_rate, p.total_spots)
                writer.writerow(
                    [
                        p.timestamp.strftime("%Y-%m-%d %H:%M:%S"),
                        fv.year, fv.week, fv.weekday, fv.hour,
                        repr(p.price_rate), repr(p.total_spots), repr(p.occupancy),
                    ]
                )

    def load_training(self) -> dict[int, list[agg.AggregatedPoint]]:
        folder = self.root / "training" / GROUP_WITH
        if not folder.is_dir():
            raise WorkspaceError("no training data; run the train stage first")
        out = {}
        for path in sorted(folder.glob("*.csv")):
            cid = int(path.stem)
            points = []
            with path.open(newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                for row in reader:
                    # The raw occupied mean is not persisted; reconstruct the
                    # rate-consistent value (only price/spots/occupancy are
                    # consumed from loaded rows).
                    points.append(
                        agg.AggregatedPoint(
                            timestamp=parse_timestamp(row["timestamp"]),
                            price_rate=float(row["price_rate"]),
                            total_spots=float(row["total_spots"]),
                            occupancy=float(row["occupancy"]),
                            occupied=float(row["occupancy"]) * float(row["total_spots"]),
                        )
                    )
            out[cid] = points
        return out

    def cluster_datasets(
        self, datapoints: str = "aggregate", occupancy_mode: str = "rate"
    ) -> dict[int, learn.Dataset]:
        partition = self.load_partition()
        if datapoints == "aggregate":
            return {
                cid: learn.Dataset.from_points(points, cid)
                for cid, points in self.aggregated_points(occupancy_mode).items()
            }
        if datapoints != "all":
            raise ValueError(f"datapoints must be aggregate or all, got {datapoints!r}")
        records = self.load_records()
        out = {}
        for cluster in partition.clusters_with:
            rows = [r for r in records if r.block_id in cluster.block_ids]
            out[cluster.cluster_id] = learn.Dataset.from_records(rows, cluster.cluster_id)
        return out

    def train(
        self,
        learner: str,
        seed: int,
        datapoints: str = "aggregate",
        occupancy_mode: str = "rate",
    ) -> dict[int, learn.TrainedModel]:
        """Train one model per monitored cluster and persist them."""
        datasets = self.cluster_datasets(datapoints, occupancy_mode)
        models = {}
        index_rows = []
        for cid in sorted(datasets):
            model = learn.train(datasets[cid], learner, seed)
            models[cid] = model
            path = self.model_path(cid)
            _dump_json(path, model.to_dict())
            index_rows.append(
                {
                    "cluster_id": cid,
                    "learner": model.learner,
                    "hyperparameters": model.hyperparameters,
                    "cv_rmse": model.cv_rmse,
                    "cv_rmse_pct": model.cv_rmse * 100.0,
                }
            )
        _dump_json(
            self.root / "models" / "index.json",
            {"learner": learner, "seed": seed, "datapoints": datapoints,
             "models": index_rows},
        )
        return models

    def load_models(self) -> dict[int, learn.TrainedModel]:
        folder = self.root / "models"
        index = _load_json(folder / "index.json")
        models = {}
        for row in index["models"]:
            doc = _load_json(self.model_path(row["cluster_id"]))
            models[row["cluster_id"]] = learn.TrainedModel.from_dict(doc)
        return models

    # -- representations + similarity ------------------------------------------

    def build_representations(self, basis: str) -> dict:
        """Vectors, curves and magnitudes for every cluster of both groups."""
        partition = self.load_partition()
        index = self.load_index()
        stats = self.load_stats(basis)
        scheme = represent.CategoryScheme.for_basis(basis)
        support = represent.support_spec(stats)
        entry = {"support": {"offset": support.offset, "n_bins": support.n_bins,
                             "bin_width": support.bin_width},
                 "clusters": []}
        for cluster in partition.clusters_with + partition.clusters_without:
            vector = represent.build_cluster_vector(cluster, index, stats, scheme)
            curve = represent.build_cluster_gaussian(cluster, index, stats, support)
            entry["clusters"].append(
                {
                    "cluster_id": cluster.cluster_id,
                    "group": cluster.group,
                    "vector": list(vector.counts),
                    "magnitude": represent.gaussian_magnitude_feature(curve),
                    "heights": [float(h) for h in curve.heights],
                }
            )
        path = self.root / "representations.json"
        doc = _load_json(path) if path.exists() else {}
        doc[basis] = entry
        _dump_json(path, doc)
        return entry

    def load_representations(self, basis: str) -> dict:
        doc = _load_json(self.root / "representations.json")
        if basis not in doc:
            raise WorkspaceError(f"no representations for basis {basis!r}")
        return doc[basis]

    def representation_objects(
        self, basis: str, group: str
    ) -> tuple[dict[int, represent.ClusterVector], dict[int, represent.ClusterGaussian]]:
        entry = self.load_representations(basis)
        sup = represent.SupportSpec(
            offset=entry["support"]["offset"],
            n_bins=entry["support"]["n_bins"],
            bin_width=entry["support"]["bin_width"],
        )
        vectors, curves = {}, {}
        for c in entry["clusters"]:
            if c["group"] != group:
                continue
            vectors[c["cluster_id"]] = represent.ClusterVector(tuple(c["vector"]))
            curves[c["cluster_id"]] = represent.ClusterGaussian(
                support=sup, heights=np.asarray(c["heights"], dtype=float)
            )
        return vectors, curves

    def build_similarity(self, metric: str, basis: str) -> similarity.SimilarityMatrix:
        """Monitored x unmonitored matrix, persisted as the stage CSV."""
        self.build_representations(basis)
        vec_w, cur_w = self.representation_objects(basis, GROUP_WITH)
        vec_o, cur_o = self.representation_objects(basis, GROUP_WITHOUT)
        if metric == "cosine":
            matrix = similarity.cosine_matrix(vec_w, vec_o, basis)
        elif metric == "emd":
            matrix = similarity.emd_matrix(cur_w, cur_o, basis)
        else:
            raise ValueError(f"unknown metric {metric!r}")
        self._write_similarity(matrix)
        return matrix

    def evaluation_similarity(self, metric: str, basis: str) -> similarity.SimilarityMatrix:
        """Monitored x monitored matrix used by the evaluation protocol."""
        vec_w, cur_w = self.representation_objects(basis, GROUP_WITH)
        if metric == "cosine":
            return similarity.cosine_matrix(vec_w, vec_w, basis)
        if metric == "emd":
            return similarity.emd_matrix(cur_w, cur_w, basis)
        raise ValueError(f"unknown metric {metric!r}")

    def _write_similarity(self, matrix: similarity.SimilarityMatrix) -> None:
        path = self.similarity_path(matrix.metric, matrix.basis)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["source_id"] + [str(t) for t in matrix.target_ids])
            for i, s in enumerate(matrix.source_ids):
                writer.writerow([str(s)] + [f"{v:.6f}" for v in matrix.values[i]])

    def load_similarity(self, metric: str, basis: str) -> similarity.SimilarityMatrix:
        path = self.similarity_path(metric, basis)
        if not path.exists():
            raise WorkspaceError(f"no similarity file for {metric}/{basis}")
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            target_ids = [int(t) for t in header[1:]]
            source_ids = []
            rows = []
            for row in reader:
                source_ids.append(int(row[0]))
                rows.append([float(v) for v in row[1:]])
        return similarity.SimilarityMatrix(
            metric=metric, basis=basis, source_ids=source_ids,
            target_ids=target_ids, values=np.array(rows),
        )

    # -- estimation ---------------------------------------------------------

    def unmonitored_features(
        self,
        day,
        hours=est.DEFAULT_HOURS,
        input_defaults: str = "computed",
    ) -> list[agg.FeatureVector]:
        """Feature rows for estimation; price/capacity from monitored averages
        by default, or the fixed reference values with input_defaults="table"."""
        if input_defaults == "computed":
            price, spots = est.monitored_averages(self.load_training())
        elif input_defaults == "table":
            price, spots = est.DEFAULT_PRICE_RATE, est.DEFAULT_TOTAL_SPOTS
        else:
            raise ValueError("input_defaults must be computed or table")
        return est.build_unmonitored_input(day, hours, price, spots)

    def estimate(
        self,
        target_id: int,
        timestamp: datetime,
        metric: str,
        input_defaults: str = "computed",
    ) -> est.EstimateTable:
        partition = self.load_partition()
        unmonitored = {c.cluster_id for c in partition.clusters_without}
        if target_id not in unmonitored:
            raise ValueError(f"cluster {target_id} is not an unmonitored cluster")
        basis = self.meta()["basis"]
        sims = self.load_similarity(metric, basis)
        models = self.load_models()
        features = self.unmonitored_features(
            timestamp.date(), hours=[timestamp.hour], input_defaults=input_defaults
        )[0]
        return est.estimate_for_target(
            target_id, models, sims, features, metric, timestamp
        )


def _partition_doc(partition: ClusterPartition) -> dict:
    return {
        "k_with": partition.k_with,
        "k_without": partition.k_without,
        "ratio": partition.ratio,
        "seed": partition.seed,
        "clusters": [
            {
                "cluster_id": c.cluster_id,
                "group": c.group,
                "centroid": list(c.centroid),
                "block_ids": sorted(c.block_ids),
            }
            for c in partition.clusters_with + partition.clusters_without
        ],
    }
