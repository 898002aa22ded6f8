"""Evaluation protocol: transfer errors, correlations, ablations.

A source cluster's model is tested on every other monitored cluster; the
resulting error matrix is correlated, per source, against the similarity
rows, which is the core check that similarity predicts transferability.
Best-learner fractions, the aggregation ablation and the extended "total"
models complete the protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from parkcast.learn import (
    Dataset,
    GbtConfig,
    TrainedModel,
    fit_gbt,
    _predict_gbt,
    rmse,
    train,
)
from parkcast.similarity import SimilarityMatrix
from parkcast.synthcity import (  # noqa: F401  (re-exported protocol surface)
    SyntheticCityConfig,
    SyntheticCityFiles,
    generate_synthetic_city,
)

PERCENT_SCALE = 100.0  # errors are reported on the 0-100 occupancy scale


class DegenerateDataError(ValueError):
    """Correlation input with zero variance; reported as missing upstream."""


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation: covariance over the stdev product."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1 or len(xa) < 2:
        raise ValueError("pearson needs two equal-length 1-D samples of size >= 2")
    xd = xa - xa.mean()
    yd = ya - ya.mean()
    denom = math.sqrt(float((xd**2).sum()) * float((yd**2).sum()))
    if denom == 0.0:
        raise DegenerateDataError("zero variance in a correlation input")
    return float((xd * yd).sum() / denom)


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average-ranked data (ties get their mean rank)."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1 or len(xa) < 2:
        raise ValueError("spearman needs two equal-length 1-D samples of size >= 2")
    return pearson(rankdata(xa, method="average"), rankdata(ya, method="average"))


@dataclass
class TransferErrorMatrix:
    """RMSE (percent scale) of each source model applied to each other cluster."""

    learner: str
    cluster_ids: list[int]
    errors: dict[tuple[int, int], float]
    datapoints: tuple[str, str] = ("aggregate", "aggregate")
    models: dict[int, TrainedModel] = field(default_factory=dict, repr=False)

    def row(self, source_id: int) -> tuple[list[int], list[float]]:
        targets = [t for t in self.cluster_ids if t != source_id]
        return targets, [self.errors[(source_id, t)] for t in targets]


def pairwise_transfer(
    cluster_data: Mapping[int, Mapping[str, Dataset]],
    learner: str,
    datapoints: tuple[str, str] = ("aggregate", "aggregate"),
    seed: int = 0,
    models: Mapping[int, TrainedModel] | None = None,
) -> TransferErrorMatrix:
    """Train one model per source cluster and score it on every other cluster.

    ``cluster_data`` maps cluster id -> {"aggregate": Dataset, "all":
    Dataset}; the two entries in ``datapoints`` pick the source (training)
    and target (testing) variants. Already-trained models may be passed in
    to skip retraining.
    """
    src_mode, tgt_mode = datapoints
    ids = sorted(cluster_data)
    if len(ids) < 2:
        raise ValueError("need at least two monitored clusters")
    trained: dict[int, TrainedModel] = dict(models) if models else {}
    for cid in ids:
        if cid not in trained:
            trained[cid] = train(cluster_data[cid][src_mode], learner, seed)
    errors = {}
    for s in ids:
        for t in ids:
            if s == t:
                continue
            ds = cluster_data[t][tgt_mode]
            pred = trained[s].predict_array(ds.X)
            errors[(s, t)] = rmse(pred, ds.y) * PERCENT_SCALE
    return TransferErrorMatrix(learner, ids, errors, datapoints, trained)


def best_method_fractions(
    matrices: Mapping[str, TransferErrorMatrix],
) -> dict[str, float]:
    """Fraction of (source, target) pairs each learner wins; ties split equally."""
    learners = sorted(matrices)
    if not learners:
        raise ValueError("no matrices given")
    pair_sets = [set(matrices[m].errors) for m in learners]
    if any(ps != pair_sets[0] for ps in pair_sets):
        raise ValueError("matrices cover different (source, target) pairs")
    votes = {m: 0.0 for m in learners}
    for pair in sorted(pair_sets[0]):
        best = min(matrices[m].errors[pair] for m in learners)
        winners = [m for m in learners if matrices[m].errors[pair] == best]
        for w in winners:
            votes[w] += 1.0 / len(winners)
    n_pairs = len(pair_sets[0])
    return {m: votes[m] / n_pairs for m in learners}


@dataclass
class CorrelationReport:
    """Per-source and mean correlations between similarity and transfer error."""

    per_source: dict[int, dict[str, float | None]]
    means: dict[str, float | None]
    excluded: dict[str, int]
    pooled: bool = False

    COEFFICIENTS = ("cosine", "rank_cosine", "emd", "rank_emd")


def _safe(fn: Callable[..., float], x, y) -> float | None:
    try:
        return fn(x, y)
    except DegenerateDataError:
        return None


def correlate_similarity_errors(
    errors: TransferErrorMatrix,
    cosine_sims: SimilarityMatrix,
    emd_sims: SimilarityMatrix,
    pooled: bool = False,
) -> CorrelationReport:
    """Correlate each source's error row with its similarity rows.

    Default reading: one coefficient per source cluster, averaged across
    sources; degenerate (zero-variance) rows are excluded with a count.
    ``pooled`` instead correlates all (source, target) pairs at once.
    """
    ids = errors.cluster_ids
    rows: dict[int, dict[str, float | None]] = {}
    pooled_err: list[float] = []
    pooled_cos: list[float] = []
    pooled_emd: list[float] = []
    for s in ids:
        targets, err_row = errors.row(s)
        cos_row = [cosine_sims.value(s, t) for t in targets]
        emd_row = [emd_sims.value(s, t) for t in targets]
        pooled_err.extend(err_row)
        pooled_cos.extend(cos_row)
        pooled_emd.extend(emd_row)
        if len(targets) < 2:
            # A 2-cluster run leaves one target per source: nothing to
            # correlate per source (the pooled mode still works).
            rows[s] = {c: None for c in CorrelationReport.COEFFICIENTS}
            continue
        rows[s] = {
            "cosine": _safe(pearson, cos_row, err_row),
            "rank_cosine": _safe(spearman, cos_row, err_row),
            "emd": _safe(pearson, emd_row, err_row),
            "rank_emd": _safe(spearman, emd_row, err_row),
        }
    if pooled:
        means = {
            "cosine": _safe(pearson, pooled_cos, pooled_err),
            "rank_cosine": _safe(spearman, pooled_cos, pooled_err),
            "emd": _safe(pearson, pooled_emd, pooled_err),
            "rank_emd": _safe(spearman, pooled_emd, pooled_err),
        }
        excluded = {c: int(means[c] is None) for c in CorrelationReport.COEFFICIENTS}
        return CorrelationReport(rows, means, excluded, pooled=True)
    means = {}
    excluded = {}
    for coeff in CorrelationReport.COEFFICIENTS:
        vals = [rows[s][coeff] for s in ids if rows[s][coeff] is not None]
        excluded[coeff] = len(ids) - len(vals)
        means[coeff] = float(np.mean(vals)) if vals else None
    return CorrelationReport(rows, means, excluded)


@dataclass
class ExtendedModelComparison:
    """Held-out test errors of plain vs feature-extended pooled models."""

    per_cluster: dict[int, tuple[float, float]]  # cluster -> (base, extended)
    mean_base: float
    mean_extended: float


def extended_total_models(
    cluster_data: Mapping[int, Dataset],
    extra_features: Mapping[int, Sequence[float]],
    config: GbtConfig = GbtConfig(),
) -> ExtendedModelComparison:
    """All-but-one pooled models, with and without per-cluster amenity features.

    The extended variant appends each cluster's category counts and curve
    magnitude to every row of that cluster, so the pooled model can pick up
    amenity-mix patterns; both variants are tested on the held-out cluster.
    """
    ids = sorted(cluster_data)
    if len(ids) < 3:
        raise ValueError("need at least three clusters for all-but-one models")
    per_cluster = {}
    for held_out in ids:
        train_ids = [c for c in ids if c != held_out]
        Xb_tr = np.vstack([cluster_data[c].X for c in train_ids])
        y_tr = np.concatenate([cluster_data[c].y for c in train_ids])
        Xe_tr = np.vstack([_extend(cluster_data[c].X, extra_features[c]) for c in train_ids])
        Xb_te = cluster_data[held_out].X
        Xe_te = _extend(Xb_te, extra_features[held_out])
        y_te = cluster_data[held_out].y
        base_payload = fit_gbt(Xb_tr, y_tr, config)
        ext_payload = fit_gbt(Xe_tr, y_tr, config)
        base_err = rmse(np.clip(_predict_gbt(base_payload, Xb_te), 0, 1), y_te)
        ext_err = rmse(np.clip(_predict_gbt(ext_payload, Xe_te), 0, 1), y_te)
        per_cluster[held_out] = (base_err * PERCENT_SCALE, ext_err * PERCENT_SCALE)
    mean_base = float(np.mean([v[0] for v in per_cluster.values()]))
    mean_ext = float(np.mean([v[1] for v in per_cluster.values()]))
    return ExtendedModelComparison(per_cluster, mean_base, mean_ext)


def _extend(X: np.ndarray, extra: Sequence[float]) -> np.ndarray:
    tail = np.tile(np.asarray(extra, dtype=float), (len(X), 1))
    return np.hstack([X, tail])


# ---------------------------------------------------------------------------
# Whole-city protocol driver


@dataclass
class CityEvaluation:
    """Everything one protocol run produces, for reporting or assertions."""

    k: int
    merge_distance_m: float
    basis: str
    datapoints: tuple[str, str]
    transfer: dict[str, TransferErrorMatrix]
    correlations: dict[str, CorrelationReport]
    eval_sims: dict[str, SimilarityMatrix]
    fractions: dict[str, float] | None = None
    extended: ExtendedModelComparison | None = None


def evaluate_city(
    blocks,
    records,
    pois,
    stats,
    *,
    k: int,
    merge_distance_m: float,
    basis: str = "time_spent",
    seed: int = 0,
    ratio: float = 2.6,
    datapoints: tuple[str, str] = ("aggregate", "aggregate"),
    learners: Sequence[str] = ("gbt",),
    occupancy_mode: str = "rate",
    run_extended: bool = False,
) -> CityEvaluation:
    """Run the full evaluation protocol on parsed inputs.

    Partitions the city, aggregates each monitored cluster, builds both
    cluster representations, computes monitored-vs-monitored similarity
    matrices, trains and cross-applies models for each requested learner,
    and correlates similarities with transfer errors.
    """
    from parkcast.aggregate import aggregate_cluster
    from parkcast.geocluster import partition_city
    from parkcast.ingest import match_amenities
    from parkcast.learn import Dataset
    from parkcast import represent
    from parkcast.similarity import cosine_matrix, emd_matrix

    index = match_amenities(blocks, pois, merge_distance_m)
    partition = partition_city(blocks, k_with=k, ratio=ratio, seed=seed)

    needed_modes = set(datapoints)
    cluster_data: dict[int, dict[str, Dataset]] = {}
    agg_points = {}
    for cluster in partition.clusters_with:
        cid = cluster.cluster_id
        cluster_data[cid] = {}
        members = set(cluster.block_ids)
        if "aggregate" in needed_modes or run_extended:
            points = aggregate_cluster(records, members, occupancy_mode).points
            agg_points[cid] = points
            cluster_data[cid]["aggregate"] = Dataset.from_points(points, cid)
        if "all" in needed_modes:
            rows = [r for r in records if r.block_id in members]
            cluster_data[cid]["all"] = Dataset.from_records(rows, cid)

    scheme = represent.CategoryScheme.for_basis(basis)
    support = represent.support_spec(stats)
    vectors, curves = {}, {}
    for cluster in partition.clusters_with:
        vectors[cluster.cluster_id] = represent.build_cluster_vector(
            cluster, index, stats, scheme
        )
        curves[cluster.cluster_id] = represent.build_cluster_gaussian(
            cluster, index, stats, support
        )
    eval_sims = {
        "cosine": cosine_matrix(vectors, vectors, basis),
        "emd": emd_matrix(curves, curves, basis),
    }

    transfer = {}
    correlations = {}
    for learner in learners:
        matrix = pairwise_transfer(cluster_data, learner, datapoints, seed)
        transfer[learner] = matrix
        correlations[learner] = correlate_similarity_errors(
            matrix, eval_sims["cosine"], eval_sims["emd"]
        )

    fractions = best_method_fractions(transfer) if len(transfer) > 1 else None

    extended = None
    if run_extended:
        extras = {
            cid: list(vectors[cid].as_array())
            + [represent.gaussian_magnitude_feature(curves[cid])]
            for cid in vectors
        }
        agg_datasets = {cid: cluster_data[cid]["aggregate"] for cid in cluster_data}
        extended = extended_total_models(agg_datasets, extras)

    return CityEvaluation(
        k=k,
        merge_distance_m=merge_distance_m,
        basis=basis,
        datapoints=datapoints,
        transfer=transfer,
        correlations=correlations,
        eval_sims=eval_sims,
        fractions=fractions,
        extended=extended,
    )
