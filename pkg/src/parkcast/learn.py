"""Per-cluster occupancy regressors.

Two learners are provided: a CART-style regression tree selected by
randomized hyperparameter search, and stagewise gradient-boosted trees
selected by exhaustive grid search. Both are scored by 5-fold
cross-validated RMSE and refit on the full data. Trees serialize to plain
nested dicts (split feature index, threshold, leaf value) so models
persist as self-describing JSON.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence

import numpy as np

from parkcast.aggregate import (
    AggregatedPoint,
    FeatureVector,
    extract_features,
    occupancy_rate,
)
from parkcast.ingest import OccupancyRecord

LEARNER_DT = "decision_tree"
LEARNER_GBT = "gbt"

# Randomized-search space for the decision tree (10 draws).
DT_MIN_SAMPLES_SPLIT = (2, 3, 4, 5)
DT_MIN_LEAF_FRACTION = (0.03, 0.1)  # continuous uniform
DT_MAX_FEATURES = (0.7, 0.8, 0.9, 1.0)
DT_CRITERIA = ("squared_error", "absolute_error")
DT_MIN_WEIGHT_FRACTION_LEAF = (0.0, 0.1, 0.2)
DT_SEARCH_DRAWS = 10

# Exhaustive grid for gradient boosting.
GBT_MAX_DEPTH = (2, 3)
GBT_N_ESTIMATORS = (50, 100)
GBT_LEARNING_RATE = (0.1, 0.25)

# Split candidates are subsampled beyond this many positions; only the
# absolute-error criterion needs it (its scorer is quadratic in candidates).
_MAX_MAE_CANDIDATES = 64


@dataclass(frozen=True)
class TreeConfig:
    criterion: str = "squared_error"
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf_fraction: float = 0.0
    min_weight_fraction_leaf: float = 0.0
    max_features_fraction: float = 1.0


@dataclass(frozen=True)
class GbtConfig:
    max_depth: int = 3
    n_estimators: int = 100
    learning_rate: float = 0.1


@dataclass
class Dataset:
    """Feature matrix + occupancy targets for one cluster."""

    X: np.ndarray
    y: np.ndarray
    source_cluster: int | None = None
    aggregation: str = "aggregate"

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if len(self.X) != len(self.y) or len(self.y) == 0:
            raise ValueError("dataset must be non-empty with matching X/y lengths")
        if self.y.min() < 0.0 or self.y.max() > 1.0:
            raise ValueError("occupancy targets must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.y)

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[tuple[FeatureVector, float]],
        source_cluster: int | None = None,
        aggregation: str = "aggregate",
    ) -> "Dataset":
        X = np.array([fv.as_tuple() for fv, _ in rows])
        y = np.array([t for _, t in rows])
        return cls(X, y, source_cluster, aggregation)

    @classmethod
    def from_points(
        cls, points: Sequence[AggregatedPoint], source_cluster: int | None = None
    ) -> "Dataset":
        rows = [
            (extract_features(p.timestamp, p.price_rate, p.total_spots), p.occupancy)
            for p in points
        ]
        return cls.from_rows(rows, source_cluster, "aggregate")

    @classmethod
    def from_records(
        cls, records: Sequence[OccupancyRecord], source_cluster: int | None = None
    ) -> "Dataset":
        """Unaggregated ("all datapoints") variant: one row per raw record."""
        rows = [
            (
                extract_features(r.timestamp, r.price_rate, float(r.total_spots)),
                occupancy_rate(r),
            )
            for r in records
        ]
        return cls.from_rows(rows, source_cluster, "all")


@dataclass
class TrainedModel:
    learner: str
    hyperparameters: dict
    cv_rmse: float
    source_cluster: int | None
    seed: int
    payload: dict = field(repr=False)

    def predict_array(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.learner == LEARNER_GBT:
            raw = _predict_gbt(self.payload, X)
        else:
            raw = predict_tree(self.payload["tree"], X)
        return np.clip(raw, 0.0, 1.0)

    def to_dict(self) -> dict:
        return {
            "learner": self.learner,
            "hyperparameters": self.hyperparameters,
            "cv_rmse": self.cv_rmse,
            "source_cluster": self.source_cluster,
            "seed": self.seed,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainedModel":
        return cls(
            learner=doc["learner"],
            hyperparameters=doc["hyperparameters"],
            cv_rmse=doc["cv_rmse"],
            source_cluster=doc["source_cluster"],
            seed=doc["seed"],
            payload=doc["payload"],
        )


def predict(model: TrainedModel, features: FeatureVector) -> float:
    """Point occupancy estimate, clamped to [0, 1]."""
    return float(model.predict_array(np.array([features.as_tuple()]))[0])


def rmse(predicted: Sequence[float], actual: Sequence[float]) -> float:
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.size == 0:
        raise ValueError("rmse needs two equal-length non-empty sequences")
    return float(np.sqrt(np.mean((p - a) ** 2)))


# ---------------------------------------------------------------------------
# Regression tree


def fit_tree(
    X: np.ndarray, y: np.ndarray, config: TreeConfig, rng: np.random.Generator | None = None
) -> dict:
    """Grow a regression tree; returns the nested-dict topology.

    Leaf sizes respect max(ceil(min_samples_leaf_fraction * n),
    ceil(min_weight_fraction_leaf * n), 1) measured against the full
    training size, as the weight fraction reduces to a sample fraction for
    unweighted rows. Leaf values are the mean (squared_error) or median
    (absolute_error) of the leaf's targets.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, n_features = X.shape
    min_leaf = max(
        1,
        math.ceil(config.min_samples_leaf_fraction * n),
        math.ceil(config.min_weight_fraction_leaf * n),
    )
    m_features = max(1, int(config.max_features_fraction * n_features))
    if rng is None:
        rng = np.random.default_rng(0)
    use_mae = config.criterion == "absolute_error"
    if config.criterion not in ("squared_error", "absolute_error"):
        raise ValueError(f"unknown criterion {config.criterion!r}")

    def leaf(idx: np.ndarray) -> dict:
        vals = y[idx]
        value = float(np.median(vals)) if use_mae else float(vals.mean())
        return {"value": value, "n": int(len(idx))}

    def grow(idx: np.ndarray, depth: int) -> dict:
        n_node = len(idx)
        if (
            (config.max_depth is not None and depth >= config.max_depth)
            or n_node < config.min_samples_split
            or n_node < 2 * min_leaf
            or np.ptp(y[idx]) == 0.0
        ):
            return leaf(idx)
        if m_features < n_features:
            feats = rng.permutation(n_features)[:m_features]
        else:
            feats = np.arange(n_features)
        best = None  # (cost, feature, threshold)
        for f in feats:
            found = _best_split(X[idx, f], y[idx], min_leaf, use_mae)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], int(f), found[1])
        if best is None:
            return leaf(idx)
        _, f, threshold = best
        mask = X[idx, f] <= threshold
        return {
            "feature": f,
            "threshold": threshold,
            "left": grow(idx[mask], depth + 1),
            "right": grow(idx[~mask], depth + 1),
        }

    return grow(np.arange(n), 0)


def _best_split(
    xf: np.ndarray, yv: np.ndarray, min_leaf: int, use_mae: bool
) -> tuple[float, float] | None:
    """Best (cost, threshold) along one feature, or None if no valid split."""
    n = len(xf)
    order = np.argsort(xf, kind="stable")
    xs = xf[order]
    ys = yv[order]
    # A cut after position k (left child gets k rows) needs a strict value
    # change at the boundary and both children at least min_leaf large.
    ks = np.arange(min_leaf, n - min_leaf + 1)
    if len(ks):
        ks = ks[xs[ks - 1] < xs[ks]]
    if len(ks) == 0:
        return None
    if use_mae:
        if len(ks) > _MAX_MAE_CANDIDATES:
            pick = np.unique(
                np.linspace(0, len(ks) - 1, _MAX_MAE_CANDIDATES).round().astype(int)
            )
            ks = ks[pick]
        costs = _mae_split_costs(ys, ks)
    else:
        csum = np.cumsum(ys)
        csq = np.cumsum(ys**2)
        left = csq[ks - 1] - csum[ks - 1] ** 2 / ks
        rsum = csum[-1] - csum[ks - 1]
        rsq = csq[-1] - csq[ks - 1]
        right = rsq - rsum**2 / (n - ks)
        costs = left + right
    best = int(costs.argmin())
    k = int(ks[best])
    return float(costs[best]), float((xs[k - 1] + xs[k]) / 2.0)


def _mae_split_costs(ys: np.ndarray, ks: np.ndarray) -> np.ndarray:
    """Sum of absolute deviations about each child's median, per cut position.

    ``ys`` is in feature order, so the left child of cut k holds positions
    0..k-1. The computation runs along the sorted-y axis: membership
    matrices give, per cut, cumulative counts and sums of child members in
    ascending-y order, from which the deviation about the median is the
    upper-half sum minus the lower-half sum.
    """
    n = len(ys)
    yorder = np.argsort(ys, kind="stable")  # y-rank p holds feature position yorder[p]
    y_sorted = ys[yorder]
    member = yorder[None, :] < ks[:, None]
    countcum = np.cumsum(member, axis=1)
    sumcum = np.cumsum(member * y_sorted[None, :], axis=1)
    y_cum = np.cumsum(y_sorted)

    def sad(counts: np.ndarray, cum_count: np.ndarray, cum_sum: np.ndarray) -> np.ndarray:
        total = cum_sum[:, -1]
        h = counts // 2
        return (total - _sum_of_smallest(cum_count, cum_sum, counts - h)) - _sum_of_smallest(
            cum_count, cum_sum, h
        )

    left_sad = sad(ks, countcum, sumcum)
    right_countcum = (np.arange(n) + 1)[None, :] - countcum
    right_sumcum = y_cum[None, :] - sumcum
    right_sad = sad(n - ks, right_countcum, right_sumcum)
    return left_sad + right_sad


def _sum_of_smallest(cum_count: np.ndarray, cum_sum: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Per row, the sum of the h smallest member values (h may be 0)."""
    rows = np.arange(len(h))
    idx = (cum_count >= h[:, None]).argmax(axis=1)
    return np.where(h == 0, 0.0, cum_sum[rows, idx])


def predict_tree(node: dict, X: np.ndarray) -> np.ndarray:
    """Evaluate a nested-dict tree on a feature matrix."""
    X = np.asarray(X, dtype=float)
    out = np.empty(len(X))
    _descend(node, X, np.arange(len(X)), out)
    return out


def _descend(node: dict, X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
    if "value" in node:
        out[idx] = node["value"]
        return
    mask = X[idx, node["feature"]] <= node["threshold"]
    if mask.any():
        _descend(node["left"], X, idx[mask], out)
    if (~mask).any():
        _descend(node["right"], X, idx[~mask], out)


# ---------------------------------------------------------------------------
# Gradient boosting


def fit_gbt(X: np.ndarray, y: np.ndarray, config: GbtConfig) -> dict:
    """Stagewise squared-error boosting.

    The initial prediction is the target mean; each stage fits a depth-
    limited squared-error tree to the residuals and is added with weight
    ``learning_rate``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    base = float(y.mean())
    current = np.full(len(y), base)
    stage_cfg = TreeConfig(criterion="squared_error", max_depth=config.max_depth)
    trees = []
    for _ in range(config.n_estimators):
        residual = y - current
        tree = fit_tree(X, residual, stage_cfg)
        current = current + config.learning_rate * predict_tree(tree, X)
        trees.append(tree)
    return {
        "base": base,
        "learning_rate": config.learning_rate,
        "max_depth": config.max_depth,
        "trees": trees,
    }


def _predict_gbt(payload: dict, X: np.ndarray) -> np.ndarray:
    out = np.full(len(X), payload["base"])
    for tree in payload["trees"]:
        out += payload["learning_rate"] * predict_tree(tree, X)
    return out


def gbt_staged_training_rmse(payload: dict, X: np.ndarray, y: np.ndarray) -> list[float]:
    """In-sample RMSE after each boosting stage (diagnostic)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    current = np.full(len(y), payload["base"])
    out = []
    for tree in payload["trees"]:
        current = current + payload["learning_rate"] * predict_tree(tree, X)
        out.append(rmse(current, y))
    return out


# ---------------------------------------------------------------------------
# Cross-validation and searches


def cross_validate(
    data: Dataset,
    config: TreeConfig | GbtConfig,
    folds: int = 5,
    seed: int = 0,
) -> float:
    """Mean RMSE over a seeded shuffle-once k-fold split."""

    def fit(Xtr: np.ndarray, ytr: np.ndarray, fold: int) -> Callable[[np.ndarray], np.ndarray]:
        if isinstance(config, GbtConfig):
            payload = fit_gbt(Xtr, ytr, config)
            return lambda Xte: np.clip(_predict_gbt(payload, Xte), 0.0, 1.0)
        tree = fit_tree(Xtr, ytr, config, np.random.default_rng([seed, fold]))
        return lambda Xte: np.clip(predict_tree(tree, Xte), 0.0, 1.0)

    return _cv_score(data.X, data.y, fit, folds, seed)


def _cv_score(
    X: np.ndarray,
    y: np.ndarray,
    fit: Callable[[np.ndarray, np.ndarray, int], Callable[[np.ndarray], np.ndarray]],
    folds: int,
    seed: int,
) -> float:
    n = len(y)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < folds:
        raise ValueError(f"too few rows ({n}) for {folds}-fold cross-validation")
    perm = np.random.default_rng(seed).permutation(n)
    scores = []
    for fold, test_idx in enumerate(np.array_split(perm, folds)):
        train_mask = np.ones(n, dtype=bool)
        train_mask[test_idx] = False
        predictor = fit(X[train_mask], y[train_mask], fold)
        scores.append(rmse(predictor(X[test_idx]), y[test_idx]))
    return float(np.mean(scores))


def _draw_tree_configs(seed: int) -> list[TreeConfig]:
    rng = np.random.default_rng(seed)
    configs = []
    for _ in range(DT_SEARCH_DRAWS):
        configs.append(
            TreeConfig(
                min_samples_split=int(rng.choice(DT_MIN_SAMPLES_SPLIT)),
                min_samples_leaf_fraction=float(rng.uniform(*DT_MIN_LEAF_FRACTION)),
                max_features_fraction=float(rng.choice(DT_MAX_FEATURES)),
                criterion=str(rng.choice(DT_CRITERIA)),
                min_weight_fraction_leaf=float(rng.choice(DT_MIN_WEIGHT_FRACTION_LEAF)),
            )
        )
    return configs


def gbt_grid() -> list[GbtConfig]:
    return [
        GbtConfig(max_depth=d, n_estimators=n, learning_rate=lr)
        for d, n, lr in itertools.product(GBT_MAX_DEPTH, GBT_N_ESTIMATORS, GBT_LEARNING_RATE)
    ]


def train_decision_tree(data: Dataset, seed: int, folds: int = 5) -> TrainedModel:
    """Randomized search (10 draws) over the tree space, then refit on all rows."""
    configs = _draw_tree_configs(seed)
    scores = [cross_validate(data, cfg, folds=folds, seed=seed) for cfg in configs]
    best_i = int(np.argmin(scores))  # argmin keeps the earliest draw on ties
    best_cfg = configs[best_i]
    tree = fit_tree(data.X, data.y, best_cfg, np.random.default_rng([seed, best_i, folds]))
    return TrainedModel(
        learner=LEARNER_DT,
        hyperparameters=asdict(best_cfg),
        cv_rmse=float(scores[best_i]),
        source_cluster=data.source_cluster,
        seed=seed,
        payload={"tree": tree},
    )


def train_gbt(data: Dataset, seed: int, folds: int = 5) -> TrainedModel:
    """Exhaustive search over the boosting grid, then refit on all rows."""
    configs = gbt_grid()
    scores = [cross_validate(data, cfg, folds=folds, seed=seed) for cfg in configs]
    best_i = int(np.argmin(scores))
    best_cfg = configs[best_i]
    payload = fit_gbt(data.X, data.y, best_cfg)
    return TrainedModel(
        learner=LEARNER_GBT,
        hyperparameters=asdict(best_cfg),
        cv_rmse=float(scores[best_i]),
        source_cluster=data.source_cluster,
        seed=seed,
        payload=payload,
    )


def train(data: Dataset, learner: str, seed: int) -> TrainedModel:
    if learner == LEARNER_GBT:
        return train_gbt(data, seed)
    if learner == LEARNER_DT:
        return train_decision_tree(data, seed)
    raise ValueError(f"unknown learner {learner!r}")
