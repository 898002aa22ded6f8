"""Acceptance gate: one test (and one printed pass/fail line) per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see the criterion lines.
"""

import csv
import time
from dataclasses import dataclass
from datetime import datetime

import numpy as np
import pytest

from conftest import DATA_DIR, build_pipeline, make_city
from parkcast.aggregate import aggregate_cluster
from parkcast.estimate import intersection_intervals, interval_cosine, interval_emd
from parkcast.evaluate import (
    evaluate_city,
    generate_synthetic_city,
    pairwise_transfer,
    pearson,
    spearman,
    SyntheticCityConfig,
)
from parkcast.geocluster import partition_city
from parkcast.ingest import (
    Block,
    OccupancyRecord,
    load_amenity_stats,
    parse_geodata,
    parse_occupancy_csv,
)
from parkcast.represent import CategoryScheme, ClusterGaussian, SupportSpec, category_for_mean
from parkcast.similarity import cosine_similarity, discrete_emd, gaussian_w2
from test_evaluate import pearson_oracle, ranks_oracle
from test_similarity import transport_cost_oracle


def report(name: str, ok: bool, detail: str = "") -> None:
    print(f"{'PASS' if ok else 'FAIL'}: {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name} {detail}"


# -- criterion 1: aggregation reproduces the worked example exactly -----------


def test_aggregation_reference_rows():
    records = [
        OccupancyRecord("902", datetime(2011, 4, 2, 7), 0, 46, 58),
        OccupancyRecord("32800", datetime(2011, 4, 2, 7), 0, 32, 2),
        OccupancyRecord("33005", datetime(2011, 4, 2, 7), 3, 36, 12),
        OccupancyRecord("902", datetime(2011, 4, 2, 8), 2, 46, 54),
        OccupancyRecord("32800", datetime(2011, 4, 2, 8), 4, 32, 5),
        OccupancyRecord("33005", datetime(2011, 4, 2, 8), 3, 36, 22),
    ]
    start = time.perf_counter()
    points = aggregate_cluster(records, {"902", "32800", "33005"}, "count").points
    elapsed = time.perf_counter() - start
    p7, p8 = points
    exact = (
        (p7.price_rate, p7.total_spots, p7.occupied) == (1.0, 38.0, 24.0)
        and (p8.price_rate, p8.total_spots, p8.occupied) == (3.0, 38.0, 27.0)
    )
    report(
        "aggregation reproduces the worked two-timestamp example exactly",
        exact and elapsed < 1.0,
        f"rows=({p7.price_rate},{p7.total_spots},{p7.occupied})/"
        f"({p8.price_rate},{p8.total_spots},{p8.occupied}), {elapsed:.3f}s",
    )


# -- criterion 2: discrete EMD vs transport oracle + metric properties --------


def test_discrete_emd_oracle_and_metric_properties():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()

    def hist(n):
        h = rng.random(n) + 1e-9
        return ClusterGaussian(SupportSpec(offset=0.0, n_bins=n), h / h.sum(), True)

    max_err = 0.0
    for _ in range(100):
        p, q = hist(10), hist(10)
        max_err = max(max_err, abs(discrete_emd(p, q) - transport_cost_oracle(p, q)))
    sym_ok = True
    tri_ok = True
    for _ in range(1000):
        p, q, r = hist(10), hist(10), hist(10)
        dpq, dqp = discrete_emd(p, q), discrete_emd(q, p)
        sym_ok &= abs(dpq - dqp) <= 1e-12
        tri_ok &= dpq <= discrete_emd(p, r) + discrete_emd(r, q) + 1e-9
    elapsed = time.perf_counter() - start
    report(
        "discrete EMD matches the brute-force transport oracle and is a metric",
        max_err <= 1e-9 and sym_ok and tri_ok and elapsed < 10.0,
        f"max oracle gap {max_err:.2e}, {elapsed:.1f}s",
    )


# -- criterion 3: closed-form Gaussian distance ------------------------------


def test_gaussian_w2_reference_cases():
    cases = (
        gaussian_w2(0, 1, 0, 1) == 0.0,
        gaussian_w2(3, 1, 0, 1) == 3.0,
        gaussian_w2(0, 1, 0, 2) == 1.0,
    )
    rng = np.random.default_rng(0)
    sym = all(
        gaussian_w2(a, s1, b, s2) == pytest.approx(gaussian_w2(b, s2, a, s1))
        for a, s1, b, s2 in rng.random((200, 4)) * [50, 10, 50, 10]
    )
    report("closed-form Gaussian 2-Wasserstein matches its reference cases", all(cases) and sym)


# -- criterion 4: cosine similarity ------------------------------------------


def test_cosine_reference_and_range():
    ref = abs(cosine_similarity(np.array([1.0, 2, 3]), np.array([3.0, 2, 1])) - 0.714286) <= 1e-6
    rng = np.random.default_rng(1)
    in_range = True
    for _ in range(1000):
        a = rng.integers(0, 100, 3).astype(float)
        b = rng.integers(0, 100, 3).astype(float)
        v = cosine_similarity(a, b)
        in_range &= -1e-12 <= v <= 1.0 + 1e-12
    report("cosine similarity reference value and [0,1] range", ref and in_range)


# -- criterion 5: proportional cluster-count rule ----------------------------


def test_cluster_count_rule():
    rng = np.random.default_rng(3)
    blocks = [
        Block(f"b{i}", (37.0 + rng.random(), -122.0 + rng.random()), i < 60)
        for i in range(220)
    ]
    p8 = partition_city(blocks, k_with=8, ratio=2.6, seed=0)
    p16 = partition_city(blocks, k_with=16, ratio=2.6, seed=0)
    report(
        "cluster-count rule gives 8 -> 20 and 16 -> 41",
        (p8.k_without, p16.k_without) == (20, 41),
        f"got {p8.k_without} and {p16.k_without}",
    )


# -- criterion 6: category assignment over both full stats tables -------------


def test_category_assignment_full_tables():
    mismatches = []
    for filename, basis, expected_rows in (
        ("duration_stats.csv", "time_spent", 32),
        ("area_stats.csv", "area", 48),
    ):
        scheme = CategoryScheme.for_basis(basis)
        with (DATA_DIR / filename).open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == expected_rows
        for row in rows:
            got = category_for_mean(float(row["mean"]), scheme)
            if got != int(row["category"]):
                mismatches.append((basis, row["amenity"], got, row["category"]))
    report(
        "category assignment reproduces both full amenity tables (32 + 48 rows)",
        not mismatches,
        str(mismatches[:5]),
    )


# -- criterion 7: interval algebra --------------------------------------------


def test_interval_algebra():
    examples_ok = (
        (interval_cosine(0.5, 1.0).lo, interval_cosine(0.5, 1.0).hi) == (0.5, 0.5)
        and interval_cosine(0.5, 0.8).lo == pytest.approx(0.3)
        and interval_cosine(0.5, 0.8).hi == pytest.approx(0.7)
        and interval_cosine(0.95, 0.9).lo == pytest.approx(0.85)
        and interval_cosine(0.95, 0.9).hi == 1.0
        and (interval_emd(0.5, 0.0).lo, interval_emd(0.5, 0.0).hi) == (0.5, 0.5)
        and interval_emd(0.4, 0.25).lo == pytest.approx(0.15)
        and interval_emd(0.4, 0.25).hi == pytest.approx(0.65)
        and interval_emd(0.1, 0.3).lo == 0.0
        and interval_emd(0.1, 0.3).hi == pytest.approx(0.4)
    )
    rng = np.random.default_rng(7)
    shrink_ok = True
    contain_ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 10))
        sims = np.sort(rng.random(n))[::-1]
        rows = [interval_cosine(float(rng.random()), float(s), i) for i, s in enumerate(sims)]
        contain_ok &= all(iv.lo <= iv.point <= iv.hi for iv in rows)
        running = intersection_intervals(rows)
        prev = None
        emptied = False
        for entry in running:
            if entry is None:
                emptied = True
                continue
            shrink_ok &= not emptied
            if prev is not None:
                shrink_ok &= entry[0] >= prev[0] - 1e-12 and entry[1] <= prev[1] + 1e-12
            prev = entry
    report(
        "interval widening examples exact; intersections shrink monotonically",
        examples_ok and shrink_ok and contain_ok,
    )


# -- criterion 8: correlation coefficients vs oracles -------------------------


def test_correlations_match_oracles():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(5, 60))
        x = rng.integers(0, 8, n).astype(float)  # ties guaranteed
        y = rng.random(n) * 10
        if np.ptp(x) == 0:
            continue
        worst = max(worst, abs(pearson(x, y) - pearson_oracle(x, y)))
        want = pearson_oracle(ranks_oracle(list(x)), ranks_oracle(list(y)))
        worst = max(worst, abs(spearman(x, y) - want))
    report(
        "Pearson and Spearman match direct-formula oracles (ties included)",
        worst <= 1e-12,
        f"worst gap {worst:.2e}",
    )


# -- criteria 9 + 10: the end-to-end synthetic pipeline ------------------------


@dataclass
class PipelineRun:
    elapsed: float
    result: object
    cluster_data: dict


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory) -> PipelineRun:
    out = tmp_path_factory.mktemp("acceptance_city")
    start = time.perf_counter()
    files = generate_synthetic_city(
        SyntheticCityConfig(n_blocks=200, n_archetypes=3, days=30, seed=42), out
    )
    parsed = parse_occupancy_csv(files.occupancy)
    blocks, pois = parse_geodata(files.blocks, files.pois)
    stats = load_amenity_stats(files.stats, "time_spent")
    result = evaluate_city(
        blocks,
        parsed.records,
        pois,
        stats,
        k=8,
        merge_distance_m=100.0,
        seed=42,
        learners=("gbt",),
    )
    elapsed = time.perf_counter() - start
    cluster_data = {}
    for cluster in partition_city(blocks, k_with=8, seed=42).clusters_with:
        members = set(cluster.block_ids)
        rows = [r for r in parsed.records if r.block_id in members]
        points = aggregate_cluster(rows, members).points
        from parkcast.learn import Dataset

        cluster_data[cluster.cluster_id] = {
            "aggregate": Dataset.from_points(points, cluster.cluster_id)
        }
    return PipelineRun(elapsed, result, cluster_data)


def test_end_to_end_synthetic_pipeline(synthetic_run):
    report_obj = synthetic_run.result.correlations["gbt"]
    rank_cosine = report_obj.means["rank_cosine"]
    rank_emd = report_obj.means["rank_emd"]
    report(
        "synthetic pipeline under 2 minutes with the expected correlation signs",
        synthetic_run.elapsed < 120.0 and rank_cosine <= -0.3 and rank_emd >= 0.2,
        f"{synthetic_run.elapsed:.0f}s, cosine Spearman {rank_cosine:.2f}, "
        f"emd Spearman {rank_emd:.2f}",
    )


def test_gbt_wins_or_ties_majority_of_transfers(synthetic_run):
    gbt_errors = synthetic_run.result.transfer["gbt"].errors
    dt_matrix = pairwise_transfer(synthetic_run.cluster_data, "decision_tree", seed=42)
    wins = sum(1 for pair in gbt_errors if gbt_errors[pair] <= dt_matrix.errors[pair])
    frac = wins / len(gbt_errors)
    report(
        "boosted trees win or tie at least half of the transfer pairs",
        frac >= 0.5,
        f"{wins}/{len(gbt_errors)} = {frac:.1%}",
    )


# -- criterion 11: byte-identical reruns --------------------------------------


def test_stage_determinism(tmp_path_factory):
    city = make_city(tmp_path_factory.mktemp("det_city"), n_blocks=40, days=3, seed=13)
    ws1 = build_pipeline(city, tmp_path_factory.mktemp("det_a"), k=2, seed=9)
    ws2 = build_pipeline(city, tmp_path_factory.mktemp("det_b"), k=2, seed=9)
    rel1 = sorted(p.relative_to(ws1.root) for p in ws1.root.rglob("*") if p.is_file())
    rel2 = sorted(p.relative_to(ws2.root) for p in ws2.root.rglob("*") if p.is_file())
    same = rel1 == rel2 and all(
        (ws1.root / r).read_bytes() == (ws2.root / r).read_bytes() for r in rel1
    )
    report(
        "every stage rerun with identical seeds yields byte-identical artifacts",
        same,
        f"{len(rel1)} files compared",
    )
