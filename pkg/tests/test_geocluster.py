import numpy as np
import pytest

from parkcast.geocluster import kmeans, partition_city, size_dispersion
from parkcast.ingest import Block


def two_group_points(seed=3, per_group=50, jitter=0.001):
    rng = np.random.default_rng(seed)
    a = np.array([37.0, -122.0]) + rng.uniform(-jitter, jitter, (per_group, 2))
    b = np.array([38.0, -121.0]) + rng.uniform(-jitter, jitter, (per_group, 2))
    return np.vstack([a, b])


class TestKmeans:
    def test_k1_centroid_is_mean(self):
        pts = two_group_points()
        result = kmeans(pts, 1, seed=0)
        assert np.allclose(result.centers[0], pts.mean(axis=0))
        assert set(result.labels) == {0}

    def test_two_separated_groups_recovered(self):
        pts = two_group_points()
        result = kmeans(pts, 2, seed=0)
        # Brute-force nearest-centroid check: every point closer to its own center.
        d2 = ((pts[:, None, :] - result.centers[None]) ** 2).sum(axis=2)
        assert (result.labels == d2.argmin(axis=1)).all()
        labels = result.labels
        assert len(set(labels[:50])) == 1
        assert len(set(labels[50:])) == 1
        assert labels[0] != labels[50]

    def test_deterministic_for_seed(self):
        pts = two_group_points()
        r1 = kmeans(pts, 4, seed=11)
        r2 = kmeans(pts, 4, seed=11)
        assert (r1.labels == r2.labels).all()
        assert np.array_equal(r1.centers, r2.centers)

    def test_objective_monotone_nonincreasing(self):
        pts = two_group_points(seed=5, per_group=100, jitter=0.3)
        result = kmeans(pts, 5, seed=1)
        hist = result.objective_history
        assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))

    def test_no_empty_clusters(self):
        rng = np.random.default_rng(0)
        pts = rng.random((40, 2))
        for seed in range(10):
            result = kmeans(pts, 8, seed=seed)
            assert set(result.labels) == set(range(8))

    def test_k_exceeds_distinct_points(self):
        pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
        with pytest.raises(ValueError, match="distinct"):
            kmeans(pts, 3, seed=0)

    def test_empty_input(self):
        with pytest.raises(ValueError):
            kmeans(np.empty((0, 2)), 1, seed=0)

    def test_centroid_equals_member_mean(self):
        pts = two_group_points(seed=9, per_group=60, jitter=0.4)
        result = kmeans(pts, 3, seed=2)
        for j in range(3):
            members = pts[result.labels == j]
            assert np.allclose(result.centers[j], members.mean(axis=0))


def make_blocks(n_with=30, n_without=70, seed=0):
    rng = np.random.default_rng(seed)
    blocks = []
    for i in range(n_with + n_without):
        blocks.append(
            Block(
                block_id=f"b{i}",
                centroid=(37.0 + rng.random() * 0.1, -122.0 + rng.random() * 0.1),
                has_parking_data=i < n_with,
            )
        )
    return blocks


class TestPartitionCity:
    @pytest.mark.parametrize("k_with,expected", [(8, 20), (16, 41), (1, 2)])
    def test_proportional_rule(self, k_with, expected):
        blocks = make_blocks(n_with=50, n_without=120)
        partition = partition_city(blocks, k_with=k_with, ratio=2.6, seed=0)
        assert partition.k_without == expected
        assert len(partition.clusters_without) == expected

    def test_block_count_preserved(self):
        blocks = make_blocks()
        partition = partition_city(blocks, k_with=4, seed=1)
        n_with = sum(len(c.block_ids) for c in partition.clusters_with)
        n_without = sum(len(c.block_ids) for c in partition.clusters_without)
        assert n_with == 30 and n_without == 70
        seen = set()
        for c in partition.clusters_with + partition.clusters_without:
            assert not (seen & c.block_ids)
            seen |= c.block_ids

    def test_groups_required(self):
        blocks = [b for b in make_blocks() if b.has_parking_data]
        with pytest.raises(ValueError, match="both"):
            partition_city(blocks, k_with=2, seed=0)

    def test_k_exceeds_group_size(self):
        blocks = make_blocks(n_with=3, n_without=100)
        with pytest.raises(ValueError):
            partition_city(blocks, k_with=5, seed=0)

    def test_size_dispersion_diagnostic(self):
        blocks = make_blocks()
        partition = partition_city(blocks, k_with=4, seed=1)
        assert size_dispersion(partition.clusters_with) >= 0.0
