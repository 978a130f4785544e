import itertools

import numpy as np
import pytest

from smilepc.clustering import ClusterModel, farthest_point_sample, kmeans
from smilepc.geometry import PointCloud
from smilepc.kernels import fps_indices


def brute_force_two_partition(points):
    """Minimum-SSE 2-partition by exhaustive enumeration."""
    n = len(points)
    best_sse = np.inf
    best_sets = None
    for bits in range(1, 2**n - 1):
        a = [i for i in range(n) if bits >> i & 1]
        b = [i for i in range(n) if not bits >> i & 1]
        sse = 0.0
        for part in (a, b):
            members = points[part]
            sse += float(((members - members.mean(axis=0)) ** 2).sum())
        if sse < best_sse:
            best_sse = sse
            best_sets = (frozenset(a), frozenset(b))
    return best_sse, set(best_sets)


class TestFps:
    def test_collinear_frozen(self):
        pts = np.zeros((10, 3))
        pts[:, 0] = np.arange(10.0)
        assert fps_indices(pts, 3, 0).tolist() == [0, 9, 4]

    def test_each_pick_maximizes_min_distance(self, rng):
        # exhaustive check of the greedy invariant, smallest index on ties
        pts = rng.normal(size=(40, 3))
        cloud = PointCloud(pts)
        idx = farthest_point_sample(cloud, 12, seed=7)
        chosen = [idx[0]]
        for step in range(1, 12):
            min_d = np.full(40, np.inf)
            for c in chosen:
                d = ((pts - pts[c]) ** 2).sum(axis=1)
                min_d = np.minimum(min_d, d)
            best = int(np.argmax(min_d))  # first max = smallest index tie-break
            assert idx[step] == best
            chosen.append(best)

    def test_unique_indices_and_determinism(self, rng):
        cloud = PointCloud(rng.normal(size=(30, 3)))
        a = farthest_point_sample(cloud, 30, seed=3)
        assert sorted(a.tolist()) == list(range(30))
        b = farthest_point_sample(cloud, 30, seed=3)
        np.testing.assert_array_equal(a, b)

    def test_coverage_radius_non_increasing(self, rng):
        # min pairwise distance within the selected prefix shrinks as k grows
        pts = rng.normal(size=(60, 3))
        idx = farthest_point_sample(PointCloud(pts), 20, seed=1)
        prev = np.inf
        for j in range(2, 21):
            sel = pts[idx[:j]]
            pair = min(
                float(((sel[p] - sel[q]) ** 2).sum())
                for p, q in itertools.combinations(range(j), 2)
            )
            assert pair <= prev + 1e-12
            prev = pair

    def test_k_bounds(self, rng):
        cloud = PointCloud(rng.normal(size=(5, 3)))
        with pytest.raises(ValueError):
            farthest_point_sample(cloud, 0, seed=0)
        with pytest.raises(ValueError):
            farthest_point_sample(cloud, 6, seed=0)


class TestKmeans:
    def test_two_blobs_match_brute_force(self, rng):
        blob_a = rng.normal(size=(4, 3)) * 0.1
        blob_b = rng.normal(size=(4, 3)) * 0.1 + 50.0
        pts = np.concatenate([blob_a, blob_b])
        model = kmeans(PointCloud(pts), 2, seed=0)
        best_sse, best_partition = brute_force_two_partition(pts)
        got = {frozenset(np.flatnonzero(model.assignment == c).tolist()) for c in range(2)}
        assert got == best_partition
        assert model.sse == pytest.approx(best_sse, rel=1e-12)
        for c in range(2):
            members = pts[model.assignment == c]
            np.testing.assert_allclose(model.centroids[c], members.mean(axis=0), atol=1e-12)

    def test_c1_centroid_is_mean(self, rng):
        pts = rng.normal(size=(20, 3))
        model = kmeans(PointCloud(pts), 1, seed=4)
        np.testing.assert_allclose(model.centroids[0], pts.mean(axis=0), atol=1e-12)
        expected_sse = float(((pts - pts.mean(axis=0)) ** 2).sum())
        assert model.sse == pytest.approx(expected_sse, rel=1e-12)

    def test_c_equals_n_singletons(self, rng):
        pts = rng.normal(size=(12, 3))
        model = kmeans(PointCloud(pts), 12, seed=9)
        assert model.sse == 0.0
        assert sorted(model.assignment.tolist()) == sorted(range(12))

    def test_every_point_nearest_its_centroid(self, rng):
        pts = rng.normal(size=(80, 3))
        model = kmeans(PointCloud(pts), 7, seed=2)
        d2 = ((pts[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
        own = d2[np.arange(80), model.assignment]
        assert (own <= d2.min(axis=1) + 1e-12).all()

    def test_sse_history_non_increasing(self, rng):
        pts = rng.normal(size=(100, 3))
        model = kmeans(PointCloud(pts), 6, seed=8)
        history = np.asarray(model.sse_history)
        assert (np.diff(history) <= 1e-9).all()
        assert model.sse == history[-1]

    def test_no_empty_clusters_even_with_duplicates(self):
        pts = np.zeros((10, 3))
        pts[5:] = 1.0  # two stacks of 5 identical points
        model = kmeans(PointCloud(pts), 4, seed=0)
        assert np.bincount(model.assignment, minlength=4).min() >= 1

    def test_deterministic(self, rng):
        pts = rng.normal(size=(50, 3))
        a = kmeans(PointCloud(pts), 5, seed=11)
        b = kmeans(PointCloud(pts), 5, seed=11)
        np.testing.assert_array_equal(a.assignment, b.assignment)
        np.testing.assert_array_equal(a.centroids, b.centroids)

    def test_c_bounds(self, rng):
        cloud = PointCloud(rng.normal(size=(4, 3)))
        with pytest.raises(ValueError):
            kmeans(cloud, 0, seed=0)
        with pytest.raises(ValueError):
            kmeans(cloud, 5, seed=0)


class TestClusterModel:
    def test_json_round_trip(self, rng):
        pts = rng.normal(size=(30, 3))
        cloud = PointCloud(pts)
        model = kmeans(cloud, 3, seed=1)
        back = ClusterModel.from_json(model.to_json(), cloud)
        np.testing.assert_array_equal(back.assignment, model.assignment)
        np.testing.assert_array_equal(back.centroids, model.centroids)
        assert back.sse == pytest.approx(model.sse, rel=1e-9)

    def test_rejects_empty_cluster(self):
        with pytest.raises(ValueError, match="empty clusters"):
            ClusterModel(np.array([0, 0, 0]), np.zeros((2, 3)), 2, 0.0)

    def test_rejects_out_of_range_assignment(self):
        with pytest.raises(ValueError):
            ClusterModel(np.array([0, 3]), np.zeros((2, 3)), 2, 0.0)

    def test_cluster_sizes(self, rng):
        model = kmeans(PointCloud(rng.normal(size=(40, 3))), 4, seed=0)
        sizes = model.cluster_sizes()
        assert sizes.sum() == 40
        assert sizes.min() >= 1
