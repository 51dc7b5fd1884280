import math

import numpy as np
import pytest

from h2oflow.errors import InvalidArgument, InvalidData
from h2oflow.geometry import (
    CANONICAL_FRAME,
    PointCloud,
    SphereBins,
    VoxelGridSpec,
    bin_probabilities,
    center_on_centroid,
    fps_sample,
    make_sphere_bins,
    voxelize,
)


def fps_oracle(points, k, start_index):
    """Literal greedy FPS: max-min distance, lowest index on ties."""
    chosen = [start_index]
    for _ in range(k - 1):
        best, best_d = None, -1.0
        for i in range(len(points)):
            d = min(float(np.sum((points[i] - points[j]) ** 2)) for j in chosen)
            if d > best_d:
                best, best_d = i, d
        chosen.append(best)
    return chosen


class TestFps:
    def test_single_point(self):
        pc = PointCloud(np.zeros((1, 3)))
        assert fps_sample(pc, 1, 0).tolist() == [0]

    def test_collinear(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
        idx = fps_sample(PointCloud(pts), 2, 0)
        assert idx.tolist() == [0, 3]

    def test_full_k_is_permutation(self):
        rng = np.random.default_rng(7)
        pts = rng.normal(size=(17, 3))
        idx = fps_sample(PointCloud(pts), 17, 5)
        assert sorted(idx.tolist()) == list(range(17))

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_bruteforce_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 64))
        pts = rng.normal(size=(n, 3))
        k = int(rng.integers(1, n + 1))
        start = int(rng.integers(0, n))
        got = fps_sample(PointCloud(pts), k, start)
        assert got.tolist() == fps_oracle(pts, k, start)

    def test_tie_break_lowest_index(self):
        # symmetric square: after corner 0, corners 1 and 2 tie at the
        # same min distance once 3 is taken; lowest index must win
        pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
        idx = fps_sample(PointCloud(pts), 3, 0)
        assert idx.tolist() == fps_oracle(pts, 3, 0)

    def test_errors(self):
        pc = PointCloud(np.zeros((2, 3)))
        with pytest.raises(InvalidArgument):
            fps_sample(pc, 3, 0)
        with pytest.raises(InvalidArgument):
            fps_sample(pc, 1, 2)
        with pytest.raises(InvalidData):
            PointCloud(np.array([[np.nan, 0, 0]]))


class TestCenterOnCentroid:
    def test_shift_is_minus_centroid(self):
        obj = PointCloud(np.array([[1.0, 2.0, 3.0]]))
        hum = PointCloud(np.array([[0.0, 0.0, 0.0]]))
        obj_c, hum_c, centroid = center_on_centroid(obj, hum)
        assert np.allclose(centroid, [1, 2, 3])
        assert np.allclose(obj_c.points, 0)
        assert np.allclose(hum_c.points, [[-1, -2, -3]])
        assert obj_c.frame_tag == CANONICAL_FRAME
        assert hum_c.frame_tag == CANONICAL_FRAME

    def test_recentering_random_cloud(self):
        rng = np.random.default_rng(0)
        obj = PointCloud(rng.normal(size=(512, 3)) + 5.0)
        hum = PointCloud(rng.normal(size=(64, 3)))
        obj_c, _, _ = center_on_centroid(obj, hum)
        assert np.all(np.abs(obj_c.points.mean(axis=0)) < 1e-9)

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        obj = PointCloud(rng.normal(size=(40, 3)) + 2.0)
        hum = PointCloud(rng.normal(size=(40, 3)))
        o1, h1, _ = center_on_centroid(obj, hum)
        o2, h2, c2 = center_on_centroid(o1, h1)
        assert np.all(np.abs(c2) < 1e-9)
        assert np.allclose(o1.points, o2.points, atol=1e-9)
        assert np.allclose(h1.points, h2.points, atol=1e-9)


class TestVoxelize:
    def spec(self, dims=(2, 2, 2), cell=0.5):
        return VoxelGridSpec(np.zeros(3), cell, dims)

    def test_single_point(self):
        spec = self.spec()
        pc = PointCloud(np.array([[0.25, 0.25, 0.25]]))
        grid, dropped = voxelize(pc, spec)
        assert grid[0, 0, 0] == 1 and grid.sum() == 1 and dropped == 0

    def test_half_open_boundary(self):
        spec = self.spec()
        pc = PointCloud(np.array([[0.5, 0.0, 0.0]]))  # exactly origin + cell on x
        grid, dropped = voxelize(pc, spec)
        assert grid[1, 0, 0] == 1 and dropped == 0
        # the far upper boundary is excluded
        pc2 = PointCloud(np.array([[1.0, 0.0, 0.0]]))
        grid2, dropped2 = voxelize(pc2, spec)
        assert grid2.sum() == 0 and dropped2 == 1

    def test_conservation_against_bruteforce(self):
        rng = np.random.default_rng(3)
        spec = VoxelGridSpec(np.array([-1.0, -1.0, -1.0]), 0.4, (5, 5, 5))
        pts = rng.uniform(-1.0, 1.0, size=(100, 3))
        grid, dropped = voxelize(PointCloud(pts), spec)
        assert grid.sum() + dropped == 100
        # brute-force point-in-box count per cell
        for c in [(0, 0, 0), (2, 3, 1), (4, 4, 4)]:
            lo = spec.origin + np.array(c) * spec.cell_size
            hi = lo + spec.cell_size
            n = np.sum(np.all((pts >= lo) & (pts < hi), axis=1))
            assert grid[c] == n

    def test_in_extent_points_all_counted(self):
        rng = np.random.default_rng(4)
        spec = self.spec(dims=(3, 3, 3), cell=1.0)
        pts = rng.uniform(0.0, 3.0, size=(100, 3))
        grid, dropped = voxelize(PointCloud(pts), spec)
        assert grid.sum() == 100 - dropped


class TestSphereBins:
    def test_two_bins_point_apart(self):
        bins = make_sphere_bins(2)
        assert float(bins.directions[0] @ bins.directions[1]) < 0

    @pytest.mark.parametrize("n_b", [2, 5, 16, 64, 200])
    def test_unit_norm(self, n_b):
        bins = make_sphere_bins(n_b)
        assert np.all(np.abs(np.linalg.norm(bins.directions, axis=1) - 1) < 1e-9)

    def test_lattice_spacing_64(self):
        dirs = make_sphere_bins(64).directions
        dots = np.clip(dirs @ dirs.T, -1, 1)
        np.fill_diagonal(dots, -1)
        nn_angle = np.arccos(dots.max(axis=1))
        assert np.all(nn_angle >= 0.15) and np.all(nn_angle <= 0.45)

    def test_deterministic(self):
        assert np.array_equal(make_sphere_bins(32).directions,
                              make_sphere_bins(32).directions)

    def test_too_few_bins(self):
        with pytest.raises(InvalidArgument):
            make_sphere_bins(1)


class TestBinProbabilities:
    def test_kernel_peak(self):
        bins = make_sphere_bins(16)
        p = bin_probabilities(bins.directions[3], bins, 1e-4)
        assert p[3] > 0.999

    def test_flat_limit(self):
        bins = make_sphere_bins(16)
        p = bin_probabilities(np.array([0.0, 0.0, 1.0]), bins, 1e9)
        assert np.allclose(p, 1.0 / 16, atol=1e-6)

    def test_matches_direct_evaluation(self):
        # independent scalar evaluation of the kernel formula, sigma^2 = 1
        bins = make_sphere_bins(64)
        x = np.array([0.0, 0.0, 1.0])
        p = bin_probabilities(x, bins, 1.0)
        raw = [math.exp(-sum((x[a] - d[a]) ** 2 for a in range(3)) / 2.0)
               for d in bins.directions]
        expect = np.array(raw) / sum(raw)
        assert np.allclose(p, expect, rtol=1e-12, atol=0)

    def test_sums_to_one_and_positive(self):
        bins = make_sphere_bins(64)
        rng = np.random.default_rng(5)
        for _ in range(20):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            p = bin_probabilities(v, bins, 1.0)
            assert abs(p.sum() - 1.0) < 1e-9
            assert np.all(p > 0)

    def test_joint_permutation_invariance(self):
        bins = make_sphere_bins(32)
        rng = np.random.default_rng(6)
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        p = bin_probabilities(v, bins, 0.7)
        perm = rng.permutation(32)
        p_perm = bin_probabilities(v, SphereBins(bins.directions[perm]), 0.7)
        assert np.allclose(p_perm, p[perm], rtol=1e-12)

    def test_zero_vector_rejected(self):
        bins = make_sphere_bins(8)
        with pytest.raises(InvalidArgument):
            bin_probabilities(np.zeros(3), bins, 1.0)
