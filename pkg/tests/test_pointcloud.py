import numpy as np
import pytest

from cloudcollide.oracle import brute_force_nn, brute_force_nn_distances
from cloudcollide.pointcloud import (
    PointCloud,
    assign_radius,
    grid_nearest_neighbor_distances,
    load_cloud,
    nearest_neighbor_stats,
    save_xyz,
    with_radius,
)

CUBE_CORNERS = np.array(
    [[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)]
)


def random_cloud(rng, n, clustered=False):
    if clustered:
        k = int(rng.integers(2, 6))
        centers = rng.uniform(-10, 10, (k, 3))
        pts = np.concatenate(
            [c + rng.normal(scale=rng.uniform(0.05, 0.5), size=(n // k + 1, 3)) for c in centers]
        )[:n]
    else:
        pts = rng.uniform(0, 1, (n, 3))
    return pts


class TestLoadXyz:
    def test_basic(self, tmp_path):
        p = tmp_path / "pts.xyz"
        p.write_text("0 0 0\n1 0 0\n")
        cloud = load_cloud(p)
        assert len(cloud) == 2
        assert np.array_equal(cloud.points, [[0, 0, 0], [1, 0, 0]])

    def test_comments_and_extra_columns(self, tmp_path):
        p = tmp_path / "pts.xyz"
        p.write_text("# header\n0 0 0 255 255 255\n\n1 2 3 0.5\n")
        cloud = load_cloud(p)
        assert np.array_equal(cloud.points, [[0, 0, 0], [1, 2, 3]])

    def test_malformed_line_names_line(self, tmp_path):
        p = tmp_path / "pts.xyz"
        p.write_text("0 0 0\n0 0 abc\n")
        with pytest.raises(ValueError, match="line 2"):
            load_cloud(p)

    def test_too_few_columns(self, tmp_path):
        p = tmp_path / "pts.xyz"
        p.write_text("0 0\n")
        with pytest.raises(ValueError, match="line 1"):
            load_cloud(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "pts.xyz"
        p.write_text("# nothing\n")
        with pytest.raises(ValueError, match="no points"):
            load_cloud(p)

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        pts = rng.normal(scale=123.456, size=(257, 3))
        p = tmp_path / "rt.xyz"
        save_xyz(PointCloud(pts), p)
        again = load_cloud(p)
        assert np.array_equal(again.points, pts)
        save_xyz(again, tmp_path / "rt2.xyz")
        assert (tmp_path / "rt.xyz").read_text() == (tmp_path / "rt2.xyz").read_text()


PLY_BASIC = """ply
format ascii 1.0
comment made by hand
element vertex 3
property float x
property float y
property float z
end_header
0 0 0
1 0 0
0 1 0
"""

PLY_WITH_FACES = """ply
format ascii 1.0
element vertex 3
property float x
property float y
property float z
property uchar red
element face 1
property list uchar int vertex_indices
end_header
0 0 0 255
1 0 0 255
0 1 0 255
3 0 1 2
"""


class TestLoadPly:
    def test_basic(self, tmp_path):
        p = tmp_path / "m.ply"
        p.write_text(PLY_BASIC)
        cloud = load_cloud(p)  # format from extension
        assert len(cloud) == 3
        assert np.array_equal(cloud.points, [[0, 0, 0], [1, 0, 0], [0, 1, 0]])

    def test_extra_props_and_faces_ignored(self, tmp_path):
        p = tmp_path / "m.ply"
        p.write_text(PLY_WITH_FACES)
        cloud = load_cloud(p, fmt="ply_ascii")
        assert len(cloud) == 3

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "m.ply"
        p.write_text("plyx\nend_header\n")
        with pytest.raises(ValueError, match="magic"):
            load_cloud(p)

    def test_truncated_vertices(self, tmp_path):
        p = tmp_path / "m.ply"
        p.write_text("ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n")
        with pytest.raises(ValueError, match="line"):
            load_cloud(p)

    def test_wrong_property_order(self, tmp_path):
        p = tmp_path / "m.ply"
        p.write_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float y\nproperty float x\nproperty float z\nend_header\n0 0 0\n")
        with pytest.raises(ValueError, match="x, y, z"):
            load_cloud(p)


class TestSpacingStats:
    def test_unit_cube_corners(self):
        stats = nearest_neighbor_stats(PointCloud(CUBE_CORNERS))
        assert stats.mean_nn_distance == 1.0
        assert stats.min_nn_distance == 1.0
        assert stats.max_nn_distance == 1.0
        assert stats.duplicate_count == 0

    def test_collinear_three_points(self):
        # nn distances {1, 1, 2} computed by hand over all 3 pairs
        cloud = PointCloud(np.array([[0.0, 0, 0], [1.0, 0, 0], [3.0, 0, 0]]))
        stats = nearest_neighbor_stats(cloud)
        assert stats.mean_nn_distance == (1.0 + 1.0 + 2.0) / 3.0
        assert stats.min_nn_distance == 1.0
        assert stats.max_nn_distance == 2.0

    def test_indexed_equals_brute_uniform(self):
        rng = np.random.default_rng(10)
        pts = rng.uniform(0, 1, (1000, 3))
        assert np.array_equal(
            grid_nearest_neighbor_distances(pts), brute_force_nn_distances(pts)
        )

    def test_indexed_equals_brute_varied(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            n = int(rng.integers(2, 1500))
            pts = random_cloud(rng, n, clustered=bool(trial % 2))
            assert np.array_equal(
                grid_nearest_neighbor_distances(pts), brute_force_nn_distances(pts)
            ), f"trial {trial}"

    def test_isolated_outlier(self):
        # far outlier forces the expanding ring search past ring 1
        rng = np.random.default_rng(12)
        pts = np.concatenate([rng.uniform(0, 1, (300, 3)), [[500.0, 500.0, 500.0]]])
        assert np.array_equal(
            grid_nearest_neighbor_distances(pts), brute_force_nn_distances(pts)
        )

    def test_duplicates_excluded_and_counted(self):
        pts = np.array([[0.0, 0, 0], [0.0, 0, 0], [1.0, 0, 0]])
        stats = nearest_neighbor_stats(PointCloud(pts))
        assert stats.duplicate_count == 2  # both coincident points have nn distance 0
        assert stats.min_nn_distance == 1.0
        assert stats.mean_nn_distance == 1.0

    def test_all_coincident_is_undefined(self):
        pts = np.zeros((4, 3))
        with pytest.raises(ValueError, match="spacing undefined"):
            nearest_neighbor_stats(PointCloud(pts))

    def test_single_point_is_undefined(self):
        with pytest.raises(ValueError, match="spacing undefined"):
            nearest_neighbor_stats(PointCloud(np.zeros((1, 3))))

    def test_scaling_scales_stats(self):
        rng = np.random.default_rng(13)
        pts = rng.uniform(0, 1, (400, 3))
        base = nearest_neighbor_stats(PointCloud(pts))
        for s in (0.5, 3.7, 1000.0):
            scaled = nearest_neighbor_stats(PointCloud(pts * s))
            assert scaled.mean_nn_distance == pytest.approx(base.mean_nn_distance * s, rel=1e-12)
            assert scaled.min_nn_distance == pytest.approx(base.min_nn_distance * s, rel=1e-12)
            assert scaled.max_nn_distance == pytest.approx(base.max_nn_distance * s, rel=1e-12)
            radius = assign_radius(PointCloud(pts * s), scaled).point_radius
            assert radius == pytest.approx(base.mean_nn_distance * s / 2, rel=1e-12)


class TestAssignRadius:
    def test_halves_the_mean(self):
        stats = nearest_neighbor_stats(PointCloud(CUBE_CORNERS))
        cloud = assign_radius(PointCloud(CUBE_CORNERS), stats)
        assert cloud.point_radius == 0.5

    def test_small_spacing(self):
        pts = CUBE_CORNERS * 0.02
        cloud = assign_radius(PointCloud(pts), nearest_neighbor_stats(PointCloud(pts)))
        assert cloud.point_radius == pytest.approx(0.01, rel=1e-12)

    def test_per_point_mode(self):
        pts = np.array([[0.0, 0, 0], [1.0, 0, 0], [3.0, 0, 0]])
        stats = nearest_neighbor_stats(PointCloud(pts))
        cloud = assign_radius(PointCloud(pts), stats, mode="per-point")
        assert np.array_equal(cloud.per_point_radii, [0.5, 0.5, 1.0])
        assert np.array_equal(cloud.radii_array(), [0.5, 0.5, 1.0])

    def test_per_point_duplicates_get_global_fallback(self):
        pts = np.array([[0.0, 0, 0], [0.0, 0, 0], [1.0, 0, 0]])
        stats = nearest_neighbor_stats(PointCloud(pts))
        cloud = assign_radius(PointCloud(pts), stats, mode="per-point")
        assert np.array_equal(cloud.per_point_radii, [0.5, 0.5, 0.5])

    def test_explicit_override(self):
        cloud = with_radius(PointCloud(np.zeros((1, 3))), 0.25)
        assert cloud.point_radius == 0.25
        assert np.array_equal(cloud.radii_array(), [0.25])

    def test_unknown_mode(self):
        stats = nearest_neighbor_stats(PointCloud(CUBE_CORNERS))
        with pytest.raises(ValueError, match="radius mode"):
            assign_radius(PointCloud(CUBE_CORNERS), stats, mode="banana")


class TestPointCloudType:
    def test_requires_points(self):
        with pytest.raises(ValueError, match="no points"):
            PointCloud(np.empty((0, 3)))

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="finite"):
            PointCloud(np.array([[0.0, np.nan, 0.0]]))

    def test_rejects_bad_radius(self):
        with pytest.raises(ValueError, match="point_radius"):
            PointCloud(np.zeros((1, 3)), point_radius=0.0)

    def test_points_read_only(self):
        cloud = PointCloud(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            cloud.points[0, 0] = 1.0

    def test_radii_require_assignment(self):
        cloud = PointCloud(np.zeros((2, 3)))
        with pytest.raises(ValueError, match="radius"):
            cloud.radii_array()


class TestBruteForceNN:
    def test_two_points(self):
        stats = brute_force_nn(PointCloud(np.array([[0.0, 0, 0], [3.0, 0, 0]])))
        assert stats.mean_nn_distance == stats.min_nn_distance == stats.max_nn_distance == 3.0

    def test_cube_corners(self):
        assert brute_force_nn(PointCloud(CUBE_CORNERS)).mean_nn_distance == 1.0

    def test_matches_indexed_on_5000(self):
        rng = np.random.default_rng(14)
        pts = rng.uniform(0, 10, (5000, 3))
        a = brute_force_nn(PointCloud(pts))
        b = nearest_neighbor_stats(PointCloud(pts))
        assert (a.mean_nn_distance, a.min_nn_distance, a.max_nn_distance) == (
            b.mean_nn_distance,
            b.min_nn_distance,
            b.max_nn_distance,
        )

    def test_too_few_points(self):
        with pytest.raises(ValueError, match="spacing undefined"):
            brute_force_nn(PointCloud(np.zeros((1, 3))))
