import math

import numpy as np
import pytest

from cloudcollide.bsh import (
    NODE_BYTES,
    Bsh,
    build_partition_bsh,
    build_point_bsh,
    height_bound,
    load_bsh,
    morton_codes,
    morton_order,
    node_leaf_ranges,
    save_bsh,
    spread_bits,
    tree_stats,
    validate_bsh,
)
from cloudcollide.geometry import Sphere, merge_spheres
from cloudcollide.pointcloud import PointCloud, with_radius
from cloudcollide.spatial import Partition, build_octree


def point_tree(points, radius=0.1, degree=8):
    cloud = with_radius(PointCloud(np.asarray(points, dtype=float)), radius)
    part = build_octree(cloud, max_depth=0).leaves[0]
    return cloud, build_point_bsh(cloud, part, degree)


def spread_reference(v: int) -> int:
    out = 0
    for bit in range(21):
        out |= ((v >> bit) & 1) << (3 * bit)
    return out


class TestMorton:
    def test_spread_bits_against_reference(self):
        rng = np.random.default_rng(0)
        vals = np.concatenate(
            [[0, 1, 2, 3, (1 << 21) - 1], rng.integers(0, 1 << 21, 200)]
        ).astype(np.uint64)
        got = spread_bits(vals)
        for v, g in zip(vals, got):
            assert int(g) == spread_reference(int(v)), v

    def test_codes_follow_z_order(self):
        corners = np.array(
            [
                [0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0],
                [0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1],
            ],
            dtype=float,
        )
        codes = morton_codes(corners)
        assert np.array_equal(np.argsort(codes, kind="stable"), np.arange(8))

    def test_degenerate_cloud_keeps_input_order(self):
        pts = np.zeros((5, 3))
        assert np.array_equal(morton_order(pts), np.arange(5))

    def test_locality(self):
        # points of one cluster sort adjacently
        rng = np.random.default_rng(1)
        near = rng.normal(scale=0.01, size=(20, 3))
        far = rng.normal(scale=0.01, size=(20, 3)) + 100.0
        order = morton_order(np.concatenate([near, far]))
        first_half = set(order[:20].tolist())
        assert first_half in ({*range(20)}, {*range(20, 40)})


class TestPackedBuild:
    def test_single_point(self):
        _, tree = point_tree([[1.0, 2.0, 3.0]], radius=0.5)
        assert tree.height == 1
        assert tree.leaf_count == 1
        assert tree.node_count == 1
        root = tree.root_node
        assert root.is_leaf and root.payload == 0
        assert np.array_equal(root.sphere.center, [1, 2, 3]) and root.sphere.radius == 0.5

    def test_64_points_degree_8(self):
        rng = np.random.default_rng(2)
        _, tree = point_tree(rng.uniform(0, 1, (64, 3)), degree=8)
        assert tree.leaf_count == 64
        assert tree.height == 3  # 64 leaves -> 8 inner -> 1 root
        assert tree.node_count == 64 + 8 + 1
        stats = tree_stats(tree)
        assert (stats.height, stats.node_count, stats.leaf_count) == (3, 73, 64)
        assert stats.memory_bytes == 73 * NODE_BYTES

    def test_4096_partitions_degree_10(self):
        rng = np.random.default_rng(3)
        spheres = [
            (i, Sphere(rng.uniform(0, 10, 3), float(rng.uniform(0.01, 0.2))))
            for i in range(4096)
        ]
        tree = build_partition_bsh(spheres, degree=10)
        assert tree.leaf_count == 4096
        assert tree.height == 5  # 4096 -> 410 -> 41 -> 5 -> 1
        assert tree.level_sizes == (4096, 410, 41, 5, 1)
        assert set(tree.leaf_payloads().tolist()) == set(range(4096))

    def test_leaf_spheres_use_cloud_radius(self):
        cloud, tree = point_tree([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]], radius=0.25)
        for i in range(tree.leaf_count):
            node = tree.node(i)
            assert node.sphere.radius == 0.25
            assert np.array_equal(node.sphere.center, cloud.points[node.payload])

    def test_per_point_radii_respected(self):
        pts = np.array([[0.0, 0, 0], [1.0, 0, 0], [3.0, 0, 0]])
        cloud = PointCloud(pts, point_radius=0.5, per_point_radii=np.array([0.1, 0.2, 0.3]))
        part = build_octree(cloud, max_depth=0).leaves[0]
        tree = build_point_bsh(cloud, part, 4)
        for i in range(tree.leaf_count):
            node = tree.node(i)
            assert node.sphere.radius == cloud.per_point_radii[node.payload]

    def test_degree_must_be_at_least_two(self):
        with pytest.raises(ValueError, match="degree"):
            point_tree(np.zeros((3, 3)), degree=1)

    def test_empty_partition_list(self):
        with pytest.raises(ValueError, match="empty node"):
            build_partition_bsh([], degree=4)


def walk_leaves(node):
    if node.is_leaf:
        return [node]
    out = []
    for child in node.children:
        out.extend(walk_leaves(child))
    return out


def walk_depths(node, depth=0):
    if node.is_leaf:
        return [depth]
    out = []
    for child in node.children:
        out.extend(walk_depths(child, depth + 1))
    return out


class TestInvariants:
    def test_containment_exhaustive_walk(self):
        # independent recursive oracle on a small tree
        rng = np.random.default_rng(4)
        _, tree = point_tree(rng.normal(size=(200, 3)), radius=0.05, degree=3)
        stack = [tree.root_node]
        while stack:
            node = stack.pop()
            for leaf in walk_leaves(node):
                d = float(np.linalg.norm(node.sphere.center - leaf.sphere.center))
                assert d + leaf.sphere.radius <= node.sphere.radius * (1 + 1e-9)
            if not node.is_leaf:
                stack.extend(node.children)

    def test_validator_agrees_on_random_trees(self):
        rng = np.random.default_rng(5)
        for trial in range(25):
            n = int(rng.integers(1, 5000))
            pts = rng.normal(size=(n, 3)) * rng.uniform(0.01, 100)
            _, tree = point_tree(pts, radius=float(rng.uniform(1e-4, 1.0)),
                                 degree=int(rng.integers(2, 17)))
            validate_bsh(tree)

    def test_validator_catches_corruption(self):
        rng = np.random.default_rng(6)
        _, tree = point_tree(rng.uniform(0, 1, (100, 3)), degree=4)
        radii = tree.radii.copy()
        radii[tree.root] = 1e-9  # root can no longer contain anything
        broken = Bsh(
            degree=tree.degree,
            centers=tree.centers,
            radii=radii,
            child_start=tree.child_start,
            child_count=tree.child_count,
            payloads=tree.payloads,
            level_sizes=tree.level_sizes,
        )
        with pytest.raises(ValueError):
            validate_bsh(broken)

    def test_all_leaves_at_the_same_depth(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = int(rng.integers(1, 600))
            _, tree = point_tree(rng.normal(size=(n, 3)), degree=int(rng.integers(2, 17)))
            depths = walk_depths(tree.root_node)
            assert len(set(depths)) == 1
            assert depths[0] == tree.height - 1
            assert len(depths) == tree.leaf_count

    def test_payload_multiset_equals_input(self):
        rng = np.random.default_rng(8)
        cloud = with_radius(PointCloud(rng.uniform(0, 1, (777, 3))), 0.01)
        subset = np.sort(rng.choice(777, size=300, replace=False))
        part = Partition(cell_bounds=build_octree(cloud, max_depth=0).bounds, point_indices=subset)
        tree = build_point_bsh(cloud, part, 6)
        assert sorted(tree.leaf_payloads().tolist()) == subset.tolist()

    def test_node_sphere_equals_merge_of_children(self):
        rng = np.random.default_rng(9)
        _, tree = point_tree(rng.normal(size=(300, 3)), radius=0.02, degree=5)
        for idx in range(tree.leaf_count, tree.node_count):
            node = tree.node(idx)
            merged = merge_spheres([c.sphere for c in node.children])
            assert np.array_equal(merged.center, node.sphere.center)
            assert merged.radius == node.sphere.radius

    def test_deterministic_build(self):
        rng = np.random.default_rng(10)
        pts = rng.normal(size=(1234, 3))
        _, t1 = point_tree(pts, degree=7)
        _, t2 = point_tree(pts, degree=7)
        assert t1.level_sizes == t2.level_sizes
        assert t1.centers.tobytes() == t2.centers.tobytes()
        assert t1.radii.tobytes() == t2.radii.tobytes()
        assert t1.child_start.tobytes() == t2.child_start.tobytes()
        assert t1.payloads.tobytes() == t2.payloads.tobytes()

    def test_height_monotone_in_degree(self):
        rng = np.random.default_rng(11)
        pts = rng.normal(size=(500, 3))
        heights = [point_tree(pts, degree=d)[1].height for d in range(2, 17)]
        assert all(a >= b for a, b in zip(heights, heights[1:]))

    def test_height_bound_holds(self):
        rng = np.random.default_rng(12)
        for _ in range(40):
            n = int(rng.integers(1, 20000))
            d = int(rng.integers(2, 17))
            sizes = [n]
            while sizes[-1] > 1:
                sizes.append(-(-sizes[-1] // d))
            assert len(sizes) <= height_bound(n, d), (n, d)

    def test_node_leaf_ranges_cover(self):
        rng = np.random.default_rng(13)
        _, tree = point_tree(rng.normal(size=(97, 3)), degree=3)
        lo, hi = node_leaf_ranges(tree)
        assert lo[tree.root] == 0 and hi[tree.root] == tree.leaf_count
        for i in range(tree.leaf_count):
            assert (lo[i], hi[i]) == (i, i + 1)


class TestDumpLoad:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(14)
        _, tree = point_tree(rng.normal(size=(321, 3)), degree=9)
        p = tmp_path / "tree.bsh"
        save_bsh(tree, p)
        again = load_bsh(p)
        assert again.degree == tree.degree
        assert again.level_sizes == tree.level_sizes
        assert np.array_equal(again.centers, tree.centers)
        assert np.array_equal(again.radii, tree.radii)
        assert np.array_equal(again.child_start, tree.child_start)
        assert np.array_equal(again.child_count, tree.child_count)
        assert np.array_equal(again.payloads, tree.payloads)
        validate_bsh(again)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bogus.bsh"
        p.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ValueError, match="magic"):
            load_bsh(p)

    def test_bad_version(self, tmp_path):
        rng = np.random.default_rng(15)
        _, tree = point_tree(rng.normal(size=(10, 3)))
        p = tmp_path / "tree.bsh"
        save_bsh(tree, p)
        data = bytearray(p.read_bytes())
        data[4] = 99
        p.write_bytes(bytes(data))
        with pytest.raises(ValueError, match="version"):
            load_bsh(p)


class TestHeightBound:
    def test_matches_spec_examples(self):
        assert height_bound(1, 8) == 1
        # 64 leaves at degree 8: packed height is 3, bound is ceil(log_4 64) + 1 = 4
        assert height_bound(64, 8) == 4
        assert math.ceil(math.log(4096) / math.log(5)) + 1 == height_bound(4096, 10)

    def test_degree_two_uses_base_two(self):
        assert height_bound(3, 2) == math.ceil(math.log2(3)) + 1
