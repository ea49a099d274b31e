"""Packed bounding-sphere hierarchies with configurable node degree.

Trees are bulk-loaded bottom-up: leaf primitives are sorted along the
Morton (Z-order) curve for spatial locality, chunked into full nodes of
``degree`` children (the final node per level keeps the remainder), and
each parent sphere is the approximate enclosing sphere of its children.
Consequences mirror the R-tree properties the scheme relies on: every
primitive sits in exactly one leaf, all leaves share one depth, and the
height is bounded by ceil(log_b(leaf_count)) + 1 with b = max(2,
ceil(degree/2)).

Nodes live in flat arrays (struct-of-arrays) so traversal kernels can
index them directly; ``BshNode`` is a light per-node view for API use.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Sphere, merge_sphere_groups, sphere_contains_sphere
from .pointcloud import PointCloud
from .spatial import Partition

MORTON_BITS = 21
# per-node footprint used by tree_stats: 3x f64 center + f64 radius
# + i32 child offset + i32 child count + i64 payload
NODE_BYTES = 48

_MAGIC = b"CBSH"
_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Morton (Z-order) codes
# ---------------------------------------------------------------------------


def spread_bits(v: np.ndarray) -> np.ndarray:
    """Spread the low 21 bits of each uint64 so they occupy every 3rd bit."""
    x = v.astype(np.uint64) & np.uint64(0x1FFFFF)
    x = (x | (x << np.uint64(32))) & np.uint64(0x1F00000000FFFF)
    x = (x | (x << np.uint64(16))) & np.uint64(0x1F0000FF0000FF)
    x = (x | (x << np.uint64(8))) & np.uint64(0x100F00F00F00F00F)
    x = (x | (x << np.uint64(4))) & np.uint64(0x10C30C30C30C30C3)
    x = (x | (x << np.uint64(2))) & np.uint64(0x1249249249249249)
    return x


def morton_codes(points: np.ndarray) -> np.ndarray:
    """63-bit Morton code per point, quantized over the points' own cube."""
    pts = np.asarray(points, dtype=np.float64)
    lo = pts.min(axis=0)
    edge = float((pts.max(axis=0) - lo).max())
    levels = np.uint64(1) << np.uint64(MORTON_BITS)
    if edge <= 0.0:
        q = np.zeros((pts.shape[0], 3), dtype=np.uint64)
    else:
        scaled = (pts - lo) * (float(levels) / edge)
        q = np.clip(np.floor(scaled), 0, float(levels) - 1.0).astype(np.uint64)
    return (
        spread_bits(q[:, 0])
        | (spread_bits(q[:, 1]) << np.uint64(1))
        | (spread_bits(q[:, 2]) << np.uint64(2))
    )


def morton_order(points: np.ndarray) -> np.ndarray:
    """Stable argsort of points by Morton code (ties keep input order)."""
    return np.argsort(morton_codes(points), kind="stable")


# ---------------------------------------------------------------------------
# packed tree
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Bsh:
    """A packed sphere hierarchy.

    Layout: nodes are stored level by level, leaves first (indices
    ``0..leaf_count-1``), root last. Children of an inner node occupy the
    contiguous index range ``child_start .. child_start + child_count``.
    Leaves have ``child_count == 0`` and carry the payload (a point index
    or a partition id); inner nodes have payload -1.
    """

    degree: int
    centers: np.ndarray
    radii: np.ndarray
    child_start: np.ndarray
    child_count: np.ndarray
    payloads: np.ndarray
    level_sizes: tuple[int, ...]

    @property
    def node_count(self) -> int:
        return self.centers.shape[0]

    @property
    def leaf_count(self) -> int:
        return self.level_sizes[0]

    @property
    def height(self) -> int:
        return len(self.level_sizes)

    @property
    def root(self) -> int:
        return self.node_count - 1

    def sphere(self, index: int) -> Sphere:
        return Sphere(self.centers[index], float(self.radii[index]))

    def node(self, index: int) -> "BshNode":
        if not 0 <= index < self.node_count:
            raise IndexError(f"node index {index} out of range [0, {self.node_count})")
        return BshNode(self, int(index))

    @property
    def root_node(self) -> "BshNode":
        return BshNode(self, self.root)

    def leaf_payloads(self) -> np.ndarray:
        return self.payloads[: self.leaf_count]


@dataclass(frozen=True, eq=False)
class BshNode:
    """View of one node of a packed tree."""

    tree: Bsh
    index: int

    @property
    def sphere(self) -> Sphere:
        return self.tree.sphere(self.index)

    @property
    def is_leaf(self) -> bool:
        return int(self.tree.child_count[self.index]) == 0

    @property
    def payload(self) -> int | None:
        p = int(self.tree.payloads[self.index])
        return p if p >= 0 else None

    @property
    def children(self) -> tuple["BshNode", ...]:
        start = int(self.tree.child_start[self.index])
        count = int(self.tree.child_count[self.index])
        return tuple(BshNode(self.tree, start + k) for k in range(count))


def _build_packed(
    leaf_centers: np.ndarray,
    leaf_radii: np.ndarray,
    leaf_payloads: np.ndarray,
    degree: int,
) -> Bsh:
    """Bottom-up packing of pre-ordered leaves into a same-depth tree."""
    if degree < 2:
        raise ValueError(f"degree must be >= 2, got {degree}")
    n = leaf_centers.shape[0]
    if n == 0:
        raise ValueError("empty node: cannot build a hierarchy with no leaves")

    centers_levels = [np.ascontiguousarray(leaf_centers, dtype=np.float64)]
    radii_levels = [np.ascontiguousarray(leaf_radii, dtype=np.float64)]
    level_sizes = [n]
    child_ranges: list[tuple[np.ndarray, np.ndarray]] = []  # per inner level

    while level_sizes[-1] > 1:
        m = level_sizes[-1]
        groups = (m + degree - 1) // degree
        pad = np.minimum(np.arange(groups * degree), m - 1)  # repeat last real child
        gc = centers_levels[-1][pad].reshape(groups, degree, 3)
        gr = radii_levels[-1][pad].reshape(groups, degree)
        pc, pr = merge_sphere_groups(gc, gr)
        starts = np.arange(groups, dtype=np.int64) * degree
        counts = np.minimum(starts + degree, m) - starts
        child_ranges.append((starts, counts))
        centers_levels.append(pc)
        radii_levels.append(pr)
        level_sizes.append(groups)

    node_count = int(sum(level_sizes))
    centers = np.concatenate(centers_levels, axis=0)
    radii = np.concatenate(radii_levels, axis=0)
    child_start = np.full(node_count, -1, dtype=np.int32)
    child_count = np.zeros(node_count, dtype=np.int32)
    payloads = np.full(node_count, -1, dtype=np.int64)
    payloads[:n] = np.asarray(leaf_payloads, dtype=np.int64)

    offset = 0
    for level, size in enumerate(level_sizes):
        if level > 0:
            starts, counts = child_ranges[level - 1]
            prev_offset = offset - level_sizes[level - 1]
            child_start[offset : offset + size] = (starts + prev_offset).astype(np.int32)
            child_count[offset : offset + size] = counts.astype(np.int32)
        offset += size

    for arr in (centers, radii, child_start, child_count, payloads):
        arr.setflags(write=False)
    return Bsh(
        degree=degree,
        centers=centers,
        radii=radii,
        child_start=child_start,
        child_count=child_count,
        payloads=payloads,
        level_sizes=tuple(level_sizes),
    )


def build_point_bsh(cloud: PointCloud, partition: Partition, degree: int = 10) -> Bsh:
    """Point-level tree of one partition: leaves are the point spheres.

    Leaf order is the Morton order of the partition's points; payloads are
    indices into the owning cloud.
    """
    idx = partition.point_indices
    pts = cloud.points[idx]
    order = morton_order(pts)
    payloads = idx[order]
    radii = cloud.radii_array()[payloads]
    return _build_packed(pts[order], radii, payloads, degree)


def build_partition_bsh(
    partition_spheres: Sequence[tuple[int, Sphere]],
    degree: int = 10,
) -> Bsh:
    """Partition-level tree: leaves are the partitions' root spheres."""
    if len(partition_spheres) == 0:
        raise ValueError("empty node: no partitions to build over")
    ids = np.array([pid for pid, _ in partition_spheres], dtype=np.int64)
    centers = np.stack([s.center for _, s in partition_spheres])
    radii = np.array([s.radius for _, s in partition_spheres])
    order = morton_order(centers)
    return _build_packed(centers[order], radii[order], ids[order], degree)


# ---------------------------------------------------------------------------
# statistics and validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeStats:
    height: int
    node_count: int
    leaf_count: int
    memory_bytes: int


def tree_stats(bsh: Bsh) -> TreeStats:
    """Exact node/level counts; memory is node_count * NODE_BYTES."""
    return TreeStats(
        height=bsh.height,
        node_count=bsh.node_count,
        leaf_count=bsh.leaf_count,
        memory_bytes=bsh.node_count * NODE_BYTES,
    )


def height_bound(leaf_count: int, degree: int) -> int:
    """ceil(log_b leaf_count) + 1 with b = max(2, ceil(degree/2))."""
    if leaf_count < 1:
        raise ValueError("leaf_count must be >= 1")
    if leaf_count == 1:
        return 1
    b = max(2, -(-degree // 2))
    return math.ceil(math.log(leaf_count) / math.log(b)) + 1


def node_leaf_ranges(bsh: Bsh) -> tuple[np.ndarray, np.ndarray]:
    """Per-node [lo, hi) interval of descendant leaf indices (leaves are 0..L)."""
    lo = np.empty(bsh.node_count, dtype=np.int64)
    hi = np.empty(bsh.node_count, dtype=np.int64)
    leaf_n = bsh.leaf_count
    lo[:leaf_n] = np.arange(leaf_n)
    hi[:leaf_n] = np.arange(leaf_n) + 1
    offset = leaf_n
    for size in bsh.level_sizes[1:]:
        nodes = np.arange(offset, offset + size)
        first = bsh.child_start[nodes].astype(np.int64)
        last = first + bsh.child_count[nodes] - 1
        lo[nodes] = lo[first]
        hi[nodes] = hi[last]
        offset += size
    return lo, hi


def validate_bsh(bsh: Bsh, rel_tol: float = 1e-9) -> None:
    """Raise ValueError if any structural invariant fails.

    Checks: leaves exactly fill level 0, payloads unique and only on
    leaves, every node's sphere contains its children's spheres and all
    descendant leaf spheres (within rel_tol * node radius), and the packed
    height respects the minimum-fill log bound.
    """
    leaf_n = bsh.leaf_count
    if not np.all(bsh.child_count[:leaf_n] == 0):
        raise ValueError("level 0 contains a non-leaf node")
    if bsh.node_count > leaf_n and not np.all(bsh.child_count[leaf_n:] > 0):
        raise ValueError("inner level contains a leaf node")
    if not np.all(bsh.payloads[:leaf_n] >= 0):
        raise ValueError("leaf without payload")
    if leaf_n < bsh.node_count and not np.all(bsh.payloads[leaf_n:] == -1):
        raise ValueError("inner node carries a payload")
    if np.unique(bsh.payloads[:leaf_n]).size != leaf_n:
        raise ValueError("duplicate leaf payloads")
    if bsh.height > height_bound(leaf_n, bsh.degree):
        raise ValueError(
            f"height {bsh.height} exceeds bound {height_bound(leaf_n, bsh.degree)} "
            f"for {leaf_n} leaves at degree {bsh.degree}"
        )

    # direct child containment per inner node
    inner = np.flatnonzero(bsh.child_count > 0)
    for node in inner:
        start = int(bsh.child_start[node])
        count = int(bsh.child_count[node])
        parent = bsh.sphere(int(node))
        for k in range(start, start + count):
            if not sphere_contains_sphere(parent, bsh.sphere(k), rel_tol):
                raise ValueError(f"node {node} does not contain child {k}")

    # every node contains all of its descendant leaf spheres
    lo, hi = node_leaf_ranges(bsh)
    leaf_centers = bsh.centers[:leaf_n]
    leaf_radii = bsh.radii[:leaf_n]
    offset = leaf_n
    for size in bsh.level_sizes[1:]:
        nodes = np.arange(offset, offset + size)
        starts = lo[nodes]
        anc = np.searchsorted(starts, np.arange(leaf_n), side="right") - 1
        d = leaf_centers - bsh.centers[nodes][anc]
        dist = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2 + d[:, 2] ** 2)
        slack = bsh.radii[nodes][anc] * (1.0 + rel_tol) - (dist + leaf_radii)
        if np.any(slack < 0.0):
            bad = int(np.flatnonzero(slack < 0.0)[0])
            raise ValueError(
                f"leaf {bad} escapes its level ancestor (node {nodes[anc[bad]]})"
            )
        offset += size


# ---------------------------------------------------------------------------
# binary dump/load
# ---------------------------------------------------------------------------


def save_bsh(bsh: Bsh, path) -> None:
    """Write a hierarchy to disk (versioned header, little-endian scalars)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIQQ", _FORMAT_VERSION, bsh.degree, bsh.node_count, bsh.height))
        fh.write(struct.pack(f"<{bsh.height}Q", *bsh.level_sizes))
        fh.write(np.ascontiguousarray(bsh.centers, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(bsh.radii, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(bsh.child_start, dtype="<i4").tobytes())
        fh.write(np.ascontiguousarray(bsh.child_count, dtype="<i4").tobytes())
        fh.write(np.ascontiguousarray(bsh.payloads, dtype="<i8").tobytes())


def load_bsh(path) -> Bsh:
    """Read a hierarchy written by save_bsh."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a sphere-hierarchy file (bad magic {magic!r})")
        version, degree, node_count, height = struct.unpack("<IIQQ", fh.read(24))
        if version != _FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        level_sizes = struct.unpack(f"<{height}Q", fh.read(8 * height))

        def read_array(dtype, count, shape=None):
            data = np.frombuffer(fh.read(np.dtype(dtype).itemsize * count), dtype=dtype, count=count)
            out = data.astype(data.dtype.newbyteorder("=")).reshape(shape or (count,)).copy()
            out.setflags(write=False)
            return out

        centers = read_array("<f8", node_count * 3, (node_count, 3))
        radii = read_array("<f8", node_count)
        child_start = read_array("<i4", node_count)
        child_count = read_array("<i4", node_count)
        payloads = read_array("<i8", node_count)
    tree = Bsh(
        degree=int(degree),
        centers=centers,
        radii=radii,
        child_start=child_start,
        child_count=child_count,
        payloads=payloads,
        level_sizes=tuple(int(s) for s in level_sizes),
    )
    if tree.node_count != sum(tree.level_sizes):
        raise ValueError(f"{path}: level sizes do not sum to the node count")
    return tree
