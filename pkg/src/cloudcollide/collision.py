"""Pairwise collision queries over two-level sphere hierarchies.

The query walks both objects' partition-level trees together; wherever two
partition leaves overlap it descends into those partitions' point-level
trees. At every visited node pair, A's sphere is re-transformed into B's
local frame (a "sphere update") and tested against B's sphere; disjoint
pairs prune the whole subtree product. Two point spheres that overlap are
a contact.

The traversal is an iterative depth-first walk with an explicit stack,
compiled with numba. Pairs are pushed so that pop order equals the
recursive order (for each child of A, for each child of B), which makes
counters and the first reported contact deterministic and identical to
the recursion they replace. A node-pair visit performs exactly one sphere
update and one sphere test; nothing is cached between visits.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numba import njit

from .bsh import Bsh, BshNode, build_partition_bsh, build_point_bsh, tree_stats
from .geometry import RigidTransform, invert
from .pointcloud import PointCloud
from .spatial import Octree, build_octree

QueryMode = Literal["boolean", "all_pairs"]

# raw point storage accounted by model_memory_bytes: 3 x f64 per point
POINT_BYTES = 24


@dataclass(eq=False)
class CollisionModel:
    """A fully built object: cloud + octree + both hierarchy levels.

    The per-partition point-level trees are also concatenated into one
    flat arena (``pt_*`` arrays) so the traversal kernel can jump from a
    partition-leaf pair straight to the partitions' point-tree roots.
    """

    cloud: PointCloud
    octree: Octree | None = None
    point_trees: list[Bsh] | None = None
    partition_tree: Bsh | None = None
    degree: int = 10
    build_seconds: float = 0.0
    pt_centers: np.ndarray | None = field(default=None, repr=False)
    pt_radii: np.ndarray | None = field(default=None, repr=False)
    pt_child_start: np.ndarray | None = field(default=None, repr=False)
    pt_child_count: np.ndarray | None = field(default=None, repr=False)
    pt_payloads: np.ndarray | None = field(default=None, repr=False)
    pt_roots: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_points(self) -> int:
        return len(self.cloud)

    @property
    def is_built(self) -> bool:
        return (
            self.octree is not None
            and self.point_trees is not None
            and self.partition_tree is not None
            and self.pt_roots is not None
            and (self.cloud.point_radius is not None or self.cloud.per_point_radii is not None)
        )


def build_model(
    cloud: PointCloud,
    degree: int = 10,
    octree_depth: int = 4,
    max_leaf_points: int = 0,
) -> CollisionModel:
    """Build octree, per-partition point trees, and the partition-level tree.

    The cloud must already have its collision radius assigned. Trees live
    in the cloud's local frame and are never rebuilt for motion.
    """
    if cloud.point_radius is None and cloud.per_point_radii is None:
        raise ValueError(
            f"cloud {cloud.name!r} has no collision radius; run assign_radius "
            f"(or supply an explicit radius) before building"
        )
    start = time.perf_counter()
    octree = build_octree(cloud, None, octree_depth, max_leaf_points)
    point_trees = [build_point_bsh(cloud, part, degree) for part in octree.leaves]
    partition_tree = build_partition_bsh(
        [(i, t.root_node.sphere) for i, t in enumerate(point_trees)], degree
    )

    node_counts = [t.node_count for t in point_trees]
    offsets = np.concatenate([[0], np.cumsum(node_counts)])
    total = int(offsets[-1])
    if total >= np.iinfo(np.int32).max:
        raise ValueError("model too large for 32-bit node indices")
    pt_centers = np.ascontiguousarray(np.concatenate([t.centers for t in point_trees], axis=0))
    pt_radii = np.ascontiguousarray(np.concatenate([t.radii for t in point_trees]))
    shifted = []
    for off, t in zip(offsets[:-1], point_trees):
        cs = t.child_start.astype(np.int64)
        shifted.append(np.where(cs >= 0, cs + off, -1))
    pt_child_start = np.concatenate(shifted).astype(np.int32)
    pt_child_count = np.ascontiguousarray(np.concatenate([t.child_count for t in point_trees]))
    pt_payloads = np.ascontiguousarray(np.concatenate([t.payloads for t in point_trees]))
    pt_roots = np.array(
        [off + t.root for off, t in zip(offsets[:-1], point_trees)], dtype=np.int64
    )
    for arr in (pt_centers, pt_radii, pt_child_start, pt_child_count, pt_payloads, pt_roots):
        arr.setflags(write=False)

    return CollisionModel(
        cloud=cloud,
        octree=octree,
        point_trees=point_trees,
        partition_tree=partition_tree,
        degree=degree,
        build_seconds=time.perf_counter() - start,
        pt_centers=pt_centers,
        pt_radii=pt_radii,
        pt_child_start=pt_child_start,
        pt_child_count=pt_child_count,
        pt_payloads=pt_payloads,
        pt_roots=pt_roots,
    )


def model_memory_bytes(model: CollisionModel) -> int:
    """Tree node footprints plus raw point storage (deterministic metric)."""
    _require_built(model, "model")
    total = tree_stats(model.partition_tree).memory_bytes
    total += sum(tree_stats(t).memory_bytes for t in model.point_trees)
    total += model.n_points * POINT_BYTES
    return total


@dataclass(frozen=True)
class CollisionQuery:
    """One pairwise query between two built models.

    ``m_b_from_a`` maps A's local frame into B's. ``orient="auto"`` lets
    the engine traverse with the smaller model in the A role (fewer sphere
    updates, only A's spheres are transformed); contact pairs are always
    reported in the caller's (A, B) order, but the counters reflect the
    executed orientation. Use ``orient="as_given"`` to pin the roles.

    ``descent`` picks the inner-node expansion: "verbatim" (the reference
    semantics) expands the full child cross product when both nodes are
    inner; "largest_first" descends only the node with the larger sphere,
    kept as a measurement variant.
    """

    object_a: CollisionModel
    object_b: CollisionModel
    m_b_from_a: RigidTransform
    mode: QueryMode = "boolean"
    orient: Literal["auto", "as_given"] = "auto"
    descent: Literal["verbatim", "largest_first"] = "verbatim"


@dataclass
class TraversalStats:
    sphere_updates: int = 0
    sphere_tests: int = 0
    leaf_pair_tests: int = 0
    partitions_pruned: int = 0


@dataclass
class CollisionReport:
    """Query outcome plus traversal counters.

    ``contact_pairs`` is a (k, 2) array of (point index in A, point index
    in B); in boolean mode it holds at most the first contact found.
    """

    colliding: bool = False
    contact_pairs: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))
    stats: TraversalStats = field(default_factory=TraversalStats)


# ---------------------------------------------------------------------------
# traversal kernels
# ---------------------------------------------------------------------------
# counters layout: [sphere_updates, sphere_tests, leaf_pair_tests, partitions_pruned]


@njit(cache=True)
def _points_pass(
    a_centers, a_radii, a_child_start, a_child_count, a_payloads,
    b_centers, b_radii, b_child_start, b_child_count, b_payloads,
    start_a, start_b,
    rot, trans, scale,
    first_hit, largest_first,
    counters, contacts, n_contacts, stack,
):
    r00 = rot[0, 0]; r01 = rot[0, 1]; r02 = rot[0, 2]
    r10 = rot[1, 0]; r11 = rot[1, 1]; r12 = rot[1, 2]
    r20 = rot[2, 0]; r21 = rot[2, 1]; r22 = rot[2, 2]
    t0 = trans[0]; t1 = trans[1]; t2 = trans[2]
    stack[0, 0] = start_a
    stack[0, 1] = start_b
    top = 1
    found = False
    while top > 0:
        top -= 1
        ia = stack[top, 0]
        ib = stack[top, 1]
        # update sphere BV: A's sphere into B's frame
        x = a_centers[ia, 0]; y = a_centers[ia, 1]; z = a_centers[ia, 2]
        cx = (x * r00 + y * r01 + z * r02) * scale + t0
        cy = (x * r10 + y * r11 + z * r12) * scale + t1
        cz = (x * r20 + y * r21 + z * r22) * scale + t2
        ra = a_radii[ia] * scale
        counters[0] += 1
        dx = cx - b_centers[ib, 0]
        dy = cy - b_centers[ib, 1]
        dz = cz - b_centers[ib, 2]
        d2 = dx * dx + dy * dy + dz * dz
        rr = ra + b_radii[ib]
        counters[1] += 1
        a_leaf = a_child_count[ia] == 0
        b_leaf = b_child_count[ib] == 0
        if a_leaf and b_leaf:
            counters[2] += 1
        if d2 > rr * rr:
            continue
        if a_leaf and b_leaf:
            if n_contacts == contacts.shape[0]:
                grown = np.empty((contacts.shape[0] * 2, 2), np.int64)
                grown[:n_contacts] = contacts
                contacts = grown
            contacts[n_contacts, 0] = a_payloads[ia]
            contacts[n_contacts, 1] = b_payloads[ib]
            n_contacts += 1
            found = True
            if first_hit:
                return True, contacts, n_contacts, stack
        elif not a_leaf and b_leaf:
            na = a_child_count[ia]
            s0 = a_child_start[ia]
            while top + na > stack.shape[0]:
                grown = np.empty((stack.shape[0] * 2, 2), np.int64)
                grown[:top] = stack[:top]
                stack = grown
            for i in range(na - 1, -1, -1):
                stack[top, 0] = s0 + i
                stack[top, 1] = ib
                top += 1
        elif a_leaf:
            nb = b_child_count[ib]
            s1 = b_child_start[ib]
            while top + nb > stack.shape[0]:
                grown = np.empty((stack.shape[0] * 2, 2), np.int64)
                grown[:top] = stack[:top]
                stack = grown
            for j in range(nb - 1, -1, -1):
                stack[top, 0] = ia
                stack[top, 1] = s1 + j
                top += 1
        elif largest_first and ra >= b_radii[ib]:
            na = a_child_count[ia]
            s0 = a_child_start[ia]
            while top + na > stack.shape[0]:
                grown = np.empty((stack.shape[0] * 2, 2), np.int64)
                grown[:top] = stack[:top]
                stack = grown
            for i in range(na - 1, -1, -1):
                stack[top, 0] = s0 + i
                stack[top, 1] = ib
                top += 1
        elif largest_first:
            nb = b_child_count[ib]
            s1 = b_child_start[ib]
            while top + nb > stack.shape[0]:
                grown = np.empty((stack.shape[0] * 2, 2), np.int64)
                grown[:top] = stack[:top]
                stack = grown
            for j in range(nb - 1, -1, -1):
                stack[top, 0] = ia
                stack[top, 1] = s1 + j
                top += 1
        else:
            na = a_child_count[ia]
            s0 = a_child_start[ia]
            nb = b_child_count[ib]
            s1 = b_child_start[ib]
            while top + na * nb > stack.shape[0]:
                grown = np.empty((stack.shape[0] * 2, 2), np.int64)
                grown[:top] = stack[:top]
                stack = grown
            for i in range(na - 1, -1, -1):
                for j in range(nb - 1, -1, -1):
                    stack[top, 0] = s0 + i
                    stack[top, 1] = s1 + j
                    top += 1
    return found, contacts, n_contacts, stack


@njit(cache=True)
def _partitions_pass(
    a_centers, a_radii, a_child_start, a_child_count, a_payloads,
    b_centers, b_radii, b_child_start, b_child_count, b_payloads,
    start_a, start_b,
    a_pt_roots, b_pt_roots,
    ap_centers, ap_radii, ap_child_start, ap_child_count, ap_payloads,
    bp_centers, bp_radii, bp_child_start, bp_child_count, bp_payloads,
    rot, trans, scale,
    first_hit, largest_first,
    counters, contacts, n_contacts,
):
    r00 = rot[0, 0]; r01 = rot[0, 1]; r02 = rot[0, 2]
    r10 = rot[1, 0]; r11 = rot[1, 1]; r12 = rot[1, 2]
    r20 = rot[2, 0]; r21 = rot[2, 1]; r22 = rot[2, 2]
    t0 = trans[0]; t1 = trans[1]; t2 = trans[2]
    stack = np.empty((256, 2), np.int64)
    pt_stack = np.empty((256, 2), np.int64)
    stack[0, 0] = start_a
    stack[0, 1] = start_b
    top = 1
    found = False
    while top > 0:
        top -= 1
        ia = stack[top, 0]
        ib = stack[top, 1]
        x = a_centers[ia, 0]; y = a_centers[ia, 1]; z = a_centers[ia, 2]
        cx = (x * r00 + y * r01 + z * r02) * scale + t0
        cy = (x * r10 + y * r11 + z * r12) * scale + t1
        cz = (x * r20 + y * r21 + z * r22) * scale + t2
        ra = a_radii[ia] * scale
        counters[0] += 1
        dx = cx - b_centers[ib, 0]
        dy = cy - b_centers[ib, 1]
        dz = cz - b_centers[ib, 2]
        d2 = dx * dx + dy * dy + dz * dz
        rr = ra + b_radii[ib]
        counters[1] += 1
        if d2 > rr * rr:
            counters[3] += 1
            continue
        a_leaf = a_child_count[ia] == 0
        b_leaf = b_child_count[ib] == 0
        if a_leaf and b_leaf:
            pa = a_payloads[ia]
            pb = b_payloads[ib]
            hit, contacts, n_contacts, pt_stack = _points_pass(
                ap_centers, ap_radii, ap_child_start, ap_child_count, ap_payloads,
                bp_centers, bp_radii, bp_child_start, bp_child_count, bp_payloads,
                a_pt_roots[pa], b_pt_roots[pb],
                rot, trans, scale,
                first_hit, largest_first,
                counters, contacts, n_contacts, pt_stack,
            )
            if hit:
                found = True
                if first_hit:
                    return True, contacts, n_contacts
        elif not a_leaf and b_leaf:
            na = a_child_count[ia]
            s0 = a_child_start[ia]
            while top + na > stack.shape[0]:
                grown = np.empty((stack.shape[0] * 2, 2), np.int64)
                grown[:top] = stack[:top]
                stack = grown
            for i in range(na - 1, -1, -1):
                stack[top, 0] = s0 + i
                stack[top, 1] = ib
                top += 1
        elif a_leaf:
            nb = b_child_count[ib]
            s1 = b_child_start[ib]
            while top + nb > stack.shape[0]:
                grown = np.empty((stack.shape[0] * 2, 2), np.int64)
                grown[:top] = stack[:top]
                stack = grown
            for j in range(nb - 1, -1, -1):
                stack[top, 0] = ia
                stack[top, 1] = s1 + j
                top += 1
        elif largest_first and ra >= b_radii[ib]:
            na = a_child_count[ia]
            s0 = a_child_start[ia]
            while top + na > stack.shape[0]:
                grown = np.empty((stack.shape[0] * 2, 2), np.int64)
                grown[:top] = stack[:top]
                stack = grown
            for i in range(na - 1, -1, -1):
                stack[top, 0] = s0 + i
                stack[top, 1] = ib
                top += 1
        elif largest_first:
            nb = b_child_count[ib]
            s1 = b_child_start[ib]
            while top + nb > stack.shape[0]:
                grown = np.empty((stack.shape[0] * 2, 2), np.int64)
                grown[:top] = stack[:top]
                stack = grown
            for j in range(nb - 1, -1, -1):
                stack[top, 0] = ia
                stack[top, 1] = s1 + j
                top += 1
        else:
            na = a_child_count[ia]
            s0 = a_child_start[ia]
            nb = b_child_count[ib]
            s1 = b_child_start[ib]
            while top + na * nb > stack.shape[0]:
                grown = np.empty((stack.shape[0] * 2, 2), np.int64)
                grown[:top] = stack[:top]
                stack = grown
            for i in range(na - 1, -1, -1):
                for j in range(nb - 1, -1, -1):
                    stack[top, 0] = s0 + i
                    stack[top, 1] = s1 + j
                    top += 1
    return found, contacts, n_contacts


# ---------------------------------------------------------------------------
# public query API
# ---------------------------------------------------------------------------


def _require_built(model, what: str) -> None:
    if not isinstance(model, CollisionModel) or not model.is_built:
        raise ValueError(f"hierarchy missing: {what} is not a fully built model")


def _check_mode(mode: str) -> bool:
    """Returns the first-hit flag."""
    if mode == "boolean":
        return True
    if mode == "all_pairs":
        return False
    raise ValueError(f"unknown query mode {mode!r} (expected 'boolean' or 'all_pairs')")


def _check_descent(descent: str) -> bool:
    """Returns the largest-first flag."""
    if descent == "verbatim":
        return False
    if descent == "largest_first":
        return True
    raise ValueError(f"unknown descent {descent!r} (expected 'verbatim' or 'largest_first')")


def _stats_from(counters: np.ndarray) -> TraversalStats:
    return TraversalStats(
        sphere_updates=int(counters[0]),
        sphere_tests=int(counters[1]),
        leaf_pair_tests=int(counters[2]),
        partitions_pruned=int(counters[3]),
    )


def collide(query: CollisionQuery) -> CollisionReport:
    """Run the full two-level traversal from both partition-tree roots."""
    _require_built(query.object_a, "object_a")
    _require_built(query.object_b, "object_b")
    first_hit = _check_mode(query.mode)
    largest_first = _check_descent(query.descent)
    if query.orient not in ("auto", "as_given"):
        raise ValueError(f"unknown orientation {query.orient!r}")

    a, b, m = query.object_a, query.object_b, query.m_b_from_a
    swapped = query.orient == "auto" and b.n_points < a.n_points
    if swapped:
        a, b = b, a
        m = invert(query.m_b_from_a)

    counters = np.zeros(4, dtype=np.int64)
    contacts = np.empty((16, 2), dtype=np.int64)
    ta, tb = a.partition_tree, b.partition_tree
    found, contacts, n = _partitions_pass(
        ta.centers, ta.radii, ta.child_start, ta.child_count, ta.payloads,
        tb.centers, tb.radii, tb.child_start, tb.child_count, tb.payloads,
        ta.root, tb.root,
        a.pt_roots, b.pt_roots,
        a.pt_centers, a.pt_radii, a.pt_child_start, a.pt_child_count, a.pt_payloads,
        b.pt_centers, b.pt_radii, b.pt_child_start, b.pt_child_count, b.pt_payloads,
        m.rotation, m.translation, m.scale,
        first_hit, largest_first,
        counters, contacts, 0,
    )
    pairs = contacts[:n].copy()
    if swapped:
        pairs = pairs[:, ::-1].copy()
    return CollisionReport(colliding=bool(found), contact_pairs=pairs, stats=_stats_from(counters))


def collide_partitions(
    node_a: BshNode,
    node_b: BshNode,
    query: CollisionQuery,
    report: CollisionReport | None = None,
) -> CollisionReport:
    """Partition-level recursion from an explicit node pair.

    ``node_a``/``node_b`` must belong to object_a's and object_b's
    partition-level trees; results accumulate into ``report``. No
    role auto-orientation happens here.
    """
    _require_built(query.object_a, "object_a")
    _require_built(query.object_b, "object_b")
    a, b = query.object_a, query.object_b
    if node_a.tree is not a.partition_tree:
        raise ValueError("node_a must come from object_a's partition-level tree")
    if node_b.tree is not b.partition_tree:
        raise ValueError("node_b must come from object_b's partition-level tree")
    first_hit = _check_mode(query.mode)
    largest_first = _check_descent(query.descent)
    m = query.m_b_from_a

    counters = np.zeros(4, dtype=np.int64)
    contacts = np.empty((16, 2), dtype=np.int64)
    ta, tb = a.partition_tree, b.partition_tree
    found, contacts, n = _partitions_pass(
        ta.centers, ta.radii, ta.child_start, ta.child_count, ta.payloads,
        tb.centers, tb.radii, tb.child_start, tb.child_count, tb.payloads,
        node_a.index, node_b.index,
        a.pt_roots, b.pt_roots,
        a.pt_centers, a.pt_radii, a.pt_child_start, a.pt_child_count, a.pt_payloads,
        b.pt_centers, b.pt_radii, b.pt_child_start, b.pt_child_count, b.pt_payloads,
        m.rotation, m.translation, m.scale,
        first_hit, largest_first,
        counters, contacts, 0,
    )
    return _merge_report(report, bool(found), contacts[:n], counters)


def collide_points(
    node_a: BshNode,
    node_b: BshNode,
    query: CollisionQuery,
    report: CollisionReport | None = None,
) -> CollisionReport:
    """Point-level recursion from a node pair of two point-level trees."""
    first_hit = _check_mode(query.mode)
    largest_first = _check_descent(query.descent)
    m = query.m_b_from_a
    ta, tb = node_a.tree, node_b.tree
    counters = np.zeros(4, dtype=np.int64)
    contacts = np.empty((16, 2), dtype=np.int64)
    stack = np.empty((256, 2), dtype=np.int64)
    found, contacts, n, _ = _points_pass(
        ta.centers, ta.radii, ta.child_start, ta.child_count, ta.payloads,
        tb.centers, tb.radii, tb.child_start, tb.child_count, tb.payloads,
        node_a.index, node_b.index,
        m.rotation, m.translation, m.scale,
        first_hit, largest_first,
        counters, contacts, 0, stack,
    )
    return _merge_report(report, bool(found), contacts[:n], counters)


def _merge_report(
    report: CollisionReport | None,
    found: bool,
    pairs: np.ndarray,
    counters: np.ndarray,
) -> CollisionReport:
    if report is None:
        return CollisionReport(colliding=found, contact_pairs=pairs.copy(), stats=_stats_from(counters))
    report.colliding = report.colliding or found
    report.contact_pairs = np.concatenate([report.contact_pairs, pairs], axis=0)
    report.stats.sphere_updates += int(counters[0])
    report.stats.sphere_tests += int(counters[1])
    report.stats.leaf_pair_tests += int(counters[2])
    report.stats.partitions_pruned += int(counters[3])
    return report
