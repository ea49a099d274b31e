"""Brute-force reference implementations.

Ground truth for the hierarchy engine and the spacing pipeline: all-pairs
scans with no spatial index and no pruning. The only code shared with the
main path is the geometry layer (the point transform and the inclusive
overlap rule), so a disagreement isolates a hierarchy bug rather than a
metric bug. Per-pair arithmetic deliberately mirrors the traversal
kernels' evaluation order, making borderline (tangent) comparisons
bit-identical.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .collision import CollisionReport, QueryMode, TraversalStats
from .geometry import RigidTransform
from .pointcloud import PointCloud, SpacingStats, spacing_from_distances

_PAIR_BLOCK = 4_000_000  # pairs per vectorized chunk (nn scan)


@njit(cache=True)
def _all_pairs_scan(pa, ra, pb, rb, first_hit, contacts):
    """Row-major scan of every (i, j) pair; returns (tested, n_contacts, contacts).

    Each row runs as a branch-free minimum reduction (so it vectorizes);
    only rows containing a hit are rescanned to record pairs with the
    exact inclusive comparison. ``tested`` counts pairs in row-major order
    up to and including the first hit in boolean mode.
    """
    tested = 0
    n_contacts = 0
    nb = pb.shape[0]
    for i in range(pa.shape[0]):
        xi = pa[i, 0]
        yi = pa[i, 1]
        zi = pa[i, 2]
        ri = ra[i]
        best = np.inf
        for j in range(nb):
            dx = xi - pb[j, 0]
            dy = yi - pb[j, 1]
            dz = zi - pb[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            rr = ri + rb[j]
            s = d2 - rr * rr  # sign-exact filter: s <= 0 whenever d2 <= rr*rr
            best = min(best, s)
        if best <= 0.0:
            for j in range(nb):
                dx = xi - pb[j, 0]
                dy = yi - pb[j, 1]
                dz = zi - pb[j, 2]
                d2 = dx * dx + dy * dy + dz * dz
                rr = ri + rb[j]
                if d2 <= rr * rr:
                    if n_contacts == contacts.shape[0]:
                        grown = np.empty((contacts.shape[0] * 2, 2), np.int64)
                        grown[:n_contacts] = contacts
                        contacts = grown
                    contacts[n_contacts, 0] = i
                    contacts[n_contacts, 1] = j
                    n_contacts += 1
                    if first_hit:
                        return tested + j + 1, n_contacts, contacts
        tested += nb
    return tested, n_contacts, contacts


def brute_force_collide(
    a: PointCloud,
    b: PointCloud,
    m_b_from_a: RigidTransform,
    mode: QueryMode = "boolean",
) -> CollisionReport:
    """Test all n_a x n_b point-sphere pairs; no hierarchy involved.

    A's points move into B's frame first. In boolean mode the scan stops
    at the first overlapping pair (row-major pair order); in all_pairs
    mode every overlapping pair is collected. Counter semantics: one
    sphere update per A point transformed, one sphere test per pair
    evaluated.
    """
    if mode not in ("boolean", "all_pairs"):
        raise ValueError(f"unknown query mode {mode!r} (expected 'boolean' or 'all_pairs')")
    pa = m_b_from_a.apply_points(a.points)
    ra = a.radii_array() * m_b_from_a.scale
    pb = b.points
    rb = b.radii_array()

    contacts = np.empty((16, 2), dtype=np.int64)
    tested, n_contacts, contacts = _all_pairs_scan(
        pa, ra, pb, rb, mode == "boolean", contacts
    )
    pairs = contacts[:n_contacts].copy()
    stats = TraversalStats(
        sphere_updates=pa.shape[0],
        sphere_tests=tested,
        leaf_pair_tests=tested,
        partitions_pruned=0,
    )
    return CollisionReport(colliding=n_contacts > 0, contact_pairs=pairs, stats=stats)


def brute_force_nn(cloud: PointCloud) -> SpacingStats:
    """Exact O(n^2) nearest-neighbor distances, aggregated like the indexed path."""
    if len(cloud) < 2:
        raise ValueError("spacing undefined: need at least 2 points")
    nn = brute_force_nn_distances(cloud.points)
    return spacing_from_distances(nn)


def brute_force_nn_distances(points: np.ndarray) -> np.ndarray:
    """(n,) distance from each point to its closest other point, all-pairs."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    chunk = max(1, _PAIR_BLOCK // n)
    best = np.empty(n)
    for s in range(0, n, chunk):
        e = min(s + chunk, n)
        dx = pts[s:e, 0][:, None] - pts[:, 0][None, :]
        d2 = dx * dx
        dy = pts[s:e, 1][:, None] - pts[:, 1][None, :]
        d2 += dy * dy
        dz = pts[s:e, 2][:, None] - pts[:, 2][None, :]
        d2 += dz * dz
        d2[np.arange(s, e) - s, np.arange(s, e)] = np.inf  # exclude self
        best[s:e] = d2.min(axis=1)
    return np.sqrt(best)
