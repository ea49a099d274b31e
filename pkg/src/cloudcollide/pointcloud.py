"""Point-cloud models: loading, spacing statistics, collision radius.

A model's collision radius is half its mean nearest-neighbor distance, so
the point spheres of a sparsely sampled surface still touch and surface
contact stays detectable. Exact duplicate points (zero spacing, common in
scan data) are counted separately and excluded from the statistics so they
cannot zero the radius.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

# grid index sizing: aim for about this many points per occupied cell
_TARGET_PER_CELL = 8.0
_MAX_CELLS_PER_AXIS = 1024


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Points in the model's local frame plus the per-model collision radius.

    ``point_radius`` is None until assigned (see assign_radius). In
    per-point radius mode ``per_point_radii`` holds one radius per point and
    ``point_radius`` keeps the model-average for reporting.
    """

    points: np.ndarray
    name: str = "cloud"
    point_radius: float | None = None
    per_point_radii: np.ndarray | None = None

    def __post_init__(self) -> None:
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be an (n, 3) array, got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise ValueError("no points")
        if not np.all(np.isfinite(pts)):
            bad = int(np.flatnonzero(~np.isfinite(pts).all(axis=1))[0])
            raise ValueError(f"point {bad} is not finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.point_radius is not None:
            r = float(self.point_radius)
            if not (np.isfinite(r) and r > 0.0):
                raise ValueError(f"point_radius must be > 0, got {self.point_radius}")
            object.__setattr__(self, "point_radius", r)
        if self.per_point_radii is not None:
            rr = np.ascontiguousarray(np.asarray(self.per_point_radii, dtype=np.float64))
            if rr.shape != (pts.shape[0],):
                raise ValueError("per_point_radii must have one entry per point")
            if not np.all(np.isfinite(rr) & (rr > 0.0)):
                raise ValueError("per_point_radii must all be > 0")
            rr.setflags(write=False)
            object.__setattr__(self, "per_point_radii", rr)

    def __len__(self) -> int:
        return self.points.shape[0]

    def radii_array(self) -> np.ndarray:
        """(n,) radius per point; requires an assigned radius."""
        if self.per_point_radii is not None:
            return self.per_point_radii
        if self.point_radius is None:
            raise ValueError(f"cloud '{self.name}' has no point radius assigned")
        return np.full(len(self), self.point_radius)


@dataclass(frozen=True, eq=False)
class SpacingStats:
    """Nearest-neighbor distance statistics over a cloud.

    Exact-zero neighbor distances (duplicated points) are excluded from
    mean/min/max and reported in ``duplicate_count``. ``nn_distances``
    keeps the raw per-point distances (zeros included) for per-point
    radius assignment.
    """

    mean_nn_distance: float
    min_nn_distance: float
    max_nn_distance: float
    duplicate_count: int = 0
    nn_distances: np.ndarray | None = field(default=None, repr=False)


def spacing_from_distances(nn: np.ndarray) -> SpacingStats:
    """Aggregate per-point nearest-neighbor distances into SpacingStats."""
    nn = np.asarray(nn, dtype=np.float64)
    positive = nn[nn > 0.0]
    duplicates = int(nn.size - positive.size)
    if positive.size == 0:
        raise ValueError("spacing undefined: all points coincide")
    return SpacingStats(
        mean_nn_distance=float(np.mean(positive)),
        min_nn_distance=float(np.min(positive)),
        max_nn_distance=float(np.max(positive)),
        duplicate_count=duplicates,
        nn_distances=nn,
    )


def nearest_neighbor_stats(cloud: PointCloud) -> SpacingStats:
    """Distance from each point to its closest other point, aggregated.

    Backed by a uniform grid index with an expanding ring search, so the
    result is exactly the same function of the input as the brute-force
    reference (same per-pair arithmetic, min taken over squared distances).
    """
    if len(cloud) < 2:
        raise ValueError("spacing undefined: need at least 2 points")
    nn = grid_nearest_neighbor_distances(cloud.points)
    return spacing_from_distances(nn)


def assign_radius(
    cloud: PointCloud,
    stats: SpacingStats,
    mode: Literal["global", "per-point"] = "global",
) -> PointCloud:
    """New cloud with collision radius = mean nearest-neighbor distance / 2.

    In per-point mode each point gets half its own neighbor distance;
    duplicated points (zero spacing) fall back to the global value.
    """
    r = stats.mean_nn_distance / 2.0
    if mode == "global":
        return PointCloud(cloud.points, name=cloud.name, point_radius=r)
    if mode == "per-point":
        if stats.nn_distances is None:
            raise ValueError("per-point mode requires stats with nn_distances")
        radii = np.where(stats.nn_distances > 0.0, stats.nn_distances / 2.0, r)
        return PointCloud(cloud.points, name=cloud.name, point_radius=r, per_point_radii=radii)
    raise ValueError(f"unknown radius mode {mode!r} (expected 'global' or 'per-point')")


def with_radius(cloud: PointCloud, radius: float) -> PointCloud:
    """Explicit radius override (required for degenerate clouds)."""
    return PointCloud(cloud.points, name=cloud.name, point_radius=radius)


# ---------------------------------------------------------------------------
# grid-indexed nearest neighbor
# ---------------------------------------------------------------------------


def grid_nearest_neighbor_distances(points: np.ndarray) -> np.ndarray:
    """(n,) distance to the closest other point for each point.

    Uniform-grid candidate search with a correctness guarantee: a point's
    search stops at Chebyshev cell ring K only once its best candidate is
    within K * (smallest cell width), beyond which no closer point can
    exist. Distances are compared as squared values and square-rooted once
    at the end, matching the brute-force reference bit for bit.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    ext = hi - lo
    positive = ext[ext > 0.0]
    if positive.size == 0:
        return np.zeros(n)

    h = float((np.prod(positive) * _TARGET_PER_CELL / n) ** (1.0 / positive.size))
    ncells = np.ones(3, dtype=np.int64)
    mask = ext > 0.0
    ncells[mask] = np.clip(np.ceil(ext[mask] / h).astype(np.int64), 1, _MAX_CELLS_PER_AXIS)
    width = np.where(mask, ext / ncells, 1.0)
    min_width = float(width[mask].min())

    idx = np.zeros((n, 3), dtype=np.int64)
    for axis in range(3):
        if mask[axis]:
            idx[:, axis] = np.clip(
                ((pts[:, axis] - lo[axis]) / width[axis]).astype(np.int64), 0, ncells[axis] - 1
            )
    lin = (idx[:, 0] * ncells[1] + idx[:, 1]) * ncells[2] + idx[:, 2]
    order = np.argsort(lin, kind="stable")
    sorted_lin = lin[order]
    starts = np.flatnonzero(np.r_[True, sorted_lin[1:] != sorted_lin[:-1]])
    ends = np.r_[starts[1:], n]
    cell_members: dict[int, np.ndarray] = {
        int(sorted_lin[s]): order[s:e] for s, e in zip(starts, ends)
    }

    def neighbors(cell: np.ndarray, ring: int) -> list[np.ndarray]:
        """Member index arrays of cells at Chebyshev distance exactly `ring`."""
        found = []
        rng = range(-ring, ring + 1)
        for dx in rng:
            cx = cell[0] + dx
            if cx < 0 or cx >= ncells[0]:
                continue
            for dy in rng:
                cy = cell[1] + dy
                if cy < 0 or cy >= ncells[1]:
                    continue
                for dz in rng:
                    if max(abs(dx), abs(dy), abs(dz)) != ring:
                        continue
                    cz = cell[2] + dz
                    if cz < 0 or cz >= ncells[2]:
                        continue
                    key = int((cx * ncells[1] + cy) * ncells[2] + cz)
                    members = cell_members.get(key)
                    if members is not None:
                        found.append(members)
        return found

    best = np.full(n, np.inf)

    def consider(query_idx: np.ndarray, cand_idx: np.ndarray) -> None:
        qp = pts[query_idx]
        cp = pts[cand_idx]
        dx = qp[:, 0][:, None] - cp[:, 0][None, :]
        d2 = dx * dx
        dy = qp[:, 1][:, None] - cp[:, 1][None, :]
        d2 += dy * dy
        dz = qp[:, 2][:, None] - cp[:, 2][None, :]
        d2 += dz * dz
        d2[query_idx[:, None] == cand_idx[None, :]] = np.inf
        best[query_idx] = np.minimum(best[query_idx], d2.min(axis=1))

    # first pass: each cell against its 27-cell neighborhood
    for s, e in zip(starts, ends):
        members = order[s:e]
        cell = idx[members[0]]
        cands = [members] + neighbors(cell, 1)
        consider(members, np.concatenate(cands))

    # stragglers: expand rings until the guarantee holds
    unresolved = np.flatnonzero(best > (min_width * min_width))
    max_ring = int(ncells.max())
    for q in unresolved:
        cell = idx[q]
        qarr = np.array([q])
        ring = 2
        # rings <= ring-1 already searched: stop once best <= ((ring-1)*min_width)^2
        while best[q] > ((ring - 1) * min_width) ** 2 and ring <= max_ring:
            shells = neighbors(cell, ring)
            if shells:
                consider(qarr, np.concatenate(shells))
            ring += 1

    return np.sqrt(best)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

CloudFormat = Literal["xyz", "ply_ascii"]


def load_cloud(path, fmt: CloudFormat | None = None, name: str | None = None) -> PointCloud:
    """Load a cloud from disk; format from the extension unless given.

    Supported: whitespace-separated XYZ (one point per line, extra columns
    ignored, '#' comments) and ASCII PLY with x/y/z as the first three
    vertex properties. The radius is left unassigned.
    """
    path = Path(path)
    if fmt is None:
        fmt = "ply_ascii" if path.suffix.lower() == ".ply" else "xyz"
    if fmt == "xyz":
        points = _parse_xyz(path)
    elif fmt == "ply_ascii":
        points = _parse_ply_ascii(path)
    else:
        raise ValueError(f"unknown cloud format {fmt!r} (expected 'xyz' or 'ply_ascii')")
    return PointCloud(points, name=name or path.stem)


def _parse_xyz(path: Path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) < 3:
                raise ValueError(f"{path}: line {lineno}: expected at least 3 columns, got {len(parts)}")
            try:
                rows.append((float(parts[0]), float(parts[1]), float(parts[2])))
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed coordinate in {text!r}") from None
    if not rows:
        raise ValueError(f"{path}: no points")
    return np.array(rows, dtype=np.float64)


def _parse_ply_ascii(path: Path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ValueError(f"{path}: not a PLY file (missing 'ply' magic)")

    elements: list[tuple[str, int]] = []  # declaration order
    vertex_props: list[str] = []
    header_end = None
    current_element = None
    for i, raw in enumerate(lines[1:], start=2):
        tokens = raw.strip().split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise ValueError(f"{path}: line {i}: only 'format ascii' PLY is supported")
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise ValueError(f"{path}: line {i}: malformed element declaration")
            current_element = tokens[1]
            try:
                count = int(tokens[2])
            except ValueError:
                raise ValueError(f"{path}: line {i}: bad element count {tokens[2]!r}") from None
            elements.append((current_element, count))
        elif tokens[0] == "property":
            if current_element == "vertex" and tokens[1] != "list":
                vertex_props.append(tokens[-1])
        elif tokens[0] == "end_header":
            header_end = i
            break
    if header_end is None:
        raise ValueError(f"{path}: missing end_header")
    counts = dict(elements)
    if "vertex" not in counts:
        raise ValueError(f"{path}: no 'element vertex' in header")
    if vertex_props[:3] != ["x", "y", "z"]:
        raise ValueError(f"{path}: vertex properties must start with x, y, z (got {vertex_props[:3]})")
    if counts["vertex"] == 0:
        raise ValueError(f"{path}: no points")

    points = np.empty((counts["vertex"], 3), dtype=np.float64)
    cursor = header_end  # 0-based index into `lines` of the first data line
    for element_name, count in elements:
        if element_name == "vertex":
            for k in range(count):
                lineno = cursor + k + 1
                if cursor + k >= len(lines):
                    raise ValueError(f"{path}: line {lineno}: file ends before all vertices are read")
                parts = lines[cursor + k].split()
                if len(parts) < 3:
                    raise ValueError(f"{path}: line {lineno}: expected at least 3 vertex values")
                try:
                    points[k, 0] = float(parts[0])
                    points[k, 1] = float(parts[1])
                    points[k, 2] = float(parts[2])
                except ValueError:
                    raise ValueError(f"{path}: line {lineno}: malformed vertex coordinate") from None
        cursor += count
    return points


def save_xyz(cloud: PointCloud | np.ndarray, path) -> None:
    """Write points as XYZ text; coordinates round-trip exactly (repr)."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in pts:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
