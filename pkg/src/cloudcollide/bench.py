"""Scripted-walkthrough benchmark and degree-sweep harness.

Replays a keyframed pose path for a moving model against a static scene,
timing one collision query per sampled pose and recording the traversal
counters. A degree sweep rebuilds both models' hierarchies from scratch
per degree and emits one summary row each, plus a per-frame CSV.

Counters are deterministic for a given configuration; timings are not,
so two runs of the same config must agree on every column except
``query_ns``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .collision import (
    CollisionModel,
    CollisionQuery,
    QueryMode,
    build_model,
    collide,
    model_memory_bytes,
)
from .geometry import Aabb, RigidTransform, rotation_from_quaternion
from .oracle import brute_force_collide
from .pointcloud import (
    PointCloud,
    assign_radius,
    load_cloud,
    nearest_neighbor_stats,
    with_radius,
)
from .spatial import VoxelGrid, build_voxel_grid

Engine = Literal["bsh", "brute"]

FRAME_CSV_HEADER = "frame,t,colliding,query_ns,sphere_tests,sphere_updates,leaf_pair_tests,partitions_pruned"
SUMMARY_CSV_HEADER = "degree,mean_query_ns,p95_query_ns,peak_tree_bytes,build_ms"


# ---------------------------------------------------------------------------
# path scripts
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PathScript:
    """Keyframed pose path: strictly increasing times, unit quaternions."""

    times: np.ndarray
    translations: np.ndarray
    quaternions: np.ndarray  # (k, 4) xyzw
    rate: float = 30.0

    def __post_init__(self) -> None:
        t = np.ascontiguousarray(np.asarray(self.times, dtype=np.float64))
        tr = np.ascontiguousarray(np.asarray(self.translations, dtype=np.float64))
        q = np.ascontiguousarray(np.asarray(self.quaternions, dtype=np.float64))
        if t.ndim != 1 or t.size < 2:
            raise ValueError("path needs at least 2 keyframes")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("keyframe times must be strictly increasing")
        if tr.shape != (t.size, 3) or q.shape != (t.size, 4):
            raise ValueError("translations must be (k, 3) and quaternions (k, 4)")
        norms = np.sqrt(np.sum(q * q, axis=1))
        if np.any(norms <= 0.0) or not np.all(np.isfinite(norms)):
            raise ValueError("quaternions must be non-zero and finite")
        q = q / norms[:, None]
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(tr))):
            raise ValueError("keyframes must be finite")
        if not (math.isfinite(self.rate) and self.rate > 0.0):
            raise ValueError(f"sampling rate must be > 0, got {self.rate}")
        for arr in (t, tr, q):
            arr.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "translations", tr)
        object.__setattr__(self, "quaternions", q)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def frame_count(self) -> int:
        return max(1, int(math.floor(self.duration * self.rate + 1e-9)))

    def sample_times(self) -> np.ndarray:
        return float(self.times[0]) + np.arange(self.frame_count()) / self.rate

    def keyframe_pose(self, k: int) -> RigidTransform:
        return RigidTransform(
            rotation_from_quaternion(self.quaternions[k]), self.translations[k]
        )


def interpolate_pose(script: PathScript, t: float) -> RigidTransform:
    """Pose at time t: linear translation, shortest-arc quaternion slerp.

    Exact keyframe times return the keyframe pose exactly; t outside the
    keyframe span raises.
    """
    times = script.times
    if t < times[0] or t > times[-1]:
        raise ValueError(f"time {t} outside path range [{times[0]}, {times[-1]}]")
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), times.size - 2)
    if t == times[k]:
        return script.keyframe_pose(k)
    if t == times[k + 1]:
        return script.keyframe_pose(k + 1)
    u = (t - times[k]) / (times[k + 1] - times[k])
    trans = script.translations[k] + u * (script.translations[k + 1] - script.translations[k])
    quat = _slerp(script.quaternions[k], script.quaternions[k + 1], u)
    return RigidTransform(rotation_from_quaternion(quat), trans)


def _slerp(q0: np.ndarray, q1: np.ndarray, u: float) -> np.ndarray:
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    if dot > 1.0 - 1e-12:
        q = q0 + u * (q1 - q0)  # nearly parallel: lerp is exact enough
    else:
        omega = math.acos(min(dot, 1.0))
        so = math.sin(omega)
        q = (math.sin((1.0 - u) * omega) / so) * q0 + (math.sin(u * omega) / so) * q1
    return q / float(np.sqrt(np.dot(q, q)))


def load_path(path, rate: float = 30.0) -> PathScript:
    """Read a path file: lines of ``t tx ty tz qx qy qz qw``, '#' comments."""
    times, translations, quaternions = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 8:
                raise ValueError(f"{path}: line {lineno}: expected 8 fields, got {len(parts)}")
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed number in {text!r}") from None
            times.append(vals[0])
            translations.append(vals[1:4])
            quaternions.append(vals[4:8])
    if len(times) < 2:
        raise ValueError(f"{path}: path needs at least 2 keyframes")
    return PathScript(
        times=np.array(times),
        translations=np.array(translations),
        quaternions=np.array(quaternions),
        rate=rate,
    )


def save_path(script: PathScript, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# t tx ty tz qx qy qz qw\n")
        for t, tr, q in zip(script.times, script.translations, script.quaternions):
            fields = [t, *tr, *q]
            fh.write(" ".join(repr(float(v)) for v in fields) + "\n")


# ---------------------------------------------------------------------------
# walkthrough benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchConfig:
    scene: Path
    avatar: Path
    path: Path
    degrees: tuple[int, ...] = (10,)
    octree_depth: int = 4
    grid_n: int = 1
    engine: Engine = "bsh"
    mode: QueryMode = "boolean"
    reps: int = 1
    rate: float = 30.0
    stride: int = 1
    out_dir: Path | None = None
    point_radius: float | None = None
    radius_mode: Literal["global", "per-point"] = "global"
    max_leaf_points: int = 0
    orient: Literal["auto", "as_given"] = "auto"
    descent: Literal["verbatim", "largest_first"] = "verbatim"

    def __post_init__(self) -> None:
        if any(d < 2 for d in self.degrees) or not self.degrees:
            raise ValueError("every swept degree must be >= 2")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass(frozen=True)
class FrameRecord:
    frame: int
    t: float
    pose: RigidTransform
    colliding: bool
    query_ns: int
    sphere_tests: int
    sphere_updates: int
    leaf_pair_tests: int
    partitions_pruned: int


@dataclass(frozen=True)
class DegreeSummary:
    degree: int
    mean_query_ns: float
    p95_query_ns: float
    peak_tree_bytes: int
    build_ms: float


def prepare_cloud(
    path,
    point_radius: float | None = None,
    radius_mode: Literal["global", "per-point"] = "global",
    name: str | None = None,
) -> PointCloud:
    """Load a cloud and assign its collision radius.

    Without an explicit override the radius comes from the spacing
    statistics; degenerate clouds (one point, or all points coincident)
    require the override.
    """
    cloud = load_cloud(path, name=name)
    if point_radius is not None:
        return with_radius(cloud, point_radius)
    if len(cloud) < 2:
        raise ValueError(
            f"{cloud.name}: spacing undefined for a single-point cloud; pass --point-radius"
        )
    stats = nearest_neighbor_stats(cloud)
    return assign_radius(cloud, stats, radius_mode)


def scene_voxel_grid(scene: PointCloud, n: int) -> VoxelGrid:
    """Grid over the static scene's padded cube (scene organization only)."""
    bounds = Aabb.from_points(scene.points).padded_to_cube()
    return build_voxel_grid([(scene, RigidTransform.identity())], bounds, n)


def replay_path(
    avatar: CollisionModel,
    scene: CollisionModel,
    script: PathScript,
    engine: Engine = "bsh",
    mode: QueryMode = "boolean",
    reps: int = 1,
    stride: int = 1,
    orient: Literal["auto", "as_given"] = "auto",
    descent: Literal["verbatim", "largest_first"] = "verbatim",
    warmup: bool = True,
) -> list[FrameRecord]:
    """One timed collision query per sampled pose (scene fixed at identity).

    Frames run sequentially; repetitions re-run the same frame and keep
    the fastest time. Counters must agree across repetitions, anything
    else is an internal error. ``warmup`` runs the first pose once
    untimed so one-time JIT loading stays out of the measurements.
    """
    if engine not in ("bsh", "brute"):
        raise ValueError(f"unknown engine {engine!r} (expected 'bsh' or 'brute')")
    records: list[FrameRecord] = []
    times = script.sample_times()
    if warmup and times.size:
        pose = interpolate_pose(script, float(times[0]))
        if engine == "bsh":
            collide(CollisionQuery(avatar, scene, pose, mode=mode, orient=orient, descent=descent))
        else:
            brute_force_collide(avatar.cloud, scene.cloud, pose, mode=mode)
    for k in range(0, times.size, stride):
        t = float(times[k])
        pose = interpolate_pose(script, t)
        report = None
        best_ns = None
        for _ in range(reps):
            start = time.perf_counter_ns()
            if engine == "bsh":
                rep = collide(
                    CollisionQuery(avatar, scene, pose, mode=mode, orient=orient, descent=descent)
                )
            else:
                rep = brute_force_collide(avatar.cloud, scene.cloud, pose, mode=mode)
            elapsed = time.perf_counter_ns() - start
            if report is None:
                report = rep
                best_ns = elapsed
            else:
                if (rep.colliding, rep.stats) != (report.colliding, report.stats):
                    raise RuntimeError(
                        f"internal error: counters changed between repetitions at frame {k}"
                    )
                best_ns = min(best_ns, elapsed)
        records.append(
            FrameRecord(
                frame=k,
                t=t,
                pose=pose,
                colliding=report.colliding,
                query_ns=int(best_ns),
                sphere_tests=report.stats.sphere_tests,
                sphere_updates=report.stats.sphere_updates,
                leaf_pair_tests=report.stats.leaf_pair_tests,
                partitions_pruned=report.stats.partitions_pruned,
            )
        )
    return records


def summarize(records: Sequence[FrameRecord], degree: int, peak_tree_bytes: int, build_ms: float) -> DegreeSummary:
    query_ns = np.array([r.query_ns for r in records], dtype=np.float64)
    return DegreeSummary(
        degree=degree,
        mean_query_ns=float(query_ns.mean()),
        p95_query_ns=float(np.percentile(query_ns, 95)),
        peak_tree_bytes=peak_tree_bytes,
        build_ms=build_ms,
    )


def run_walkthrough(cfg: BenchConfig) -> tuple[dict[int, list[FrameRecord]], list[DegreeSummary]]:
    """Full benchmark: load, build per degree, replay, summarize.

    The brute engine has no trees and ignores the sweep (one pass,
    reported as degree 0).
    """
    scene_cloud = prepare_cloud(cfg.scene, cfg.point_radius, cfg.radius_mode)
    avatar_cloud = prepare_cloud(cfg.avatar, cfg.point_radius, cfg.radius_mode)
    script = load_path(cfg.path, rate=cfg.rate)
    scene_voxel_grid(scene_cloud, cfg.grid_n)  # validates scene containment

    records_by_degree: dict[int, list[FrameRecord]] = {}
    summaries: list[DegreeSummary] = []
    if cfg.engine == "brute":
        avatar = CollisionModel(cloud=avatar_cloud)
        scene = CollisionModel(cloud=scene_cloud)
        records = replay_path(
            avatar, scene, script, engine="brute", mode=cfg.mode, reps=cfg.reps, stride=cfg.stride
        )
        records_by_degree[0] = records
        summaries.append(summarize(records, 0, 0, 0.0))
        return records_by_degree, summaries

    for degree in cfg.degrees:
        start = time.perf_counter()
        avatar = build_model(avatar_cloud, degree, cfg.octree_depth, cfg.max_leaf_points)
        scene = build_model(scene_cloud, degree, cfg.octree_depth, cfg.max_leaf_points)
        build_ms = (time.perf_counter() - start) * 1e3
        peak = model_memory_bytes(avatar) + model_memory_bytes(scene)
        records = replay_path(
            avatar,
            scene,
            script,
            engine="bsh",
            mode=cfg.mode,
            reps=cfg.reps,
            stride=cfg.stride,
            orient=cfg.orient,
            descent=cfg.descent,
        )
        records_by_degree[degree] = records
        summaries.append(summarize(records, degree, peak, build_ms))
    return records_by_degree, summaries


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def frame_csv_lines(records: Sequence[FrameRecord]) -> list[str]:
    lines = [FRAME_CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.frame},{r.t!r},{int(r.colliding)},{r.query_ns},"
            f"{r.sphere_tests},{r.sphere_updates},{r.leaf_pair_tests},{r.partitions_pruned}"
        )
    return lines


def summary_csv_lines(summaries: Sequence[DegreeSummary]) -> list[str]:
    lines = [SUMMARY_CSV_HEADER]
    for s in summaries:
        lines.append(
            f"{s.degree},{s.mean_query_ns!r},{s.p95_query_ns!r},{s.peak_tree_bytes},{s.build_ms!r}"
        )
    return lines


def emit_csv(
    records_by_degree: dict[int, list[FrameRecord]],
    summaries: Sequence[DegreeSummary],
    out_dir,
) -> list[Path]:
    """Write frames_deg<D>.csv per degree plus summary.csv; returns the paths."""
    if not records_by_degree:
        raise ValueError("no records to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for degree, records in records_by_degree.items():
        p = out / f"frames_deg{degree}.csv"
        p.write_text("\n".join(frame_csv_lines(records)) + "\n", encoding="utf-8")
        written.append(p)
    p = out / "summary.csv"
    p.write_text("\n".join(summary_csv_lines(summaries)) + "\n", encoding="utf-8")
    written.append(p)
    return written
