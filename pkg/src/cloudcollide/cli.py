"""Command-line interface.

Subcommands: ``bench`` (walkthrough + degree sweep), ``collide`` (one-shot
pair query), ``stats`` (model/tree statistics), ``check`` (randomized
cross-check of the hierarchy engine against the brute-force oracle), and
``gen`` (write the synthetic demo scenes and paths).

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import synthetic
from .bsh import tree_stats
from .collision import CollisionQuery, build_model, collide, model_memory_bytes
from .geometry import RigidTransform, rotation_from_quaternion
from .oracle import brute_force_collide
from .pointcloud import nearest_neighbor_stats

USAGE_ERROR = 1
DATA_ERROR = 2
INTERNAL_ERROR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--degree", type=int, default=10, help="hierarchy node degree (default 10)")
    p.add_argument("--octree-depth", type=int, default=4, help="octree subdivision depth (default 4)")
    p.add_argument("--max-leaf-points", type=int, default=0,
                   help="adaptive octree: split cells above this count (0 = fixed depth)")
    p.add_argument("--point-radius", type=float, default=None,
                   help="override the collision radius instead of deriving it from spacing")
    p.add_argument("--radius-mode", choices=["global", "per-point"], default="global")


def _prepare(path, args, name=None):
    return bench_mod.prepare_cloud(path, args.point_radius, args.radius_mode, name=name)


def _build(path, args, name=None):
    return build_model(_prepare(path, args, name), args.degree, args.octree_depth, args.max_leaf_points)


def _parse_transform(text: str) -> RigidTransform:
    parts = text.split()
    if len(parts) != 7:
        raise ValueError(f"transform must be 'tx ty tz qx qy qz qw' (7 numbers), got {len(parts)}")
    vals = [float(p) for p in parts]
    return RigidTransform(rotation_from_quaternion(vals[3:7]), vals[0:3])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_bench(args) -> int:
    cfg = bench_mod.BenchConfig(
        scene=Path(args.scene),
        avatar=Path(args.avatar),
        path=Path(args.path),
        degrees=args.degrees,
        octree_depth=args.octree_depth,
        grid_n=args.grid_n,
        engine=args.engine,
        mode=args.mode,
        reps=args.reps,
        rate=args.rate,
        stride=args.stride,
        out_dir=Path(args.out_dir) if args.out_dir else None,
        point_radius=args.point_radius,
        radius_mode=args.radius_mode,
        max_leaf_points=args.max_leaf_points,
        orient=args.orient,
        descent=args.descent,
    )
    records_by_degree, summaries = bench_mod.run_walkthrough(cfg)
    for line in bench_mod.summary_csv_lines(summaries):
        print(line)
    first = next(iter(records_by_degree.values()))
    colliding = sum(r.colliding for r in first)
    print(f"# frames={len(first)} colliding={colliding}")
    if cfg.out_dir is not None:
        for p in bench_mod.emit_csv(records_by_degree, summaries, cfg.out_dir):
            print(f"# wrote {p}")
    return 0


def _cmd_collide(args) -> int:
    a = _build(args.a, args)
    b = _build(args.b, args)
    m = _parse_transform(args.transform)
    if args.engine == "bsh":
        report = collide(
            CollisionQuery(a, b, m, mode=args.mode, orient=args.orient, descent=args.descent)
        )
    else:
        report = brute_force_collide(a.cloud, b.cloud, m, mode=args.mode)
    s = report.stats
    print(f"colliding={report.colliding}")
    print(
        f"sphere_updates={s.sphere_updates} sphere_tests={s.sphere_tests} "
        f"leaf_pair_tests={s.leaf_pair_tests} partitions_pruned={s.partitions_pruned}"
    )
    if args.mode == "all_pairs":
        print(f"contact_pairs={report.contact_pairs.shape[0]}")
    return 0


def _cmd_stats(args) -> int:
    cloud = _prepare(args.model, args)
    model = build_model(cloud, args.degree, args.octree_depth, args.max_leaf_points)
    print(f"model={cloud.name} points={len(cloud)} point_radius={cloud.point_radius}")
    if args.point_radius is None:
        st = nearest_neighbor_stats(cloud)
        print(
            f"nn mean={st.mean_nn_distance} min={st.min_nn_distance} "
            f"max={st.max_nn_distance} duplicates={st.duplicate_count}"
        )
    pt = tree_stats(model.partition_tree)
    print(f"partitions={model.octree.partition_count} octree_depth={model.octree.max_depth}")
    print(
        f"partition_tree height={pt.height} nodes={pt.node_count} "
        f"leaves={pt.leaf_count} bytes={pt.memory_bytes}"
    )
    heights = [t.height for t in model.point_trees]
    nodes = sum(t.node_count for t in model.point_trees)
    print(
        f"point_trees count={len(heights)} height_min={min(heights)} "
        f"height_max={max(heights)} nodes={nodes}"
    )
    print(f"model_memory_bytes={model_memory_bytes(model)}")
    return 0


def _cmd_check(args) -> int:
    a = _build(args.a, args)
    b = _build(args.b, args)
    rng = np.random.default_rng(args.seed)
    ca = a.cloud.points.mean(axis=0)
    cb = b.cloud.points.mean(axis=0)
    reach_a = float(np.linalg.norm(a.cloud.points - ca, axis=1).max()) + float(a.cloud.radii_array().max())
    reach_b = float(np.linalg.norm(b.cloud.points - cb, axis=1).max()) + float(b.cloud.radii_array().max())
    regimes = (0.35, 0.7, 0.95, 1.0, 1.05, 1.4, 2.0)  # overlap .. tangent .. disjoint
    mismatches = 0
    for trial in range(args.trials):
        quat = rng.normal(size=4)
        rot = rotation_from_quaternion(quat)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        lam = regimes[trial % len(regimes)] * (0.9 + 0.2 * rng.random())
        t = cb - rot @ ca + lam * (reach_a + reach_b) * direction
        m = RigidTransform(rot, t)
        got = collide(CollisionQuery(a, b, m, mode="boolean"))
        want = brute_force_collide(a.cloud, b.cloud, m, mode="boolean")
        ok = got.colliding == want.colliding
        if ok and args.mode == "all_pairs":
            got_pairs = collide(CollisionQuery(a, b, m, mode="all_pairs")).contact_pairs
            want_pairs = brute_force_collide(a.cloud, b.cloud, m, mode="all_pairs").contact_pairs
            ok = set(map(tuple, got_pairs)) == set(map(tuple, want_pairs))
        if not ok:
            mismatches += 1
            print(f"MISMATCH trial={trial} engine={got.colliding} oracle={want.colliding}")
    print(f"checked {args.trials} trials, {mismatches} mismatches")
    if mismatches:
        raise RuntimeError(f"{mismatches} engine/oracle mismatches")
    return 0


def _cmd_gen(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.scale == "desk":
        spacing, avatar_points = 0.049, 3617
    else:
        spacing, avatar_points = 0.15, 600
    from .pointcloud import save_xyz

    scene = synthetic.facade_cloud(spacing=spacing)
    avatar = synthetic.avatar_cloud(n_points=avatar_points)
    save_xyz(scene, out / "facade.xyz")
    save_xyz(avatar, out / "avatar.xyz")
    bench_mod.save_path(synthetic.doorway_path(), out / "doorway_path.txt")
    bench_mod.save_path(synthetic.wall_skim_path(), out / "skim_path.txt")
    bench_mod.save_path(synthetic.wall_collision_path(), out / "collision_path.txt")
    print(f"wrote facade.xyz ({len(scene)} pts), avatar.xyz ({len(avatar)} pts) and 3 paths to {out}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cloudcollide", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", parents=[], help="scripted walkthrough benchmark / degree sweep")
    p.add_argument("--scene", required=True)
    p.add_argument("--avatar", required=True)
    p.add_argument("--path", required=True)
    p.add_argument("--degrees", type=_int_list, default=(10,), help="comma-separated, e.g. 4,6,8,10")
    p.add_argument("--octree-depth", type=int, default=4)
    p.add_argument("--grid-n", type=int, default=1)
    p.add_argument("--engine", choices=["bsh", "brute"], default="bsh")
    p.add_argument("--mode", choices=["boolean", "all_pairs"], default="boolean")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--rate", type=float, default=30.0, help="poses per second (default 30)")
    p.add_argument("--stride", type=int, default=1, help="evaluate every Nth frame")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--point-radius", type=float, default=None)
    p.add_argument("--radius-mode", choices=["global", "per-point"], default="global")
    p.add_argument("--max-leaf-points", type=int, default=0)
    p.add_argument("--orient", choices=["auto", "as_given"], default="auto")
    p.add_argument("--descent", choices=["verbatim", "largest_first"], default="verbatim",
                   help="inner-node expansion rule (verbatim = reference semantics)")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("collide", help="one-shot pair query")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--transform", default="0 0 0 0 0 0 1", help="'tx ty tz qx qy qz qw'")
    p.add_argument("--mode", choices=["boolean", "all_pairs"], default="boolean")
    p.add_argument("--engine", choices=["bsh", "brute"], default="bsh")
    p.add_argument("--orient", choices=["auto", "as_given"], default="auto")
    p.add_argument("--descent", choices=["verbatim", "largest_first"], default="verbatim")
    _add_model_args(p)
    p.set_defaults(func=_cmd_collide)

    p = sub.add_parser("stats", help="spacing and tree statistics for one model")
    p.add_argument("--model", required=True)
    _add_model_args(p)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("check", help="randomized engine-vs-oracle cross check")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["boolean", "all_pairs"], default="all_pairs",
                   help="all_pairs also compares the contact-pair sets")
    _add_model_args(p)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("gen", help="write synthetic demo scenes and paths")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--scale", choices=["desk", "small"], default="desk",
                   help="desk: ~50k scene / 3617-pt avatar; small: ~5k / 600")
    p.set_defaults(func=_cmd_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR
    except (RuntimeError, AssertionError) as e:
        print(f"internal error: {e}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
