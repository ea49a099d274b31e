"""Collision detection for 3D point-cloud models.

Pipeline: load a cloud, derive its collision radius from point spacing,
segment it with an octree, build packed bounding-sphere hierarchies over
the partitions and over each partition's points, then answer pairwise
queries by a simultaneous traversal of both objects' trees.
"""

from .bench import (
    BenchConfig,
    DegreeSummary,
    FrameRecord,
    PathScript,
    emit_csv,
    interpolate_pose,
    load_path,
    prepare_cloud,
    replay_path,
    run_walkthrough,
    save_path,
)
from .bsh import (
    Bsh,
    BshNode,
    TreeStats,
    build_partition_bsh,
    build_point_bsh,
    load_bsh,
    save_bsh,
    tree_stats,
    validate_bsh,
)
from .collision import (
    CollisionModel,
    CollisionQuery,
    CollisionReport,
    TraversalStats,
    build_model,
    collide,
    collide_partitions,
    collide_points,
    model_memory_bytes,
)
from .geometry import (
    Aabb,
    Point3,
    RigidTransform,
    Sphere,
    compose,
    invert,
    merge_spheres,
    spheres_overlap,
    transform_sphere,
)
from .oracle import brute_force_collide, brute_force_nn
from .pointcloud import (
    PointCloud,
    SpacingStats,
    assign_radius,
    load_cloud,
    nearest_neighbor_stats,
    save_xyz,
    with_radius,
)
from .spatial import Octree, Partition, VoxelGrid, build_octree, build_voxel_grid

__version__ = "0.1.0"

__all__ = [
    "Aabb",
    "BenchConfig",
    "Bsh",
    "BshNode",
    "CollisionModel",
    "CollisionQuery",
    "CollisionReport",
    "DegreeSummary",
    "FrameRecord",
    "Octree",
    "Partition",
    "PathScript",
    "Point3",
    "PointCloud",
    "RigidTransform",
    "SpacingStats",
    "Sphere",
    "TraversalStats",
    "TreeStats",
    "VoxelGrid",
    "assign_radius",
    "brute_force_collide",
    "brute_force_nn",
    "build_model",
    "build_octree",
    "build_partition_bsh",
    "build_point_bsh",
    "build_voxel_grid",
    "collide",
    "collide_partitions",
    "collide_points",
    "compose",
    "emit_csv",
    "interpolate_pose",
    "invert",
    "load_bsh",
    "load_cloud",
    "load_path",
    "merge_spheres",
    "model_memory_bytes",
    "nearest_neighbor_stats",
    "prepare_cloud",
    "replay_path",
    "run_walkthrough",
    "save_bsh",
    "save_path",
    "save_xyz",
    "spheres_overlap",
    "transform_sphere",
    "tree_stats",
    "validate_bsh",
    "with_radius",
]
