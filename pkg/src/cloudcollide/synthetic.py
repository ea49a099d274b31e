"""Deterministic synthetic scenes and walkthrough paths.

Ships the benchmark inputs: a flat facade wall with a doorway opening
(uniform grid sampling) and a capsule-surface avatar with an exact point
count. The three scripted paths cover the walkthrough scenarios: a
doorway transit, a wall-skimming pass, and a deliberate wall collision.
Everything is closed-form, no RNG.
"""

from __future__ import annotations

import math

import numpy as np

from .bench import PathScript
from .pointcloud import PointCloud

# wall lives in the x-z plane at y = 0; z is up

FACADE_WIDTH = 20.0
FACADE_HEIGHT = 6.0
DOOR_WIDTH = 0.9
DOOR_HEIGHT = 2.2

AVATAR_HEIGHT = 1.8
AVATAR_RADIUS = 0.25
_WALK_Z = AVATAR_HEIGHT / 2.0  # avatar center height while "walking" at floor level


def facade_cloud(
    spacing: float = 0.049,
    width: float = FACADE_WIDTH,
    height: float = FACADE_HEIGHT,
    door_width: float = DOOR_WIDTH,
    door_height: float = DOOR_HEIGHT,
    name: str = "facade",
) -> PointCloud:
    """Wall-with-doorway grid sample; mean point spacing equals ``spacing``.

    The default spacing yields roughly 50k points. The door opening is
    centered at x = 0, from the floor (z = 0) up to ``door_height``.
    """
    nx = int(round(width / spacing))
    nz = int(round(height / spacing))
    xs = (np.arange(nx) + 0.5) * spacing - width / 2.0
    zs = (np.arange(nz) + 0.5) * spacing
    gx, gz = np.meshgrid(xs, zs, indexing="ij")
    gx = gx.ravel()
    gz = gz.ravel()
    in_door = (np.abs(gx) < door_width / 2.0) & (gz < door_height)
    gx = gx[~in_door]
    gz = gz[~in_door]
    points = np.column_stack([gx, np.zeros_like(gx), gz])
    return PointCloud(points, name=name)


def avatar_cloud(
    n_points: int = 3617,
    height: float = AVATAR_HEIGHT,
    radius: float = AVATAR_RADIUS,
    name: str = "avatar",
) -> PointCloud:
    """Capsule surface sampled with exactly ``n_points`` points.

    Golden-angle spiral over the unrolled surface: a capsule's lateral
    area is linear in the axial coordinate (cylinder and caps alike), so
    uniform steps along [0, height] give uniform area coverage. The local
    origin is the capsule center (z spans +-height/2).
    """
    if height <= 2.0 * radius:
        raise ValueError("capsule height must exceed its diameter")
    cyl = height - 2.0 * radius
    golden = math.pi * (3.0 - math.sqrt(5.0))
    k = np.arange(n_points, dtype=np.float64)
    s = (k + 0.5) / n_points * height  # axial area coordinate in [0, height]
    theta = golden * k

    z = np.empty(n_points)
    rho = np.empty(n_points)
    bottom = s < radius
    top = s > radius + cyl
    middle = ~(bottom | top)
    # bottom cap: sphere centered at z = -cyl/2
    zc = (s[bottom] - radius) - cyl / 2.0
    rho[bottom] = np.sqrt(np.maximum(0.0, radius**2 - (zc + cyl / 2.0) ** 2))
    z[bottom] = zc
    # cylinder
    z[middle] = (s[middle] - radius) - cyl / 2.0
    rho[middle] = radius
    # top cap: sphere centered at z = +cyl/2
    zc = (s[top] - radius) - cyl / 2.0
    rho[top] = np.sqrt(np.maximum(0.0, radius**2 - (zc - cyl / 2.0) ** 2))
    z[top] = zc

    points = np.column_stack([rho * np.cos(theta), rho * np.sin(theta), z])
    return PointCloud(points, name=name)


def doorway_path(duration: float = 40.0, standoff: float = 5.0, rate: float = 30.0) -> PathScript:
    """Straight transit through the door opening (x = 0), facing +y."""
    keyframes = [
        (0.0, (0.0, -standoff, _WALK_Z), _quat_z(math.pi / 2.0)),
        (duration, (0.0, standoff, _WALK_Z), _quat_z(math.pi / 2.0)),
    ]
    return _script(keyframes, rate)


def wall_skim_path(
    duration: float = 40.0,
    clearance: float = 0.05,
    inflation: float = 0.04,
    span: float = 8.0,
    rate: float = 30.0,
) -> PathScript:
    """Walk parallel to the wall, surface passing ``clearance`` away.

    ``inflation`` approximates the two models' point radii so the path can
    be planned before the exact radii are known; the resulting closest
    approach is clearance + inflation - (r_scene + r_avatar). The path
    stays on the solid side of the wall (x > door), includes a heading
    turn halfway, and never collides for the default scenes.
    """
    y = AVATAR_RADIUS + inflation + clearance
    keyframes = [
        (0.0, (1.0, y, _WALK_Z), _quat_z(0.0)),
        (duration / 2.0, (1.0 + span / 2.0, y, _WALK_Z), _quat_z(0.0)),
        (duration, (1.0 + span, y, _WALK_Z), _quat_z(math.pi / 4.0)),
    ]
    return _script(keyframes, rate)


def wall_collision_path(duration: float = 40.0, rate: float = 30.0) -> PathScript:
    """Walk head-on into the solid wall at x = 3 and through it."""
    keyframes = [
        (0.0, (3.0, -2.0, _WALK_Z), _quat_z(math.pi / 2.0)),
        (duration, (3.0, 1.0, _WALK_Z), _quat_z(math.pi / 2.0)),
    ]
    return _script(keyframes, rate)


def skim_near_miss_pose() -> tuple[float, float, float]:
    """Avatar center translation for the near-miss counter checks."""
    return (4.0, AVATAR_RADIUS + 0.04 + 0.05, _WALK_Z)


def far_pose() -> tuple[float, float, float]:
    """Translation far outside the scene's root sphere."""
    return (0.0, -1000.0, _WALK_Z)


def _quat_z(angle: float) -> tuple[float, float, float, float]:
    return (0.0, 0.0, math.sin(angle / 2.0), math.cos(angle / 2.0))


def _script(keyframes, rate: float) -> PathScript:
    times = np.array([t for t, _, _ in keyframes])
    translations = np.array([tr for _, tr, _ in keyframes])
    quaternions = np.array([q for _, _, q in keyframes])
    return PathScript(times=times, translations=translations, quaternions=quaternions, rate=rate)
