"""Re-expressing the keyframe sparse map in the current camera and pairing it
with relative depth pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    CLIP_MAX,
    CLIP_MIN,
    BehindCameraError,
    CameraIntrinsics,
    DisparityPairSet,
    NoValidNeighborError,
    RelativeDepthImage,
    RigidTransform,
)

# Projections of integer-centered back-projected points land within float
# round-off of an integer; snap those so the neighbor set does not widen.
_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class PoseChain:
    """Poses linking keyframe camera ``C_i`` to current camera ``C_j``.

    ``T_WBi``/``T_WBj`` are world-from-body poses, ``T_BiCi``/``T_BjCj`` the
    body-from-camera extrinsics at the two instants.
    """

    T_WBi: RigidTransform = field(default_factory=RigidTransform.identity)
    T_BiCi: RigidTransform = field(default_factory=RigidTransform.identity)
    T_WBj: RigidTransform = field(default_factory=RigidTransform.identity)
    T_BjCj: RigidTransform = field(default_factory=RigidTransform.identity)

    NAMES = ('WBi', 'BiCi', 'WBj', 'BjCj')

    def transforms(self) -> dict:
        return {name: getattr(self, 'T_' + name) for name in self.NAMES}


def transform_points(points, chain: PoseChain) -> np.ndarray:
    """Vectorized :func:`transform_feature` for an ``(N, 3)`` array."""
    p = np.asarray(points, dtype=float)
    p_W = (p @ chain.T_BiCi.rotation.T + chain.T_BiCi.translation) @ chain.T_WBi.rotation.T \
        + chain.T_WBi.translation
    # R^-1 == R^T for the orthonormal rotations guaranteed by RigidTransform
    p_Bj = (p_W - chain.T_WBj.translation) @ chain.T_WBj.rotation
    return (p_Bj - chain.T_BjCj.translation) @ chain.T_BjCj.rotation


def transform_feature(p_Ci, chain: PoseChain) -> np.ndarray:
    """Express a keyframe-camera point in the current camera frame.

    Goes through the world frame: body ``B_i`` and world ``W`` first, then back
    down through ``B_j`` into ``C_j``.
    """
    p = getattr(p_Ci, 'position', p_Ci)
    return transform_points(np.asarray(p, dtype=float).reshape(1, 3), chain)[0]


def project_to_pixel(p_Cj, intr: CameraIntrinsics) -> tuple:
    """Pinhole projection to fractional ``(u, v)`` (column, row)."""
    x, y, z = (float(c) for c in p_Cj)
    if not z > 0:
        raise BehindCameraError(f'point has depth {z} <= 0')
    return intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy


def back_project(pixel_uv, depth: float, intr: CameraIntrinsics) -> np.ndarray:
    """Inverse of :func:`project_to_pixel` at a given depth."""
    u, v = pixel_uv
    return np.array([(u - intr.cx) / intr.fx * depth, (v - intr.cy) / intr.fy * depth, depth])


def _snap(x):
    r = np.rint(x)
    return np.where(np.abs(x - r) < _SNAP_TOL, r, x)


def _neighbor_candidates(u, v):
    """Row/col arrays of shape (N, 4) in row-major order of the 2x2 block."""
    u = _snap(np.asarray(u, dtype=float))
    v = _snap(np.asarray(v, dtype=float))
    r0, r1 = np.floor(v), np.ceil(v)
    c0, c1 = np.floor(u), np.ceil(u)
    rows = np.stack([r0, r0, r1, r1], axis=-1).astype(np.int64)
    cols = np.stack([c0, c1, c0, c1], axis=-1).astype(np.int64)
    return rows, cols


def _select_min_neighbor(u, v, rel: RelativeDepthImage):
    """Vectorized four-neighbor selection; returns (rows, cols, ok)."""
    rows, cols = _neighbor_candidates(u, v)
    inside = (rows >= 0) & (rows < rel.height) & (cols >= 0) & (cols < rel.width)
    rr = np.where(inside, rows, 0)
    cc = np.where(inside, cols, 0)
    usable = inside & rel.valid[rr, cc]
    depth = np.where(usable, rel.data[rr, cc], np.inf)
    # argmin returns the first minimum, which is the row-major tie-break
    best = np.argmin(depth, axis=-1)
    ok = usable.any(axis=-1)
    pick = np.arange(rows.shape[0])
    return rows[pick, best], cols[pick, best], ok


def resolve_fractional_pixel(frac, rel: RelativeDepthImage) -> tuple:
    """Pick the surrounding integer pixel with the smallest relative depth.

    Parameters
    ----------
    frac : tuple of float
        Fractional ``(u, v)`` = (column, row) location.
    rel : RelativeDepthImage
        Relative depth used to rank the up to four neighbors.

    Returns
    -------
    tuple of int
        ``(row, col)`` of the nearest surface among the valid neighbors. Ties
        go to the smaller row, then the smaller column.
    """
    u, v = frac
    rows, cols, ok = _select_min_neighbor(np.array([u]), np.array([v]), rel)
    if not ok[0]:
        raise NoValidNeighborError(f'no valid pixel around ({u}, {v})')
    return int(rows[0]), int(cols[0])


def build_disparity_pairs(features, chain: PoseChain, intr: CameraIntrinsics,
                          rel: RelativeDepthImage, clip=(CLIP_MIN, CLIP_MAX)) -> DisparityPairSet:
    """Pair every usable sparse feature with the relative disparity at its pixel.

    Features behind the camera, outside the image, without a valid neighbor
    or with metric depth outside ``clip`` are dropped and counted in
    ``DisparityPairSet.dropped``. When several features land on the same pixel
    the nearest one is kept; output order follows first arrival per pixel.
    """
    dropped = dict.fromkeys(('behind_camera', 'out_of_image', 'no_valid_neighbor',
                             'depth_out_of_range', 'duplicate_pixel'), 0)
    if isinstance(features, np.ndarray):
        pts = np.asarray(features, dtype=float).reshape(-1, 3)
    else:
        pts = np.array([getattr(f, 'position', f) for f in features], dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        return DisparityPairSet(np.empty(0), np.empty(0), np.empty((0, 2)), dropped)

    p = transform_points(pts, chain)
    z = p[:, 2]
    front = z > 0
    dropped['behind_camera'] = int(np.count_nonzero(~front))
    p, z = p[front], z[front]
    u = intr.fx * p[:, 0] / z + intr.cx
    v = intr.fy * p[:, 1] / z + intr.cy

    # integer pixel centers: pixel k covers [k - 0.5, k + 0.5)
    inside = (u >= -0.5) & (u < rel.width - 0.5) & (v >= -0.5) & (v < rel.height - 0.5)
    dropped['out_of_image'] = int(np.count_nonzero(~inside))
    u, v, z = u[inside], v[inside], z[inside]

    rows, cols, ok = _select_min_neighbor(u, v, rel)
    dropped['no_valid_neighbor'] = int(np.count_nonzero(~ok))
    rows, cols, z = rows[ok], cols[ok], z[ok]

    in_range = (z >= clip[0]) & (z <= clip[1])
    dropped['depth_out_of_range'] = int(np.count_nonzero(~in_range))
    rows, cols, z = rows[in_range], cols[in_range], z[in_range]

    lin = rows * rel.width + cols
    order = np.arange(lin.size)
    # nearest feature per pixel, earliest feature on exact ties
    by_pixel = np.lexsort((order, z, lin))
    first = np.ones(by_pixel.size, dtype=bool)
    first[1:] = lin[by_pixel[1:]] != lin[by_pixel[:-1]]
    keep = by_pixel[first]
    dropped['duplicate_pixel'] = int(lin.size - keep.size)
    # restore first-arrival order of each pixel
    _, first_seen, inverse = np.unique(lin, return_index=True, return_inverse=True)
    keep = keep[np.argsort(first_seen[inverse[keep]], kind='stable')]

    rows, cols, z = rows[keep], cols[keep], z[keep]
    d_rel = 1.0 / rel.data[rows, cols]
    d_met = 1.0 / z
    return DisparityPairSet(d_rel, d_met, np.column_stack([rows, cols]), dropped)
