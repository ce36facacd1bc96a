"""Synthetic ground truth: ray-cast scenes, known relative-depth warps and
noisy sparse feature maps.

The warp is defined from relative to metric disparity, exactly like the
rescaling models, so the ideal fit of a frame is known in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bspline
from .core import (
    CLIP_MAX,
    CLIP_MIN,
    CameraIntrinsics,
    DomainError,
    FeaturePoint3D,
    MetricDepthImage,
    RelativeDepthImage,
    RigidTransform,
    decode_u16_mm,
    encode_u16_mm,
)
from .geometry import PoseChain


# -- scene primitives ---------------------------------------------------------------

@dataclass(frozen=True)
class Plane:
    """Points ``x`` with ``normal . x == offset``."""

    normal: tuple
    offset: float

    def intersect(self, origin, dirs):
        n = np.asarray(self.normal, dtype=float)
        denom = dirs @ n
        with np.errstate(divide='ignore', invalid='ignore'):
            t = (self.offset - origin @ n) / denom
        return np.where(np.abs(denom) > 1e-15, t, np.inf)


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float

    def intersect(self, origin, dirs):
        oc = origin - np.asarray(self.center, dtype=float)
        a = np.einsum('ij,ij->i', dirs, dirs)
        b = 2.0 * dirs @ oc
        c = oc @ oc - self.radius ** 2
        disc = b * b - 4 * a * c
        root = np.sqrt(np.maximum(disc, 0.0))
        t0 = (-b - root) / (2 * a)
        t1 = (-b + root) / (2 * a)
        t = np.where(t0 > 0, t0, t1)
        return np.where(disc >= 0, t, np.inf)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; rays starting inside hit its walls from within."""

    lo: tuple
    hi: tuple

    def intersect(self, origin, dirs):
        lo, hi = np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)
        with np.errstate(divide='ignore', invalid='ignore'):
            inv = 1.0 / dirs
            t1 = (lo - origin) * inv
            t2 = (hi - origin) * inv
        # axis-parallel rays: inside the slab on that axis means unbounded
        inside = (origin >= lo) & (origin <= hi)
        par = dirs == 0
        tmin = np.where(par, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
        tmax = np.where(par, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
        t_near, t_far = tmin.max(axis=1), tmax.min(axis=1)
        hit = t_far >= np.maximum(t_near, 0.0)
        t = np.where(t_near > 0, t_near, t_far)
        return np.where(hit & (t > 0), t, np.inf)


@dataclass(frozen=True)
class SyntheticScene:
    primitives: tuple
    max_range: float = CLIP_MAX


def pixel_rays(intr: CameraIntrinsics) -> np.ndarray:
    """Camera-frame ray directions with unit z, one per pixel, row-major."""
    rows, cols = np.mgrid[0:intr.height, 0:intr.width]
    x = (cols.ravel() - intr.cx) / intr.fx
    y = (rows.ravel() - intr.cy) / intr.fy
    return np.column_stack([x, y, np.ones_like(x)])


def render_gt_depth(scene: SyntheticScene, pose: RigidTransform, intr: CameraIntrinsics) -> MetricDepthImage:
    """Ray-cast z-depth for a camera with world-from-camera ``pose``.

    Rays are scaled to unit camera z, so the hit parameter equals the depth.
    Pixels with no hit inside ``[CLIP_MIN, scene.max_range]`` are invalid.
    """
    dirs = pixel_rays(intr) @ pose.rotation.T
    origin = pose.translation
    t = np.full(dirs.shape[0], np.inf)
    for prim in scene.primitives:
        ti = prim.intersect(origin, dirs)
        t = np.where((ti > 0) & (ti < t), ti, t)
    valid = np.isfinite(t) & (t >= CLIP_MIN) & (t <= scene.max_range)
    depth = np.where(valid, t, 0.0)
    shape = (intr.height, intr.width)
    return MetricDepthImage(depth.reshape(shape), valid.reshape(shape))


# -- warps --------------------------------------------------------------------------

def _monotone_inverse(fn, y, lo, hi, table=None, table_size=65537, newton_steps=3):
    """Inverse of a smooth increasing ``fn`` on ``[lo, hi]``.

    A dense table ``(grid, fn(grid))`` gives the starting point; a few Newton
    steps with a central difference derivative then bring the result to
    round-off. Pass ``table`` to reuse one across calls.
    """
    y = np.asarray(y, dtype=float)
    if table is None:
        grid = np.linspace(lo, hi, table_size)
        table = (grid, fn(grid))
    x = np.interp(y, table[1], table[0])
    h = 1e-7 * (hi - lo)
    for _ in range(newton_steps):
        slope = (fn(x + h) - fn(x - h)) / (2 * h)
        x = np.clip(x - (fn(x) - y) / slope, lo, hi)
    return x


@dataclass(frozen=True)
class DistortionSpec:
    """Strictly increasing map from relative to metric disparity, plus noise levels.

    Kinds and their ``params``:

    ``affine``            ``{"a", "b"}``: ``a * d + b`` with ``a > 0``
    ``exponential``       ``{"a", "b"}``: ``a * exp(b * d)`` with ``a, b > 0``
    ``monotone_spline``   ``{"knots", "coeffs"}``: cubic B-spline, linear beyond its knots
    ``piecewise_monotone`` ``{"x", "y"}``: increasing polyline, linear beyond its ends

    ``noise_sigma`` is a multiplicative noise level on relative disparity and
    ``feature_noise_sigma`` the per-axis 3D feature noise in meters.
    """

    kind: str
    params: dict = field(default_factory=dict)
    noise_sigma: float = 0.0
    feature_noise_sigma: float = 0.0

    def __post_init__(self):
        p = self.params
        if self.kind == 'affine':
            if not p['a'] > 0:
                raise DomainError('affine warp needs a > 0')
        elif self.kind == 'exponential':
            if not (p['a'] > 0 and p['b'] > 0):
                raise DomainError('exponential warp needs a > 0 and b > 0')
        elif self.kind == 'monotone_spline':
            if np.any(np.diff(p['coeffs']) <= 0):
                raise DomainError('spline warp coefficients must be strictly increasing')
        elif self.kind == 'piecewise_monotone':
            if np.any(np.diff(p['x']) <= 0) or np.any(np.diff(p['y']) <= 0):
                raise DomainError('polyline warp must be strictly increasing')
        else:
            raise DomainError(f'unknown distortion kind {self.kind!r}')

    # constructors
    @classmethod
    def affine(cls, a=1.0, b=0.0, **noise):
        return cls('affine', {'a': float(a), 'b': float(b)}, **noise)

    @classmethod
    def exponential(cls, a, b, **noise):
        return cls('exponential', {'a': float(a), 'b': float(b)}, **noise)

    @classmethod
    def monotone_spline(cls, coeffs, lo=0.0, hi=1.0, **noise):
        coeffs = [float(c) for c in coeffs]
        knots = bspline.open_uniform_knots(lo, hi, len(coeffs) - 3)
        return cls('monotone_spline', {'knots': [float(k) for k in knots], 'coeffs': coeffs},
                   **noise)

    @classmethod
    def random_monotone_spline(cls, seed, n_coeffs=7, lo=0.0, hi=1.0, y_hi=2.5, **noise):
        rng = np.random.default_rng(seed)
        steps = rng.uniform(0.2, 1.0, n_coeffs - 1)
        coeffs = np.concatenate([[0.0], np.cumsum(steps)])
        return cls.monotone_spline(coeffs * (y_hi / coeffs[-1]), lo, hi, **noise)

    @classmethod
    def piecewise(cls, x, y, **noise):
        return cls('piecewise_monotone', {'x': [float(v) for v in x], 'y': [float(v) for v in y]},
                   **noise)

    @classmethod
    def curved(cls, **noise):
        """The fixed convex warp used by the benchmark presets."""
        return cls.monotone_spline([0.0, 0.02, 0.06, 0.16, 0.45, 1.1, 2.5], 0.0, 1.0, **noise)

    def to_dict(self):
        return {'kind': self.kind, 'params': self.params, 'noise_sigma': self.noise_sigma,
                'feature_noise_sigma': self.feature_noise_sigma}

    @classmethod
    def from_dict(cls, d):
        return cls(d['kind'], d['params'], d.get('noise_sigma', 0.0), d.get('feature_noise_sigma', 0.0))

    # evaluation
    def _ends(self):
        """(x_lo, x_hi, f(x_lo), f(x_hi), slope_lo, slope_hi) for linear extension."""
        p = self.params
        if self.kind == 'monotone_spline':
            k, c = np.asarray(p['knots']), np.asarray(p['coeffs'])
            # clamped cubic: end values are the end coefficients, slopes 3*dc/dk
            s_lo = 3 * (c[1] - c[0]) / (k[4] - k[1])
            s_hi = 3 * (c[-1] - c[-2]) / (k[-2] - k[-5])
            return k[0], k[-1], c[0], c[-1], s_lo, s_hi
        x, y = np.asarray(p['x']), np.asarray(p['y'])
        return (x[0], x[-1], y[0], y[-1], (y[1] - y[0]) / (x[1] - x[0]),
                (y[-1] - y[-2]) / (x[-1] - x[-2]))

    def warp(self, d_rel):
        """Metric disparity as a function of relative disparity."""
        d = np.asarray(d_rel, dtype=float)
        p = self.params
        if self.kind == 'affine':
            return p['a'] * d + p['b']
        if self.kind == 'exponential':
            return p['a'] * np.exp(p['b'] * d)
        x0, x1, y0, y1, s0, s1 = self._ends()
        inner = np.clip(d, x0, x1)
        if self.kind == 'monotone_spline':
            flat = inner.reshape(-1)
            y = (bspline.build_basis_matrix(flat, p['knots']) @ np.asarray(p['coeffs'])).reshape(d.shape)
        else:
            y = np.interp(inner, p['x'], p['y'])
        return np.where(d < x0, y0 + s0 * (d - x0), np.where(d > x1, y1 + s1 * (d - x1), y))

    def inverse(self, d_met):
        """Relative disparity producing the given metric disparity."""
        y = np.asarray(d_met, dtype=float)
        p = self.params
        if self.kind == 'affine':
            return (y - p['b']) / p['a']
        if self.kind == 'exponential':
            return np.log(y / p['a']) / p['b']
        x0, x1, y0, y1, s0, s1 = self._ends()
        below = x0 + (y - y0) / s0
        above = x1 + (y - y1) / s1
        if self.kind == 'piecewise_monotone':
            inner = np.interp(np.clip(y, y0, y1), p['y'], p['x'])
        else:
            if '_table' not in self.__dict__:
                grid = np.linspace(x0, x1, 65537)
                object.__setattr__(self, '_table', (grid, self.warp(grid)))
            inner = _monotone_inverse(self.warp, np.clip(y, y0, y1), x0, x1, self._table)
        return np.where(y < y0, below, np.where(y > y1, above, inner))


def synthesize_relative(gt: MetricDepthImage, spec: DistortionSpec, seed: int = 0) -> RelativeDepthImage:
    """Relative depth whose true rescaling map is ``spec.warp``.

    Pixels whose relative disparity would be non-positive are invalid.
    """
    d_met = np.where(gt.valid, 1.0 / np.where(gt.valid, gt.data, 1.0), 1.0)
    d_rel = spec.inverse(d_met)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        d_rel = d_rel * (1.0 + spec.noise_sigma * rng.standard_normal(d_rel.shape))
    valid = gt.valid & np.isfinite(d_rel) & (d_rel > 0)
    z_rel = np.where(valid, 1.0 / np.where(valid, d_rel, 1.0), 0.0)
    return RelativeDepthImage(z_rel, valid)


def sample_sparse_features(gt: MetricDepthImage, intr: CameraIntrinsics, count: int,
                           feature_noise_sigma: float = 0.0, seed: int = 0,
                           T_WBj: RigidTransform = None, T_BC: RigidTransform = None,
                           T_WBi: RigidTransform = None):
    """Back-project random valid pixels into a keyframe-anchored sparse map.

    Parameters
    ----------
    gt : MetricDepthImage
        Ground-truth depth of the current frame.
    intr : CameraIntrinsics
        Camera model.
    count : int
        Requested number of features; fewer are returned if fewer pixels are valid.
    feature_noise_sigma : float
        Standard deviation (m) of isotropic Gaussian noise added to each point
        in the keyframe camera frame.
    seed : int
        Seed for pixel selection and noise.
    T_WBj, T_BC, T_WBi : RigidTransform, optional
        Current body pose, body-from-camera extrinsic and keyframe body pose.
        All default to identity; ``T_WBi`` defaults to ``T_WBj``.

    Returns
    -------
    features : list of FeaturePoint3D
    chain : PoseChain
        The exact chain relating the keyframe to the current camera.
    """
    if count < 1:
        raise DomainError('count must be at least 1')
    ident = RigidTransform.identity()
    T_WBj = T_WBj or ident
    T_BC = T_BC or ident
    T_WBi = T_WBi or T_WBj
    chain = PoseChain(T_WBi, T_BC, T_WBj, T_BC)

    rng = np.random.default_rng(seed)
    idx = np.flatnonzero(gt.valid)
    pick = rng.choice(idx, size=min(count, idx.size), replace=False)
    rows, cols = np.divmod(pick, gt.width)
    z = gt.data[rows, cols]
    p_Cj = np.column_stack([(cols - intr.cx) / intr.fx * z, (rows - intr.cy) / intr.fy * z, z])
    T_CiCj = (T_WBi @ T_BC).inverse() @ (T_WBj @ T_BC)
    p_Ci = T_CiCj.apply(p_Cj)
    if feature_noise_sigma > 0:
        p_Ci = p_Ci + feature_noise_sigma * rng.standard_normal(p_Ci.shape)
    return [FeaturePoint3D(p, 'kf') for p in p_Ci], chain


# -- environment presets ------------------------------------------------------------

def _rot_z(yaw):
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


#: body (x forward, y left, z up) from camera (x right, y down, z forward)
CAMERA_EXTRINSIC = RigidTransform(np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]),
                                  np.array([0.1, 0.0, 0.05]))


def _corridor(rng):
    prims = [Box((-5.0, -1.6, 0.0), (300.0, 1.6, 2.6))]
    for x in np.arange(4.0, 120.0, 5.0):
        side = rng.choice([-1.0, 1.0])
        w = rng.uniform(0.3, 0.7)
        y0 = side * 1.6
        prims.append(Box((x, min(y0, y0 - side * w), 0.0), (x + rng.uniform(0.4, 1.5), max(y0, y0 - side * w), 2.6)))
        prims.append(Sphere((x + 2.0, rng.uniform(-1.0, 1.0), 0.0), rng.uniform(0.3, 0.6)))
    return prims


def _rooms(rng):
    prims = [Box((-10.0, -7.0, 0.0), (40.0, 7.0, 6.0)), Box((40.0, -2.0, 0.0), (80.0, 2.0, 4.0)),
             Box((80.0, -9.0, 0.0), (130.0, 9.0, 6.0))]
    for _ in range(14):
        c = np.array([rng.uniform(3.0, 125.0), rng.uniform(-5.0, 5.0)])
        if abs(c[1]) < 1.2:
            c[1] = 1.2 * np.sign(c[1] or 1.0) + c[1]
        h = rng.uniform(0.5, 1.5, 2)
        prims.append(Box((c[0] - h[0], c[1] - h[1], 0.0), (c[0] + h[0], c[1] + h[1], rng.uniform(1.0, 4.0))))
    return prims


def _forest(rng):
    prims = [Plane((0.0, 0.0, 1.0), 0.0)]
    for _ in range(60):
        c = np.array([rng.uniform(2.0, 90.0), rng.uniform(-25.0, 25.0)])
        if abs(c[1]) < 1.0:
            continue
        r = rng.uniform(0.15, 0.5)
        prims.append(Box((c[0] - r, c[1] - r, 0.0), (c[0] + r, c[1] + r, rng.uniform(3.0, 9.0))))
        if rng.uniform() < 0.5:
            prims.append(Sphere((c[0], c[1], rng.uniform(3.0, 6.0)), rng.uniform(0.8, 2.0)))
    return prims


PRESETS = {'corridor': _corridor, 'rooms': _rooms, 'forest': _forest}


def make_scene(preset: str, seed: int = 0) -> SyntheticScene:
    try:
        build = PRESETS[preset]
    except KeyError:
        raise DomainError(f'unknown scene preset {preset!r}; choose from {sorted(PRESETS)}') from None
    return SyntheticScene(tuple(build(np.random.default_rng(seed))))


def body_pose(k: int) -> RigidTransform:
    """World-from-body pose of frame ``k`` along a gently weaving forward path."""
    pos = np.array([0.3 * k, 0.3 * math.sin(0.2 * k), 1.2 + 0.1 * math.sin(0.13 * k)])
    return RigidTransform(_rot_z(0.15 * math.sin(0.1 * k)), pos)


def quantize(gt: MetricDepthImage) -> MetricDepthImage:
    """Round-trip through the 16-bit millimeter encoding."""
    return decode_u16_mm(encode_u16_mm(gt))
