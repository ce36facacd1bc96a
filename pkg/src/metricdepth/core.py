"""Shared domain types, validity semantics and depth/disparity conversion.

Rasters are stored as ``(height, width)`` float64 arrays in row-major order
together with an explicit boolean validity mask. Every container freezes its
arrays on construction so instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Valid metric depth range in meters; 65 m is the largest value that fits a
#: 16-bit millimeter encoding without overflow.
CLIP_MIN = 0.05
CLIP_MAX = 65.0

_ORTHO_TOL = 1e-9


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateDataError(ValueError):
    """The fitting data cannot determine the requested model."""


class BehindCameraError(ValueError):
    """A point has non-positive depth in the camera frame."""


class NoValidNeighborError(LookupError):
    """None of the integer pixels surrounding a projection are usable."""


class EmptyOverlapError(ValueError):
    """Two depth images share no pixel that is valid in both."""


class ConfigError(ValueError):
    """Inconsistent configuration or mismatched input dimensions."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def depth_to_disparity(z):
    """Return ``1 / z``; ``z`` may be a scalar or an array.

    Raises
    ------
    DomainError
        If any depth is non-positive or non-finite.
    """
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError('depth must be positive and finite')
    out = 1.0 / arr
    return float(out) if out.ndim == 0 else out


def disparity_to_depth(d):
    """Return ``1 / d``; the inverse of :func:`depth_to_disparity`."""
    arr = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError('disparity must be positive and finite')
    out = 1.0 / arr
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class _DepthRaster:
    data: np.ndarray
    valid: np.ndarray = None

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 2:
            raise ValueError(f'depth raster must be 2D, got shape {data.shape}')
        if self.valid is None:
            valid = np.isfinite(data) & (data > 0)
        else:
            valid = np.array(self.valid, dtype=bool)
            if valid.shape != data.shape:
                raise ValueError('validity mask shape does not match the data')
            bad = valid & ~(np.isfinite(data) & (data > 0))
            if bad.any():
                raise DomainError('valid pixels must hold positive finite values')
        valid.setflags(write=False)
        object.__setattr__(self, 'data', data)
        object.__setattr__(self, 'valid', valid)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape


class RelativeDepthImage(_DepthRaster):
    """Per-pixel relative depth (unitless, correct up to a monotone warp).

    When ``valid`` is omitted every positive finite pixel is valid.
    """


class MetricDepthImage(_DepthRaster):
    """Per-pixel metric depth in meters with an explicit validity mask."""


def encode_u16_mm(img: MetricDepthImage) -> np.ndarray:
    """Encode a metric image as 16-bit unsigned millimeters.

    Invalid pixels, and valid pixels outside ``[CLIP_MIN, CLIP_MAX]``, map to the
    sentinel 0, so no output value exceeds 65000.
    """
    in_range = img.valid & (img.data >= CLIP_MIN) & (img.data <= CLIP_MAX)
    out = np.zeros(img.shape, dtype=np.uint16)
    out[in_range] = np.rint(img.data[in_range] * 1000.0).astype(np.uint16)
    return out


def decode_u16_mm(raster) -> MetricDepthImage:
    """Inverse of :func:`encode_u16_mm`; zero pixels become invalid."""
    raster = np.asarray(raster)
    valid = raster > 0
    return MetricDepthImage(raster.astype(float) / 1000.0, valid)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels. Pixel centers sit on integer coordinates."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise DomainError('focal lengths must be positive')
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise DomainError('principal point must lie inside the sensor')

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """A proper rigid motion ``x -> R @ x + t``.

    Naming follows the ``T_PQ`` convention: ``T_PQ.apply(p_Q)`` expresses a
    point given in frame Q in frame P.
    """

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = _frozen(self.rotation)
        t = _frozen(self.translation).reshape(-1)
        if R.shape != (3, 3) or t.shape != (3,):
            raise DomainError('rotation must be 3x3 and translation a 3-vector')
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise DomainError('transform entries must be finite')
        if (np.max(np.abs(R @ R.T - np.eye(3))) > _ORTHO_TOL
                or abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL):
            raise DomainError('rotation must be orthonormal with determinant +1')
        object.__setattr__(self, 'rotation', R)
        object.__setattr__(self, 'translation', t)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        """Transform a 3-vector or an ``(N, 3)`` array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def inverse(self) -> RigidTransform:
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def compose(self, other: RigidTransform) -> RigidTransform:
        """Return ``self ∘ other``, i.e. apply ``other`` first."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        return self.compose(other)

    def __eq__(self, other):
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return (np.array_equal(self.rotation, other.rotation)
                and np.array_equal(self.translation, other.translation))

    __hash__ = None

    def matrix(self) -> np.ndarray:
        """The 4x4 homogeneous matrix."""
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T


@dataclass(frozen=True, eq=False)
class FeaturePoint3D:
    """A sparse map point in meters, expressed in the camera frame of ``frame_id``."""

    position: np.ndarray
    frame_id: str = '0'

    def __post_init__(self):
        p = _frozen(self.position).reshape(-1)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise DomainError('feature position must be a finite 3-vector')
        object.__setattr__(self, 'position', p)

    def __eq__(self, other):
        if not isinstance(other, FeaturePoint3D):
            return NotImplemented
        return self.frame_id == other.frame_id and np.array_equal(self.position, other.position)

    __hash__ = None


@dataclass(frozen=True)
class DisparityPairSet:
    """Matched ``(d_rel, d_met)`` samples and the ``(row, col)`` they came from.

    ``dropped`` counts features discarded during pairing, keyed by reason.
    """

    d_rel: np.ndarray
    d_met: np.ndarray
    pixels: np.ndarray = None
    dropped: dict = field(default_factory=dict)

    def __post_init__(self):
        d_rel = _frozen(self.d_rel).reshape(-1)
        d_met = _frozen(self.d_met).reshape(-1)
        if d_rel.shape != d_met.shape:
            raise ValueError('d_rel and d_met must have the same length')
        if np.any(~(d_rel > 0)) or np.any(~(d_met > 0)):
            raise DomainError('all disparities must be positive')
        if self.pixels is None:
            pixels = np.zeros((d_rel.size, 2), dtype=np.int64)
        else:
            pixels = np.array(self.pixels, dtype=np.int64).reshape(-1, 2)
        if pixels.shape[0] != d_rel.size:
            raise ValueError('one source pixel is required per pair')
        pixels.setflags(write=False)
        object.__setattr__(self, 'd_rel', d_rel)
        object.__setattr__(self, 'd_met', d_met)
        object.__setattr__(self, 'pixels', pixels)
        object.__setattr__(self, 'dropped', dict(self.dropped))

    @classmethod
    def from_pairs(cls, pairs, pixels=None) -> DisparityPairSet:
        """Build from an iterable of ``(d_rel, d_met)`` tuples."""
        arr = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], pixels)

    @property
    def pairs(self) -> np.ndarray:
        return np.column_stack([self.d_rel, self.d_met])

    def __len__(self):
        return self.d_rel.size
