"""Per-frame rescaling: pairing, sample-count gate, fitting and clipping."""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import fitters
from .core import (
    CLIP_MAX,
    CLIP_MIN,
    ConfigError,
    DegenerateDataError,
    DisparityPairSet,
    DomainError,
    MetricDepthImage,
    RelativeDepthImage,
)
from .geometry import build_disparity_pairs

_ALIASES = {
    'exp': 'exponential', 'exponential': 'exponential',
    'smoothing_spline': 'smoothing_spline', 'spline': 'smoothing_spline',
    'monotonic_smoothing_spline': 'monotonic_smoothing_spline', 'mss': 'monotonic_smoothing_spline',
    'monotonic_spline': 'monotonic_spline', 'ms': 'monotonic_spline',
}


@dataclass(frozen=True)
class RescaleConfig:
    """Everything needed to rescale one frame.

    ``lam`` and ``kappa`` are relative penalty weights (see
    :mod:`metricdepth.fitters`); ``smoothing_s=None`` picks the default bound.
    """

    strategy: str = 'monotonic_spline'
    degree: int = 1
    smoothing_s: float = None
    lam: float = fitters.DEFAULT_LAMBDA
    kappa: float = fitters.DEFAULT_KAPPA
    penalty: str = 'jump'
    knot_count: int = fitters.DEFAULT_KNOTS
    min_features: int = 10
    clip: tuple = (CLIP_MIN, CLIP_MAX)
    input_is_disparity: bool = False

    def __post_init__(self):
        if self.strategy not in fitters.STRATEGIES:
            raise ConfigError(f'unknown strategy {self.strategy!r}')
        if self.min_features < 2:
            raise ConfigError('min_features must be at least 2')
        if not self.clip[0] < self.clip[1]:
            raise ConfigError('clip range must satisfy low < high')
        if self.strategy == 'polynomial' and not 1 <= self.degree <= 5:
            raise ConfigError('polynomial degree must be 1..5')
        object.__setattr__(self, 'clip', (float(self.clip[0]), float(self.clip[1])))

    @classmethod
    def from_name(cls, name: str, **kwargs) -> RescaleConfig:
        """Parse labels such as ``poly3``, ``exp``, ``monotonic-spline``."""
        key = name.strip().lower().replace('-', '_').replace(' ', '_')
        m = re.fullmatch(r'(?:poly|deg|polynomial)_?(\d)(?:_?poly)?', key)
        if m:
            return cls('polynomial', **{**kwargs, 'degree': int(m.group(1))})
        if key in ('poly', 'polynomial'):
            return cls('polynomial', **kwargs)
        if key not in _ALIASES:
            raise ConfigError(f'unknown strategy {name!r}')
        return cls(_ALIASES[key], **kwargs)

    @property
    def label(self) -> str:
        if self.strategy == 'polynomial':
            return f'poly{self.degree}'
        return self.strategy.replace('_', '-')

    def fit(self, pairs):
        if self.strategy == 'polynomial':
            return fitters.fit_polynomial(pairs, self.degree)
        if self.strategy == 'exponential':
            return fitters.fit_exponential(pairs)
        if self.strategy == 'smoothing_spline':
            return fitters.fit_smoothing_spline(pairs, self.smoothing_s, self.knot_count,
                                                self.penalty)
        if self.strategy == 'monotonic_smoothing_spline':
            return fitters.fit_monotonic_smoothing_spline(pairs, self.lam, self.kappa,
                                                          self.knot_count)
        return fitters.fit_monotonic_spline(pairs, self.kappa, self.knot_count)


@dataclass(frozen=True)
class FrameResult:
    metric_image: MetricDepthImage = None
    report: fitters.FitReport = None
    skipped: bool = False
    reason: str = ''
    model: fitters.RescaleModel = None
    pairs: DisparityPairSet = None
    frame_id: str = ''
    extra: dict = field(default_factory=dict)


def _as_depth(rel: RelativeDepthImage, is_disparity: bool) -> RelativeDepthImage:
    if not is_disparity:
        return rel
    data = np.where(rel.valid, 1.0 / np.where(rel.valid, rel.data, 1.0), 0.0)
    return RelativeDepthImage(data, rel.valid)


def rescale_pairs(rel: RelativeDepthImage, pairs: DisparityPairSet, cfg: RescaleConfig) -> FrameResult:
    """Fit ``cfg``'s model to prepared pairs and rescale every valid pixel of ``rel``.

    ``rel`` must already hold relative depth (not disparity).
    """
    if len(pairs) < cfg.min_features:
        return FrameResult(skipped=True, pairs=pairs,
                           reason=f'insufficient features ({len(pairs)} < {cfg.min_features})')
    try:
        model = cfg.fit(pairs)
    except (DegenerateDataError, DomainError) as exc:
        return FrameResult(skipped=True, pairs=pairs, reason=f'degenerate data: {exc}')

    d_rel = np.zeros(rel.shape)
    d_rel[rel.valid] = 1.0 / rel.data[rel.valid]
    d_hat = np.zeros(rel.shape)
    d_hat[rel.valid] = model.predict(d_rel[rel.valid])
    positive = rel.valid & (d_hat > 0)
    depth = np.zeros(rel.shape)
    depth[positive] = 1.0 / d_hat[positive]
    valid = positive & (depth >= cfg.clip[0]) & (depth <= cfg.clip[1])
    depth[~valid] = 0.0
    return FrameResult(MetricDepthImage(depth, valid), model.report, False, '', model, pairs)


def rescale_frame(rel: RelativeDepthImage, features, chain, intr, cfg: RescaleConfig) -> FrameResult:
    """Rescale one relative depth frame to metric depth.

    Raises
    ------
    ConfigError
        If the raster size differs from the intrinsics.
    """
    if rel.shape != (intr.height, intr.width):
        raise ConfigError(f'relative raster is {rel.width}x{rel.height} but intrinsics say '
                          f'{intr.width}x{intr.height}')
    rel = _as_depth(rel, cfg.input_is_disparity)
    pairs = build_disparity_pairs(features, chain, intr, rel, cfg.clip)
    return rescale_pairs(rel, pairs, cfg)


def _safe_rescale(record, cfg, source):
    try:
        features, chain = record.source(source)
        result = rescale_frame(record.rel, features, chain, record.intrinsics, cfg)
    except Exception as exc:  # one bad frame must not abort the stream
        result = FrameResult(skipped=True, reason=f'error: {type(exc).__name__}: {exc}')
    return replace(result, frame_id=record.frame_id)


def rescale_sequence(frames, cfg: RescaleConfig, jobs: int = 1, source: str = None):
    """Rescale each frame independently, yielding results in input order."""
    if jobs <= 1:
        for record in frames:
            yield _safe_rescale(record, cfg, source)
        return
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(lambda r: _safe_rescale(r, cfg, source), frames)
