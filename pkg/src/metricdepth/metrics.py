"""Depth accuracy metrics: AbsRel and delta1, per frame and aggregated."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CLIP_MAX, CLIP_MIN, EmptyOverlapError, MetricDepthImage

DENOMINATORS = ('prediction', 'ground_truth')


@dataclass(frozen=True)
class FrameMetrics:
    abs_rel: float
    delta1: float
    n_valid: int
    coverage: float = 1.0


def overlap_mask(pred: MetricDepthImage, gt: MetricDepthImage, clip=(CLIP_MIN, CLIP_MAX)) -> np.ndarray:
    """Pixels valid in both images with ground truth inside ``clip``."""
    if pred.shape != gt.shape:
        raise ValueError(f'shape mismatch: {pred.shape} vs {gt.shape}')
    gt_ok = gt.valid & (gt.data >= clip[0]) & (gt.data <= clip[1])
    return gt_ok & pred.valid


def _pixels(pred, gt, clip):
    mask = overlap_mask(pred, gt, clip)
    if not mask.any():
        raise EmptyOverlapError('no pixel is valid in both prediction and ground truth')
    return pred.data[mask], gt.data[mask]


def abs_rel(pred: MetricDepthImage, gt: MetricDepthImage, denominator: str = 'prediction',
            clip=(CLIP_MIN, CLIP_MAX)) -> float:
    """Mean of ``|z_pred - z_gt| / z_ref`` over overlapping valid pixels.

    ``denominator='prediction'`` divides by the predicted depth;
    ``'ground_truth'`` gives the common textbook form.
    """
    zp, zg = _pixels(pred, gt, clip)
    if denominator == 'prediction':
        ref = zp
    elif denominator == 'ground_truth':
        ref = zg
    else:
        raise ValueError(f'denominator must be one of {DENOMINATORS}')
    return float(np.mean(np.abs(zp - zg) / ref))


def delta1(pred: MetricDepthImage, gt: MetricDepthImage, clip=(CLIP_MIN, CLIP_MAX)) -> float:
    """Fraction of pixels with both ``pred/gt`` and ``gt/pred`` strictly below 1.25."""
    zp, zg = _pixels(pred, gt, clip)
    hit = (zp / zg < 1.25) & (zg / zp < 1.25)
    return float(np.count_nonzero(hit)) / zp.size


def frame_metrics(pred: MetricDepthImage, gt: MetricDepthImage, denominator: str = 'prediction',
                  clip=(CLIP_MIN, CLIP_MAX)) -> FrameMetrics:
    mask = overlap_mask(pred, gt, clip)
    n_gt = int(np.count_nonzero(gt.valid & (gt.data >= clip[0]) & (gt.data <= clip[1])))
    return FrameMetrics(abs_rel(pred, gt, denominator, clip), delta1(pred, gt, clip),
                        int(np.count_nonzero(mask)), np.count_nonzero(mask) / max(n_gt, 1))


def pool(frames) -> FrameMetrics:
    """Pixel-pooled (micro) average of per-frame metrics.

    Equivalent to evaluating all pixels of all frames at once.
    """
    frames = list(frames)
    n = sum(f.n_valid for f in frames)
    if n == 0:
        raise EmptyOverlapError('no valid pixels to pool')
    ar = sum(f.abs_rel * f.n_valid for f in frames) / n
    d1 = sum(f.delta1 * f.n_valid for f in frames) / n
    cov = float(np.mean([f.coverage for f in frames]))
    return FrameMetrics(ar, d1, n, cov)


def weighted_average(per_env) -> FrameMetrics:
    """Frame-count weighted mean of per-environment metrics.

    Parameters
    ----------
    per_env : iterable of (FrameMetrics, int)
        Aggregate metrics of one environment with its frame count.
    """
    per_env = list(per_env)
    if not per_env:
        raise EmptyOverlapError('no environments to average')
    counts = [c for _, c in per_env]
    if any(c <= 0 for c in counts):
        raise ValueError('frame counts must be positive')
    total = sum(counts)
    ar = sum(m.abs_rel * c for m, c in per_env) / total
    d1 = sum(m.delta1 * c for m, c in per_env) / total
    cov = sum(m.coverage * c for m, c in per_env) / total
    return FrameMetrics(ar, d1, sum(m.n_valid for m, _ in per_env), cov)
