"""One frame end to end: render, distort, sample features, rescale, score.

Writes the metric raster and the fit to a temporary directory.
"""

import tempfile
from pathlib import Path

import numpy as np

from metricdepth import io, metrics, synth
from metricdepth.core import CameraIntrinsics
from metricdepth.pipeline import RescaleConfig, rescale_frame

intr = CameraIntrinsics(40.0, 40.0, 31.5, 31.5, 64, 64)
scene = synth.make_scene('rooms', seed=1)
T_WBj = synth.body_pose(10)
T_WBi = synth.body_pose(8)  # keyframe two steps back
gt = synth.quantize(synth.render_gt_depth(scene, T_WBj @ synth.CAMERA_EXTRINSIC, intr))
rel = synth.synthesize_relative(gt, synth.DistortionSpec.curved(), seed=1)
feats, chain = synth.sample_sparse_features(gt, intr, 150, 0.05, 1, T_WBj,
                                            synth.CAMERA_EXTRINSIC, T_WBi)
print(f'{np.count_nonzero(gt.valid)} valid pixels, {len(feats)} features in the keyframe')

for name in ('poly1', 'exp', 'monotonic-spline'):
    res = rescale_frame(rel, feats, chain, intr, RescaleConfig.from_name(name))
    m = metrics.frame_metrics(res.metric_image, gt)
    print(f'{name:<18} pairs={len(res.pairs):3d}  AbsRel={m.abs_rel:.4f}  delta1={m.delta1:.3f}')
print('dropped:', {k: v for k, v in res.pairs.dropped.items() if v})

# too few features: the frame is skipped, no image is produced
few = rescale_frame(rel, feats[:9], chain, intr, RescaleConfig())
print('with 9 features:', few.reason)

out = Path(tempfile.mkdtemp())
io.write_metric_pgm(out / 'metric.pgm', res.metric_image)
io.write_json(out / 'model.json', res.model.to_dict())
back = io.read_metric_pgm(out / 'metric.pgm')
print('written to', out, '; max round-trip error (m):',
      np.abs(back.data - res.metric_image.data)[res.metric_image.valid].max())
