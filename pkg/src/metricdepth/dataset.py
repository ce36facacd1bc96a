"""Frame records and environment manifests.

A frame record is a JSON object whose paths are relative to the file that
contains it::

    {"id": "000003",
     "rel": "frames/000003_rel.f32",
     "gt": "frames/000003_gt.pgm",
     "intrinsics": "intrinsics.json",
     "sources": {"gt":   {"features": "...csv", "poses": "...json"},
                 "vins": {"features": "...csv", "poses": "...json"}}}

``gt`` is optional. A manifest is ``{"environment": name, "frames": [record, ...]}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from . import io
from .core import CameraIntrinsics, MetricDepthImage, RelativeDepthImage

MANIFEST_FORMAT = 'metricdepth-manifest/1'
DEFAULT_SOURCE_ORDER = ('vins', 'gt')


@dataclass(frozen=True)
class FrameRecord:
    frame_id: str
    rel: RelativeDepthImage
    intrinsics: CameraIntrinsics
    sources: dict = field(default_factory=dict)
    gt: MetricDepthImage = None

    def source(self, name: str = None):
        """``(features, chain)`` for a named source, or the default one."""
        if name is None:
            name = next((n for n in DEFAULT_SOURCE_ORDER if n in self.sources), None)
            if name is None:
                name = next(iter(self.sources))
        try:
            return self.sources[name]
        except KeyError:
            raise KeyError(f'frame {self.frame_id} has no feature source {name!r}') from None


def _resolve(base: Path, rel_path: str) -> Path:
    p = Path(rel_path)
    return p if p.is_absolute() else base / p


def record_from_dict(obj: dict, base, origin=None) -> FrameRecord:
    base = Path(base)
    origin = origin or base
    fid = str(io._field(obj, 'id', origin))
    rel = io.read_relative_raw(_resolve(base, io._field(obj, 'rel', origin)))
    intr = io.read_intrinsics(_resolve(base, io._field(obj, 'intrinsics', origin)))
    gt = io.read_metric_pgm(_resolve(base, obj['gt'])) if obj.get('gt') else None
    sources = {}
    raw_sources = io._field(obj, 'sources', origin)
    if not isinstance(raw_sources, dict) or not raw_sources:
        raise io.FormatError(origin, "field 'sources' must name at least one feature source")
    for name, src in sorted(raw_sources.items()):
        feats = io.read_features_csv(_resolve(base, io._field(src, 'features', f'{origin} [{name}]')))
        chain = io.read_pose_chain(_resolve(base, io._field(src, 'poses', f'{origin} [{name}]')))
        sources[name] = (feats, chain)
    return FrameRecord(fid, rel, intr, sources, gt)


def load_record(path) -> FrameRecord:
    path = Path(path)
    return record_from_dict(io.read_json(path), path.parent, path)


def load_manifest(path):
    """Return ``(environment_name, [FrameRecord, ...])``."""
    path = Path(path)
    obj = io.read_json(path)
    frames = io._field(obj, 'frames', path)
    env = str(obj.get('environment', path.parent.name))
    return env, [record_from_dict(f, path.parent, path) for f in frames]


def synthesize_environment(out_dir, preset: str = 'corridor', n_frames: int = 100,
                           distortion=None, seed: int = 0, width: int = 64, height: int = 64,
                           n_features: int = 150, feature_noise_sigma: float = 0.05,
                           keyframe_lag: int = 2, init_frames: int = 1, init_features: int = 5,
                           name: str = None) -> Path:
    """Render a synthetic environment to disk and return its manifest path.

    Each frame gets two feature sources over the same sampled pixels: ``gt``
    (exact 3D points) and ``vins`` (points perturbed by ``feature_noise_sigma``).
    The first ``init_frames`` frames of the ``vins`` source carry only
    ``init_features`` points, standing in for an initializing odometry.
    Output is a pure function of the arguments.
    """
    import numpy as np

    from . import synth
    from .core import CameraIntrinsics

    out = Path(out_dir)
    (out / 'frames').mkdir(parents=True, exist_ok=True)
    spec = distortion or synth.DistortionSpec.curved()
    spec = replace(spec, feature_noise_sigma=feature_noise_sigma)
    intr = CameraIntrinsics(0.625 * width, 0.625 * width, (width - 1) / 2, (height - 1) / 2,
                            width, height)
    io.write_intrinsics(out / 'intrinsics.json', intr)
    scene = synth.make_scene(preset, seed)
    ext = synth.CAMERA_EXTRINSIC
    records = []
    for k in range(n_frames):
        fid = f'{k:06d}'
        ss = np.random.SeedSequence([seed, k])
        s_rel, s_feat, s_noise = (int(c.generate_state(1)[0]) for c in ss.spawn(3))
        T_WBj = synth.body_pose(k)
        T_WBi = synth.body_pose(max(k - keyframe_lag, 0))
        gt = synth.quantize(synth.render_gt_depth(scene, T_WBj @ ext, intr))
        rel = synth.synthesize_relative(gt, spec, s_rel)
        exact, chain = synth.sample_sparse_features(gt, intr, n_features, 0.0, s_feat, T_WBj, ext, T_WBi)
        noise = np.random.default_rng(s_noise).standard_normal((len(exact), 3))
        noisy = [type(f)(f.position + feature_noise_sigma * n, f.frame_id)
                 for f, n in zip(exact, noise)]
        if k < init_frames:
            noisy = noisy[:init_features]
        paths = {'rel': f'frames/{fid}_rel.f32', 'gt': f'frames/{fid}_gt.pgm',
                 'poses': f'frames/{fid}_poses.json'}
        io.write_relative_raw(out / paths['rel'], rel)
        io.write_metric_pgm(out / paths['gt'], gt)
        io.write_pose_chain(out / paths['poses'], chain)
        for src, feats in (('gt', exact), ('vins', noisy)):
            io.write_features_csv(out / f'frames/{fid}_features_{src}.csv', feats)
        record = {'id': fid, 'rel': paths['rel'], 'gt': paths['gt'], 'intrinsics': 'intrinsics.json',
                  'sources': {src: {'features': f'frames/{fid}_features_{src}.csv',
                                    'poses': paths['poses']} for src in ('gt', 'vins')}}
        io.write_json(out / f'frame_{fid}.json', record)
        records.append(record)
    manifest = out / 'manifest.json'
    io.write_json(manifest, {'format': MANIFEST_FORMAT, 'environment': name or preset,
                             'preset': preset, 'seed': seed, 'distortion': spec.to_dict(),
                             'feature_noise_sigma': feature_noise_sigma, 'frames': records})
    return manifest
