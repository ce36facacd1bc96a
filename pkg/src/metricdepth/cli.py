"""Command-line front end.

Subcommands::

    metricdepth synth    render a synthetic environment (frame records + manifest)
    metricdepth rescale  rescale one frame record to metric depth
    metricdepth bench    strategy x environment x source comparison table
    metricdepth inspect  print a frame's disparity pairs as CSV

Exit codes: 0 success, 1 input error, 2 frame skipped.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import bench, io, metrics, synth
from .core import ConfigError, DomainError, EmptyOverlapError
from .dataset import load_record, synthesize_environment
from .fitters import DEFAULT_KAPPA, DEFAULT_KNOTS, DEFAULT_LAMBDA
from .geometry import build_disparity_pairs
from .pipeline import RescaleConfig, _as_depth, rescale_frame

EXIT_OK, EXIT_INPUT, EXIT_SKIPPED = 0, 1, 2

DEFAULT_BENCH_STRATEGIES = ('poly1', 'poly2', 'poly3', 'poly4', 'poly5', 'exponential',
                            'smoothing-spline', 'monotonic-smoothing-spline', 'monotonic-spline')


class InputError(Exception):
    """Bad command-line input; reported with exit code 1."""


# -- argument helpers ---------------------------------------------------------------

def _floats(text, n=None):
    try:
        vals = [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise InputError(f'expected comma-separated numbers, got {text!r}') from None
    if n is not None and len(vals) != n:
        raise InputError(f'expected {n} numbers, got {text!r}')
    return vals


def parse_distortion(text: str, noise_sigma: float = 0.0) -> synth.DistortionSpec:
    """Parse a distortion flag.

    Accepted forms: ``curved``, ``identity``, ``affine:A,B``,
    ``exponential:A,B``, ``spline:SEED``, ``spline:c0,c1,...`` (coefficients
    on ``[0, 1]``) and ``piecewise:x0/y0,x1/y1,...``.
    """
    kind, _, arg = text.partition(':')
    kind = kind.strip().lower()
    noise = {'noise_sigma': noise_sigma}
    try:
        if kind == 'curved':
            return synth.DistortionSpec.curved(**noise)
        if kind == 'identity':
            return synth.DistortionSpec.affine(1.0, 0.0, **noise)
        if kind == 'affine':
            return synth.DistortionSpec.affine(*_floats(arg, 2), **noise)
        if kind in ('exp', 'exponential'):
            return synth.DistortionSpec.exponential(*_floats(arg, 2), **noise)
        if kind == 'spline':
            vals = _floats(arg)
            if len(vals) == 1:
                return synth.DistortionSpec.random_monotone_spline(int(vals[0]), **noise)
            return synth.DistortionSpec.monotone_spline(vals, **noise)
        if kind == 'piecewise':
            pts = [p.split('/') for p in arg.split(',') if p.strip()]
            if any(len(p) != 2 for p in pts):
                raise InputError(f'piecewise points must be x/y, got {arg!r}')
            return synth.DistortionSpec.piecewise([float(x) for x, _ in pts],
                                                  [float(y) for _, y in pts], **noise)
    except (DomainError, ValueError) as exc:
        raise InputError(f'invalid distortion {text!r}: {exc}') from None
    raise InputError(f'unknown distortion kind {kind!r}')


def _add_fit_args(p, many=False):
    g = p.add_argument_group('rescaling')
    if many:
        g.add_argument('--strategy', action='append', dest='strategies', metavar='NAME',
                       help='strategy label, repeatable (default: all nine table rows)')
    else:
        g.add_argument('--strategy', default='monotonic-spline',
                       help='poly<N>, exponential, smoothing-spline, '
                            'monotonic-smoothing-spline or monotonic-spline')
        g.add_argument('--degree', type=int, default=1, help='degree for --strategy poly')
    g.add_argument('--smoothing-s', type=float, default=None,
                   help='residual bound S for smoothing-spline (default: noise estimate)')
    g.add_argument('--lambda', dest='lam', type=float, default=DEFAULT_LAMBDA,
                   help='relative smoothness weight of the monotonic smoothing spline')
    g.add_argument('--kappa', type=float, default=DEFAULT_KAPPA, help='relative monotonicity weight')
    g.add_argument('--penalty', choices=('jump', 'diff3'), default='jump',
                   help='smoothing-spline roughness measure')
    g.add_argument('--knots', type=int, default=DEFAULT_KNOTS, help='number of knot segments')
    g.add_argument('--min-features', type=int, default=10, help='skip frames with fewer pairs')
    g.add_argument('--clip-min', type=float, default=0.05, help='metres')
    g.add_argument('--clip-max', type=float, default=65.0, help='metres')
    g.add_argument('--input-is-disparity', action='store_true',
                   help='relative rasters already hold disparity')
    g.add_argument('--absrel-denominator', choices=metrics.DENOMINATORS, default='prediction')


def _config(args, name=None) -> RescaleConfig:
    kw = dict(smoothing_s=args.smoothing_s, lam=args.lam, kappa=args.kappa, penalty=args.penalty,
              knot_count=args.knots, min_features=args.min_features,
              clip=(args.clip_min, args.clip_max), input_is_disparity=args.input_is_disparity)
    if name is None:
        name = args.strategy
        kw['degree'] = args.degree
    return RescaleConfig.from_name(name, **kw)


# -- subcommands --------------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = parse_distortion(args.distortion, args.rel_noise)
    if args.frames < 0:
        raise InputError('--frames must be non-negative')
    manifest = synthesize_environment(
        args.out, args.preset, args.frames, spec, args.seed, args.width, args.height,
        args.features, args.feature_noise, args.keyframe_lag, args.init_frames,
        name=args.name)
    print(manifest)
    return EXIT_OK


def cmd_rescale(args) -> int:
    cfg = _config(args)
    record = load_record(args.record)
    feats, chain = record.source(args.source)
    res = rescale_frame(record.rel, feats, chain, record.intrinsics, cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = out / record.frame_id
    report = {'frame_id': record.frame_id, 'strategy': cfg.label, 'source': args.source or 'default',
              'skipped': res.skipped, 'reason': res.reason, 'n_pairs': len(res.pairs),
              'dropped': dict(res.pairs.dropped), 'absrel_denominator': args.absrel_denominator}
    if not res.skipped:
        io.write_metric_pgm(f'{stem}_metric.pgm', res.metric_image)
        io.write_json(f'{stem}_model.json', res.model.to_dict())
        report['fit'] = res.report.to_dict()
        if record.gt is not None:
            try:
                fm = metrics.frame_metrics(res.metric_image, record.gt, args.absrel_denominator,
                                           cfg.clip)
                report.update(abs_rel=fm.abs_rel, delta1=fm.delta1, n_valid=fm.n_valid)
            except EmptyOverlapError as exc:
                report['metrics_error'] = str(exc)
    if args.plot:
        from .plot import write_fit_svg
        write_fit_svg(f'{stem}_fit.svg', res.pairs, res.model, f'{record.frame_id} {cfg.label}')
    io.write_json(f'{stem}_report.json', report)
    if res.skipped:
        print(f'skipped frame {record.frame_id}: {res.reason}', file=sys.stderr)
        return EXIT_SKIPPED
    summary = f'{record.frame_id}: {len(res.pairs)} pairs, {cfg.label}'
    if 'abs_rel' in report:
        summary += f', AbsRel {report["abs_rel"]:.4g}, Delta1 {report["delta1"]:.4g}'
    print(summary)
    return EXIT_OK


def _parse_env(text):
    name, sep, path = text.partition('=')
    if not sep:
        path, name = text, Path(text).parent.name
    if not name or not path:
        raise InputError(f'--env expects NAME=MANIFEST, got {text!r}')
    return name, path


def cmd_bench(args) -> int:
    if args.spec:
        spec = bench.BenchmarkSpec.from_json(args.spec)
        if args.out:
            spec = bench.BenchmarkSpec(spec.environments, spec.strategies, args.out, spec.sources,
                                       spec.absrel_denominator)
    else:
        if not args.env:
            raise InputError('bench needs --env NAME=MANIFEST or --spec FILE')
        names = args.strategies or DEFAULT_BENCH_STRATEGIES
        spec = bench.BenchmarkSpec(tuple(_parse_env(e) for e in args.env),
                                   tuple(_config(args, n) for n in names),
                                   args.out or 'bench_out', tuple(args.sources.split(',')),
                                   args.absrel_denominator)
    result = bench.run_benchmark(spec, args.jobs)
    csv_path, table_path = bench.write_outputs(spec, result)
    print(table_path.read_text(), end='')
    print(f'wrote {csv_path} and {table_path}')
    return EXIT_OK


def cmd_inspect(args) -> int:
    record = load_record(args.record)
    feats, chain = record.source(args.source)
    clip = (args.clip_min, args.clip_max)
    rel = _as_depth(record.rel, args.input_is_disparity)
    pairs = build_disparity_pairs(feats, chain, record.intrinsics, rel, clip)
    writer = csv.writer(sys.stdout, lineterminator='\n')
    writer.writerow(['row', 'col', 'd_rel', 'd_met'])
    for (r, c), x, y in zip(pairs.pixels, pairs.d_rel, pairs.d_met):
        writer.writerow([int(r), int(c), repr(float(x)), repr(float(y))])
    dropped = ', '.join(f'{k}={v}' for k, v in sorted(pairs.dropped.items()))
    print(f'# {len(pairs)} pairs; dropped: {dropped or "none"}', file=sys.stderr)
    return EXIT_OK


# -- entry point --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='metricdepth', description=__doc__.split('\n')[0])
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', help='render a synthetic environment')
    p.add_argument('--preset', choices=sorted(synth.PRESETS), default='corridor')
    p.add_argument('--frames', type=int, default=100)
    p.add_argument('--distortion', default='curved', help='see parse_distortion (default: curved)')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', required=True)
    p.add_argument('--name', help='environment name in the manifest (default: preset)')
    p.add_argument('--width', type=int, default=64)
    p.add_argument('--height', type=int, default=64)
    p.add_argument('--features', type=int, default=150)
    p.add_argument('--feature-noise', type=float, default=0.05, help='metres, vins source only')
    p.add_argument('--rel-noise', type=float, default=0.0, help='multiplicative relative noise')
    p.add_argument('--keyframe-lag', type=int, default=2)
    p.add_argument('--init-frames', type=int, default=1,
                   help='leading frames whose vins source has only 5 features')
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('rescale', help='rescale one frame record')
    p.add_argument('record')
    p.add_argument('--source', help='feature source in the record (default: vins, then gt)')
    p.add_argument('--out', default='.')
    p.add_argument('--plot', action='store_true', help='also write an SVG of the fit')
    _add_fit_args(p)
    p.set_defaults(func=cmd_rescale)

    p = sub.add_parser('bench', help='benchmark strategies over environments')
    p.add_argument('--env', action='append', metavar='NAME=MANIFEST')
    p.add_argument('--spec', help='JSON benchmark spec (overrides --env/--strategy)')
    p.add_argument('--sources', default=','.join(bench.SOURCES))
    p.add_argument('--out', default=None)
    p.add_argument('--jobs', type=int, default=1)
    _add_fit_args(p, many=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser('inspect', help="print a frame's disparity pairs")
    p.add_argument('record')
    p.add_argument('--source')
    p.add_argument('--clip-min', type=float, default=0.05)
    p.add_argument('--clip-max', type=float, default=65.0)
    p.add_argument('--input-is-disparity', action='store_true')
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, io.FormatError, ConfigError, DomainError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f'error: {msg}', file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f'error: {exc.filename or ""}: {exc.strerror or exc}', file=sys.stderr)
        return EXIT_INPUT


if __name__ == '__main__':
    sys.exit(main())
