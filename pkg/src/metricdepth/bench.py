"""Strategy x environment x feature-source benchmark tables."""

from __future__ import annotations

import csv
import io as _io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import io, metrics
from .core import EmptyOverlapError
from .dataset import load_manifest
from .pipeline import RescaleConfig, rescale_frame

SOURCES = ('gt', 'vins')
WEIGHTED = 'weighted_average'

CSV_FIELDS = ['strategy', 'environment', 'source', 'abs_rel', 'delta1', 'n_frames', 'n_evaluated',
              'n_skipped', 'n_failed', 'n_valid_pixels', 'coverage', 'absrel_denominator']


@dataclass(frozen=True)
class BenchmarkSpec:
    """Environments as ``(name, manifest_path)`` pairs and the strategies to run."""

    environments: tuple
    strategies: tuple
    out_dir: str = 'bench_out'
    sources: tuple = SOURCES
    absrel_denominator: str = 'prediction'

    def __post_init__(self):
        if not self.environments:
            raise ValueError('a benchmark needs at least one environment')
        if not self.strategies:
            raise ValueError('a benchmark needs at least one strategy')

    @classmethod
    def from_json(cls, path):
        """Load ``{"environments": {name: manifest}, "strategies": [name or {...}], ...}``.

        Strategy objects accept ``{"name": "poly3"}`` plus any
        :class:`RescaleConfig` field. Relative manifest paths resolve against
        the JSON file.
        """
        path = Path(path)
        obj = io.read_json(path)
        envs = io._field(obj, 'environments', path)
        envs = tuple((name, str(path.parent / p)) for name, p in envs.items())
        strategies = []
        for s in io._field(obj, 'strategies', path):
            if isinstance(s, str):
                strategies.append(RescaleConfig.from_name(s))
            else:
                s = dict(s)
                strategies.append(RescaleConfig.from_name(s.pop('name'), **s))
        return cls(envs, tuple(strategies), str(obj.get('out_dir', 'bench_out')),
                   tuple(obj.get('sources', SOURCES)),
                   obj.get('absrel_denominator', 'prediction'))


@dataclass
class Cell:
    """Pooled metrics of one strategy on one environment and source."""

    n_frames: int
    frame_metrics: list = field(default_factory=list)
    n_skipped: int = 0
    n_failed: int = 0

    @property
    def pooled(self):
        try:
            return metrics.pool(self.frame_metrics)
        except EmptyOverlapError:
            return None


def _evaluate(record, cfg, source, denominator):
    """Metrics of one frame, or a ('skipped' | 'failed', reason) marker."""
    try:
        feats, chain = record.source(source)
        res = rescale_frame(record.rel, feats, chain, record.intrinsics, cfg)
    except Exception as exc:  # isolate per-frame failures
        return 'failed', f'{type(exc).__name__}: {exc}'
    if res.skipped:
        return 'skipped', res.reason
    if record.gt is None:
        return 'failed', 'no ground truth'
    try:
        return 'ok', metrics.frame_metrics(res.metric_image, record.gt, denominator, cfg.clip)
    except EmptyOverlapError as exc:
        return 'failed', str(exc)


def run_benchmark(spec: BenchmarkSpec, jobs: int = 1) -> dict:
    """Evaluate every strategy on every environment and source.

    Returns
    -------
    dict
        ``{(strategy_label, environment, source): Cell}`` plus per-environment
        frame counts under the key ``'frame_counts'``.
    """
    cells, frame_counts = {}, {}
    pool = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for env_name, manifest in spec.environments:
            _, frames = load_manifest(manifest)
            frame_counts[env_name] = len(frames)
            for source in spec.sources:
                for cfg in spec.strategies:
                    cell = Cell(len(frames))
                    work = (lambda r, c=cfg, s=source: _evaluate(r, c, s, spec.absrel_denominator))
                    outcomes = pool.map(work, frames) if pool else map(work, frames)
                    for status, value in outcomes:
                        if status == 'ok':
                            cell.frame_metrics.append(value)
                        elif status == 'skipped':
                            cell.n_skipped += 1
                        else:
                            cell.n_failed += 1
                    cells[(cfg.label, env_name, source)] = cell
    finally:
        if pool:
            pool.shutdown()
    return {'cells': cells, 'frame_counts': frame_counts}


def weighted_rows(spec: BenchmarkSpec, result: dict) -> dict:
    """Frame-count weighted average across environments per (strategy, source)."""
    out = {}
    for cfg in spec.strategies:
        for source in spec.sources:
            per_env = []
            for env, _ in spec.environments:
                pooled = result['cells'][(cfg.label, env, source)].pooled
                if pooled is not None:
                    per_env.append((pooled, result['frame_counts'][env]))
            out[(cfg.label, source)] = metrics.weighted_average(per_env) if per_env else None
    return out


def _fmt(x):
    return '' if x is None else format(x, '.10g')


def metrics_csv(spec: BenchmarkSpec, result: dict) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(CSV_FIELDS)
    wavg = weighted_rows(spec, result)
    for cfg in spec.strategies:
        for source in spec.sources:
            for env, _ in spec.environments:
                cell = result['cells'][(cfg.label, env, source)]
                m = cell.pooled
                writer.writerow([cfg.label, env, source, _fmt(m and m.abs_rel), _fmt(m and m.delta1),
                                 cell.n_frames, len(cell.frame_metrics), cell.n_skipped, cell.n_failed,
                                 m.n_valid if m else 0, _fmt(m and m.coverage),
                                 spec.absrel_denominator])
            m = wavg[(cfg.label, source)]
            n = sum(result['frame_counts'].values())
            writer.writerow([cfg.label, WEIGHTED, source, _fmt(m and m.abs_rel), _fmt(m and m.delta1),
                             n, '', '', '', m.n_valid if m else 0, _fmt(m and m.coverage),
                             spec.absrel_denominator])
    return buf.getvalue()


def format_table(spec: BenchmarkSpec, result: dict) -> str:
    """Plain-text comparison table, one row per strategy.

    Column groups per environment (and the weighted average) hold AbsRel and
    Delta1 for each feature source.
    """
    wavg = weighted_rows(spec, result)
    groups = [env for env, _ in spec.environments] + ['Weighted Average']

    def value(label, group, source, attr):
        if group == 'Weighted Average':
            m = wavg[(label, source)]
        else:
            m = result['cells'][(label, group, source)].pooled
        return '-' if m is None else f'{getattr(m, attr):.3f}'

    srcs = [s.upper() for s in spec.sources]
    half = max(len('AbsRel'), 6 * len(srcs) - 1)
    group_w = 2 * half + 3
    name_w = max(26, max(len(c.label) for c in spec.strategies) + 2)

    def row(name, cells):
        return f'{name:<{name_w}}' + ''.join(f'| {c:<{group_w}} ' for c in cells) + '|'

    def pair(a, b):
        return f'{a:>{half}} | {b:>{half}}'

    def per_source(items):
        return ' '.join(f'{v:>5}' for v in items)

    lines = [f'AbsRel denominator: {spec.absrel_denominator}',
             row('', [g[:group_w] for g in groups]),
             row('', [pair('AbsRel', 'Delta1')] * len(groups)),
             row('Fitting technique', [pair(per_source(srcs), per_source(srcs))] * len(groups))]
    lines.append('-' * len(lines[-1]))
    for cfg in spec.strategies:
        cells = [pair(per_source(value(cfg.label, g, s, 'abs_rel') for s in spec.sources),
                      per_source(value(cfg.label, g, s, 'delta1') for s in spec.sources))
                 for g in groups]
        lines.append(row(cfg.label, cells))
    skipped = {s: sum(c.n_skipped for (l, e, so), c in result['cells'].items() if so == s)
               for s in spec.sources}
    failed = sum(c.n_failed for c in result['cells'].values())
    lines.append('')
    lines.append('frames: ' + ', '.join(f'{e}={n}' for e, n in result['frame_counts'].items())
                 + ' | skipped: ' + ', '.join(f'{s}={n}' for s, n in skipped.items())
                 + f' | failed: {failed}')
    return '\n'.join(lines) + '\n'


def write_outputs(spec: BenchmarkSpec, result: dict) -> tuple:
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, table_path = out / 'metrics.csv', out / 'table.txt'
    csv_path.write_text(metrics_csv(spec, result))
    table_path.write_text(format_table(spec, result))
    return csv_path, table_path
