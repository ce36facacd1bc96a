"""Acceptance criteria, one test per criterion.

Each test is tagged with ``acceptance(number, name)``; the conftest hook prints a
PASS/FAIL line per criterion at the end of the run. Runtime limits are checked
on the work itself, excluding fixture setup.
"""

import csv
import time

import numpy as np
import pytest

from metricdepth import bspline, cli, synth
from metricdepth.core import CameraIntrinsics, MetricDepthImage, RelativeDepthImage, RigidTransform
from metricdepth.fitters import (
    fit_exponential,
    fit_monotonic_smoothing_spline,
    fit_monotonic_spline,
    fit_polynomial,
    fit_smoothing_spline,
    fit_unconstrained_spline,
)
from metricdepth.geometry import PoseChain, back_project, resolve_fractional_pixel, transform_feature
from metricdepth.metrics import abs_rel, delta1
from metricdepth.pipeline import RescaleConfig, rescale_frame

from oracles import abs_rel_loop, chain_oracle, delta1_loop, neighbor_oracle, random_rotation

SIZES = (10, 100, 1000, 10000)
LIMIT_MESSAGES = ('residual bound unreachable; returning least-squares limit',
                  'residual bound inactive')


class Clock:
    """Times a block and records it as the ``timed`` test property."""

    def __init__(self, record=None):
        self.record = record

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if self.record:
            self.record('timed', self.elapsed)


# -- 1 -------------------------------------------------------------------------------

@pytest.mark.acceptance(1, 'basis correctness')
def test_basis_correctness(record_property):
    rng = np.random.default_rng(1)
    with Clock(record_property) as clock:
        uniform = bspline.open_uniform_knots(0.0, 1.0, 10)
        inner = np.sort(rng.uniform(-2.0, 3.0, 9))
        irregular = np.concatenate([[-2.0] * 4, inner, [3.0] * 4])
        for knots in (uniform, irregular):
            x = rng.uniform(knots[0], knots[-1], 1000)
            x[:2] = knots[0], knots[-1]
            B = bspline.build_basis_matrix(x, knots)
            assert np.max(np.abs(B.sum(axis=1) - 1.0)) < 1e-12
            assert B.min() >= 0.0
            for j in range(B.shape[1]):
                lo, hi = knots[j], knots[j + 4]
                outside = (x < lo) | (x > hi)
                assert np.all(B[outside, j] == 0.0)
        for n in (4, 13, 40):
            i = np.arange(n, dtype=float)
            D3 = bspline.difference_matrix(3, n)
            for a, b, c in rng.integers(-50, 50, (20, 3)):
                assert np.all(D3 @ (a + b * i + c * i ** 2) == 0.0)
    assert clock.elapsed < 1.0


# -- 2 -------------------------------------------------------------------------------

def _rel_coeff_error(est, true):
    return np.max(np.abs(np.asarray(est) - true)) / np.max(np.abs(true))


SPLINE_SIZE = 128
INTR = CameraIntrinsics(80.0, 80.0, 63.5, 63.5, SPLINE_SIZE, SPLINE_SIZE)


def _spline_recovery(n, rng):
    """Pipeline AbsRel of a monotone spline fit on a frame warped by a spline in its own space.

    The relative disparity image spans exactly ``[0.5, 1.5]`` and the features
    include both extreme pixels, so the fitter's knot vector matches the one
    the warp was built on.
    """
    segments = min(10, n - 3)
    d_rel = rng.uniform(0.5, 1.5, (SPLINE_SIZE, SPLINE_SIZE))
    d_rel.flat[:2] = 0.5, 1.5
    knots = bspline.knots_for_samples([0.5, 1.5], segments)
    steps = rng.uniform(0.2, 1.0, segments + 3).cumsum()
    coeffs = 0.1 + 1.9 * (steps - steps[0]) / (steps[-1] - steps[0])
    d_met = bspline.build_basis_matrix(d_rel.ravel(), knots) @ coeffs
    gt = MetricDepthImage(1.0 / d_met.reshape(d_rel.shape))
    rel = RelativeDepthImage(1.0 / d_rel)

    flat = d_rel.ravel()
    order = np.argsort(flat)
    targets = np.searchsorted(flat[order], np.linspace(0.5, 1.5, n))
    picks = list(dict.fromkeys([0, 1] + [int(order[min(t, flat.size - 1)]) for t in targets]))
    rest = np.setdiff1d(np.arange(flat.size), picks)
    picks += list(rng.choice(rest, n - len(picks), replace=False))
    rows, cols = np.unravel_index(np.array(picks[:n]), d_rel.shape)
    feats = [back_project((c, r), gt.data[r, c], INTR) for r, c in zip(rows, cols)]

    cfg = RescaleConfig('monotonic_spline', knot_count=segments)
    res = rescale_frame(rel, feats, PoseChain(), INTR, cfg)
    assert not res.skipped and len(res.pairs) == n
    assert res.report.converged
    return abs_rel(res.metric_image, gt)


@pytest.mark.acceptance(2, 'exact-family recovery')
def test_exact_family_recovery(record_property):
    rng = np.random.default_rng(2)
    with Clock(record_property) as clock:
        for n in SIZES:
            x = rng.uniform(0.1, 1.0, n)
            for degree in range(1, 6):
                true = rng.uniform(-2.0, 2.0, degree + 1)
                model = fit_polynomial((x, np.polynomial.polynomial.polyval(x, true)), degree)
                assert _rel_coeff_error(model.coefficients, true) < 1e-8
            a, b = rng.uniform(0.2, 3.0), rng.uniform(-2.0, 2.0)
            model = fit_exponential((x, a * np.exp(b * x)))
            assert abs(model.a - a) / abs(a) < 1e-8
            assert abs(model.b - b) / abs(b) < 1e-8
            assert _spline_recovery(n, rng) < 1e-4
    assert clock.elapsed < 5.0


# -- 3 -------------------------------------------------------------------------------

def _dip_data(n=200, seed=0):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0.1, 1.0, n))
    y = 0.2 + x ** 2 - 0.15 * np.exp(-((x - 0.55) / 0.05) ** 2) + rng.normal(0, 0.003, n)
    return x, y


@pytest.mark.acceptance(3, 'monotonicity enforcement')
def test_monotonicity_enforcement(record_property):
    with Clock(record_property) as clock:
        for seed in range(5):
            x, y = _dip_data(seed=seed)
            ref = fit_unconstrained_spline((x, y))
            assert np.diff(ref.coeffs).min() < 0
            for fit in (fit_monotonic_spline, fit_monotonic_smoothing_spline):
                m = fit((x, y))
                scale = np.max(np.abs(m.coeffs))
                assert np.diff(m.coeffs).min() >= -1e-8 * scale
                # round-off tolerance, the same bound as on the coefficients
                grid = m.predict(np.linspace(*m.domain, 1000))
                assert np.diff(grid).min() >= -1e-8 * scale
                assert ref.report.residual_sum_squares <= m.report.residual_sum_squares
    assert clock.elapsed < 2.0


# -- 4 -------------------------------------------------------------------------------

@pytest.mark.acceptance(4, 'smoothing-spline constraint activity')
def test_smoothing_constraint_activity(record_property):
    active = 0
    with Clock(record_property) as clock:
        for seed in range(6):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(30, 400))
            x = rng.uniform(0.1, 1.0, n)
            y = np.sin(6 * x) + x + rng.normal(0, 0.05, n)
            for penalty in ('jump', 'diff3'):
                for s in 0.05 ** 2 * n * np.logspace(-2, 2, 9):
                    m = fit_smoothing_spline((x, y), s=s, penalty=penalty)
                    if m.report.message:
                        assert m.report.message in LIMIT_MESSAGES
                    else:
                        assert abs(m.report.residual_sum_squares - s) <= 1e-3 * s
                        active += 1
    assert active >= 30
    assert clock.elapsed < 5.0


# -- 5 -------------------------------------------------------------------------------

def _random_transform(rng):
    return RigidTransform(random_rotation(rng), rng.uniform(-5.0, 5.0, 3))


@pytest.mark.acceptance(5, 'geometry oracle equivalence')
def test_geometry_oracle_equivalence(record_property):
    rng = np.random.default_rng(5)
    # input generation is not part of the timed check
    chains = [PoseChain(*(_random_transform(rng) for _ in range(4))) for _ in range(10000)]
    points = rng.uniform(-10.0, 10.0, (10000, 3))
    with Clock(record_property) as clock:
        worst = 0.0
        for chain, p in zip(chains, points):
            expected = chain_oracle(p, chain.T_WBi, chain.T_BiCi, chain.T_WBj, chain.T_BjCj)
            worst = max(worst, np.max(np.abs(transform_feature(p, chain) - expected)))
        assert worst < 1e-9

        H, W = 12, 15
        data = rng.integers(1, 6, (H, W)).astype(float)  # small range forces ties
        valid = rng.uniform(size=(H, W)) > 0.25
        rel = RelativeDepthImage(data, valid)
        for i in range(1000):
            u, v = rng.uniform(-0.5, W - 0.5), rng.uniform(-0.5, H - 0.5)
            if i % 4 == 1:
                u = float(rng.integers(0, W))
            if i % 4 == 2:
                v = float(rng.integers(0, H)) + 1e-12
            expected = neighbor_oracle(u, v, data, valid)
            if expected is None:
                with pytest.raises(LookupError):
                    resolve_fractional_pixel((u, v), rel)
            else:
                assert resolve_fractional_pixel((u, v), rel) == expected
    assert clock.elapsed < 2.0


# -- 6 -------------------------------------------------------------------------------

@pytest.mark.acceptance(6, 'metric oracles')
def test_metric_oracles():
    for seed in range(3):
        rng = np.random.default_rng(seed)
        gt = rng.uniform(0.01, 80.0, (64, 64))
        pred = gt * rng.uniform(0.6, 1.6, (64, 64))
        gv, pv = rng.uniform(size=(2, 64, 64)) > 0.1
        P, G = MetricDepthImage(np.where(pv, pred, 0), pv), MetricDepthImage(np.where(gv, gt, 0), gv)
        for den in ('prediction', 'ground_truth'):
            assert abs(abs_rel(P, G, den) - abs_rel_loop(pred, pv, gt, gv, den)) <= 1e-12
        assert abs(delta1(P, G) - delta1_loop(pred, pv, gt, gv)) <= 1e-12

    gt = np.full((4, 4), 2.0)
    pred = gt.copy()
    pred[0, 0] = 2.5      # ratio exactly 1.25
    pred[0, 1] = 1.6      # gt / pred exactly 1.25
    pred[0, 2] = 2.4999   # just inside
    assert 2.5 / 2.0 == 1.25 and 2.0 / 1.6 == 1.25
    assert delta1(MetricDepthImage(pred), MetricDepthImage(gt)) == 14 / 16


# -- 7 -------------------------------------------------------------------------------

GATE_INTR = CameraIntrinsics(40.0, 40.0, 31.5, 31.5, 64, 64)


def _gate_frame():
    scene = synth.make_scene('rooms', 0)
    gt = synth.quantize(synth.render_gt_depth(scene, synth.body_pose(0) @ synth.CAMERA_EXTRINSIC,
                                              GATE_INTR))
    rel = synth.synthesize_relative(gt, synth.DistortionSpec.curved(), 0)
    rows, cols = np.nonzero(gt.valid)
    return gt, rel, rows, cols


@pytest.mark.acceptance(7, 'pipeline gating')
def test_pipeline_gating():
    gt, rel, rows, cols = _gate_frame()
    for n, skipped in ((9, True), (10, False)):
        pick = np.linspace(0, rows.size - 1, n).astype(int)
        feats = [back_project((c, r), gt.data[r, c], GATE_INTR) for r, c in zip(rows[pick], cols[pick])]
        res = rescale_frame(rel, feats, PoseChain(), GATE_INTR, RescaleConfig())
        assert res.skipped is skipped
        assert (res.metric_image is None) is skipped
        if skipped:
            assert res.reason.startswith('insufficient features')

    # extrapolating fits on few features push many pixels out of range
    rng = np.random.default_rng(7)
    seen_invalid = 0
    for strategy, degree in (('polynomial', 5), ('polynomial', 1), ('exponential', 1),
                             ('smoothing_spline', 1), ('monotonic_spline', 1)):
        for _ in range(5):
            pick = rng.choice(rows.size, 10, replace=False)
            feats = [back_project((c, r), gt.data[r, c] * rng.uniform(0.3, 3.0), GATE_INTR)
                     for r, c in zip(rows[pick], cols[pick])]
            res = rescale_frame(rel, feats, PoseChain(), GATE_INTR,
                                RescaleConfig(strategy, degree=degree))
            if res.skipped:
                continue
            img = res.metric_image
            assert np.all((img.data[img.valid] >= 0.05) & (img.data[img.valid] <= 65.0))
            seen_invalid += np.count_nonzero(rel.valid & ~img.valid)
    assert seen_invalid > 0


# -- 8 and 9 -------------------------------------------------------------------------

PRESETS = ('corridor', 'rooms', 'forest')


@pytest.fixture(scope='module')
def bench_envs(tmp_path_factory):
    root = tmp_path_factory.mktemp('bench')
    start = time.perf_counter()
    envs = []
    for seed, preset in enumerate(PRESETS):
        out = root / preset
        assert cli.main(['synth', '--preset', preset, '--frames', '100', '--seed', str(seed),
                         '--distortion', 'curved', '--feature-noise', '0.05',
                         '--out', str(out)]) == 0
        envs.append(f'{preset}={out / "manifest.json"}')
    return root, envs, time.perf_counter() - start


def _bench(root, envs, name, jobs):
    out = root / name
    args = ['bench', '--out', str(out), '--jobs', str(jobs)]
    for e in envs:
        args += ['--env', e]
    assert cli.main(args) == 0
    return out / 'metrics.csv'


def _weighted(csv_path, source):
    with open(csv_path, newline='') as fh:
        return {row['strategy']: float(row['abs_rel']) for row in csv.DictReader(fh)
                if row['environment'] == 'weighted_average' and row['source'] == source}


@pytest.mark.acceptance(8, 'qualitative ranking on synthetic benches')
def test_bench_ranking(bench_envs, capsys, record_property):
    root, envs, synth_time = bench_envs
    with Clock(record_property) as clock:
        csv_path = _bench(root, envs, 'run_a', jobs=1)
    print(capsys.readouterr().out)
    assert clock.elapsed < 60.0
    print(f'synth {synth_time:.1f} s, bench {clock.elapsed:.1f} s')
    wavg = _weighted(csv_path, 'vins')
    ms = wavg['monotonic-spline']
    for other in ('poly1', 'poly5', 'exponential'):
        assert ms <= wavg[other], (other, ms, wavg[other])


@pytest.mark.acceptance(9, 'determinism')
def test_bench_determinism(bench_envs):
    root, envs, _ = bench_envs
    first = root / 'run_a' / 'metrics.csv'
    if not first.exists():
        first = _bench(root, envs, 'run_a', jobs=1)
    parallel = _bench(root, envs, 'run_b', jobs=4)
    again = _bench(root, envs, 'run_c', jobs=1)
    assert first.read_bytes() == parallel.read_bytes() == again.read_bytes()
