import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from metricdepth.core import EmptyOverlapError, MetricDepthImage
from metricdepth.metrics import (
    FrameMetrics,
    abs_rel,
    delta1,
    frame_metrics,
    overlap_mask,
    pool,
    weighted_average,
)

from oracles import abs_rel_loop, delta1_loop


def one(v):
    return MetricDepthImage(np.array([[float(v)]]))


def random_pair(rng, shape):
    gt = rng.uniform(0.02, 70, shape)
    pred = gt * rng.lognormal(0, 0.2, shape)
    pv = rng.random(shape) > 0.1
    gv = rng.random(shape) > 0.1
    return (MetricDepthImage(np.where(pv, pred, 0), pv), MetricDepthImage(np.where(gv, gt, 0), gv))


def test_perfect_prediction():
    img = MetricDepthImage(np.full((3, 3), 4.0))
    assert abs_rel(img, img) == 0.0 and delta1(img, img) == 1.0


def test_as_printed_denominator():
    assert abs_rel(one(2), one(1)) == 0.5
    assert abs_rel(one(2), one(1), 'ground_truth') == 1.0


def test_delta1_strict_boundary():
    gt = MetricDepthImage(np.array([[2.0, 4.0, 4.0]]))
    pred = MetricDepthImage(np.array([[2.5, 5.0, 4.9]]))  # ratios 1.25, 1.25, 1.225
    assert delta1(pred, gt) == pytest.approx(1 / 3)
    assert delta1(gt, pred) == pytest.approx(1 / 3)


@pytest.mark.parametrize('shape', [(32, 32), (64, 64)])
@pytest.mark.parametrize('seed', [0, 1])
def test_metrics_match_loop_oracle(shape, seed):
    pred, gt = random_pair(np.random.default_rng(seed), shape)
    for denom in ('prediction', 'ground_truth'):
        ref = abs_rel_loop(pred.data, pred.valid, gt.data, gt.valid, denom)
        assert abs(abs_rel(pred, gt, denom) - ref) <= 1e-12
    assert abs(delta1(pred, gt) - delta1_loop(pred.data, pred.valid, gt.data, gt.valid)) <= 1e-12


def test_evaluation_excludes_out_of_range_ground_truth():
    gt = MetricDepthImage(np.array([[0.01, 1.0, 70.0]]))
    pred = MetricDepthImage(np.array([[5.0, 1.0, 5.0]]))
    assert overlap_mask(pred, gt).tolist() == [[False, True, False]]
    assert abs_rel(pred, gt) == 0.0


def test_empty_overlap():
    pred = MetricDepthImage(np.ones((2, 2)), np.zeros((2, 2), bool))
    with pytest.raises(EmptyOverlapError):
        abs_rel(pred, MetricDepthImage(np.ones((2, 2))))


def test_shape_mismatch():
    with pytest.raises(ValueError):
        abs_rel(MetricDepthImage(np.ones((2, 2))), MetricDepthImage(np.ones((2, 3))))


@given(st.integers(0, 2 ** 32 - 1))
def test_delta1_is_symmetric_inside_clip_range(seed):
    rng = np.random.default_rng(seed)
    z = rng.uniform(0.1, 30, (8, 8))
    p = np.clip(z * rng.lognormal(0, 0.3, (8, 8)), 0.05, 65.0)
    a, b = MetricDepthImage(z), MetricDepthImage(p)
    assert delta1(a, b) == delta1(b, a)


def test_clip_applies_to_ground_truth_only():
    # an out-of-range value counts as a prediction but not as ground truth
    near, far = MetricDepthImage(np.array([[2.0, 60.0]])), MetricDepthImage(np.array([[2.0, 70.0]]))
    assert frame_metrics(far, near).n_valid == 2
    assert frame_metrics(near, far).n_valid == 1


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.5, 2.0))
def test_ground_truth_abs_rel_is_scale_covariant(seed, s):
    rng = np.random.default_rng(seed)
    z = rng.uniform(0.2, 20, (8, 8))
    p = z * rng.lognormal(0, 0.3, (8, 8))
    base = abs_rel(MetricDepthImage(p), MetricDepthImage(z), 'ground_truth')
    scaled = abs_rel(MetricDepthImage(s * p), MetricDepthImage(s * z), 'ground_truth')
    assert scaled == pytest.approx(base, rel=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_pooling_equals_union(seed):
    rng = np.random.default_rng(seed)
    pa, ga = random_pair(rng, (6, 7))
    pb, gb = random_pair(rng, (6, 5))
    union_p = MetricDepthImage(np.hstack([pa.data, pb.data]), np.hstack([pa.valid, pb.valid]))
    union_g = MetricDepthImage(np.hstack([ga.data, gb.data]), np.hstack([ga.valid, gb.valid]))
    try:
        fa, fb = frame_metrics(pa, ga), frame_metrics(pb, gb)
    except EmptyOverlapError:
        return
    pooled = pool([fa, fb])
    assert pooled.abs_rel == pytest.approx(abs_rel(union_p, union_g), rel=1e-12)
    assert pooled.delta1 == pytest.approx(delta1(union_p, union_g), rel=1e-12)
    assert pooled.n_valid == fa.n_valid + fb.n_valid


def test_weighted_average_single_environment():
    m = FrameMetrics(0.12, 0.9, 100)
    out = weighted_average([(m, 5)])
    assert (out.abs_rel, out.delta1) == (0.12, 0.9)


def test_weighted_average_frame_counts():
    out = weighted_average([(FrameMetrics(0.1, 0.9, 1), 846), (FrameMetrics(0.2, 0.8, 1), 1015)])
    assert out.abs_rel == pytest.approx((846 * 0.1 + 1015 * 0.2) / 1861, abs=1e-15)


def test_weighted_average_three_environments():
    envs = [(FrameMetrics(0.031, 0.97, 10), 100), (FrameMetrics(0.044, 0.95, 10), 80),
            (FrameMetrics(0.052, 0.91, 10), 120)]
    out = weighted_average(envs)
    # hand computed: (3.1 + 3.52 + 6.24) / 300 and (97 + 76 + 109.2) / 300
    assert abs(out.abs_rel - 12.86 / 300) < 1e-12
    assert abs(out.delta1 - 282.2 / 300) < 1e-12


def test_weighted_average_errors():
    with pytest.raises(EmptyOverlapError):
        weighted_average([])
    with pytest.raises(ValueError):
        weighted_average([(FrameMetrics(0.1, 0.9, 1), 0)])
