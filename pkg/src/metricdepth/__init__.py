"""Metric depth from relative monocular depth and a sparse metric feature map.

A relative depth image is converted to disparity, paired with metric
disparities of sparse 3D features projected into the frame, and a scalar map
``f(d_rel) -> d_met`` is fitted and applied to every pixel.
"""

from .core import (
    CLIP_MAX,
    CLIP_MIN,
    BehindCameraError,
    CameraIntrinsics,
    ConfigError,
    DegenerateDataError,
    DisparityPairSet,
    DomainError,
    EmptyOverlapError,
    FeaturePoint3D,
    MetricDepthImage,
    NoValidNeighborError,
    RelativeDepthImage,
    RigidTransform,
    decode_u16_mm,
    depth_to_disparity,
    disparity_to_depth,
    encode_u16_mm,
)
from .fitters import (
    FitReport,
    RescaleModel,
    evaluate,
    fit_exponential,
    fit_monotonic_smoothing_spline,
    fit_monotonic_spline,
    fit_polynomial,
    fit_smoothing_spline,
)
from .geometry import PoseChain, build_disparity_pairs, project_to_pixel, transform_feature
from .metrics import abs_rel, delta1, weighted_average
from .pipeline import FrameResult, RescaleConfig, rescale_frame, rescale_sequence

__version__ = '0.1.0'
