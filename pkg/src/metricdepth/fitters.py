"""Rescaling models mapping relative disparity to metric disparity.

Every ``fit_*`` function takes a :class:`~metricdepth.core.DisparityPairSet`
(or a ``(d_rel, d_met)`` tuple of arrays) and returns a fitted model whose
``report`` attribute carries a :class:`FitReport`.

The spline penalty weights ``lam`` and ``kappa`` are relative: they are
multiplied by ``||B||_F^2 / ||D||_F^2`` for the basis matrix ``B`` and the
penalized operator ``D``, which makes them independent of the sample count and
of the disparity units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.linalg import null_space

from . import bspline
from .core import DegenerateDataError, DisparityPairSet, DomainError

STRATEGIES = ('polynomial', 'exponential', 'smoothing_spline',
              'monotonic_smoothing_spline', 'monotonic_spline')

DEFAULT_KNOTS = 10
DEFAULT_LAMBDA = 1.0
DEFAULT_KAPPA = 1e10
MAX_IRLS_ITER = 50
# relative weight of the ridge that keeps data-starved columns solvable
RIDGE = 1e-10
# a penalized difference this close to zero (relative to max|beta|) stays
# penalized; without it pinned entries round to +0 and the mask oscillates
PIN_TOL = 1e-6


@dataclass(frozen=True)
class FitReport:
    residual_sum_squares: float
    n_samples: int
    iterations: int = 1
    converged: bool = True
    message: str = ''

    def to_dict(self) -> dict:
        return {'residual_sum_squares': self.residual_sum_squares, 'n_samples': self.n_samples,
                'iterations': self.iterations, 'converged': self.converged,
                'message': self.message}


def _xy(pairs):
    if isinstance(pairs, DisparityPairSet):
        return np.array(pairs.d_rel), np.array(pairs.d_met)
    x, y = pairs
    return np.asarray(x, dtype=float).reshape(-1), np.asarray(y, dtype=float).reshape(-1)


@dataclass(frozen=True)
class RescaleModel:
    """Base class for fitted scalar maps ``f: d_rel -> d_met``."""

    domain: tuple
    report: FitReport = field(default=None, compare=False)

    strategy = None

    def __call__(self, d_rel):
        return self.predict(d_rel)

    def predict(self, d_rel):
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {'strategy': self.strategy, 'params': self.params(),
                'domain': [float(self.domain[0]), float(self.domain[1])]}

    @staticmethod
    def from_dict(d: dict) -> RescaleModel:
        cls = _MODEL_CLASSES[d['strategy']]
        return cls._from_params(d['params'], tuple(d['domain']))


@dataclass(frozen=True)
class PolynomialModel(RescaleModel):
    """Polynomial stored in the variable ``s = (d - center) / half_width``."""

    scaled_coeffs: tuple = ()
    center: float = 0.0
    half_width: float = 1.0

    strategy = 'polynomial'

    @property
    def degree(self) -> int:
        return len(self.scaled_coeffs) - 1

    @property
    def coefficients(self) -> np.ndarray:
        """Ascending power-basis coefficients in the raw disparity variable."""
        lin = np.array([-self.center / self.half_width, 1.0 / self.half_width])
        out = np.array([self.scaled_coeffs[-1]])
        for c in self.scaled_coeffs[-2::-1]:
            out = npoly.polyadd(npoly.polymul(out, lin), [c])
        return np.pad(out, (0, len(self.scaled_coeffs) - out.size))

    def predict(self, d_rel):
        s = (np.asarray(d_rel, dtype=float) - self.center) / self.half_width
        return npoly.polyval(s, np.asarray(self.scaled_coeffs))

    def params(self):
        return {'degree': self.degree, 'scaled_coeffs': [float(c) for c in self.scaled_coeffs],
                'center': self.center, 'half_width': self.half_width,
                'coefficients': [float(c) for c in self.coefficients]}

    @classmethod
    def _from_params(cls, p, domain):
        return cls(domain, None, tuple(p['scaled_coeffs']), p['center'], p['half_width'])


@dataclass(frozen=True)
class ExponentialModel(RescaleModel):
    a: float = 1.0
    b: float = 0.0

    strategy = 'exponential'

    def predict(self, d_rel):
        return self.a * np.exp(self.b * np.asarray(d_rel, dtype=float))

    def params(self):
        return {'a': self.a, 'b': self.b}

    @classmethod
    def _from_params(cls, p, domain):
        return cls(domain, None, p['a'], p['b'])


@dataclass(frozen=True)
class SplineModel(RescaleModel):
    """Cubic B-spline; constant (clamped) outside ``domain``."""

    knots: np.ndarray = None
    coeffs: np.ndarray = None
    kind: str = 'monotonic_spline'
    hyper: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ('knots', 'coeffs'):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def strategy(self):
        return self.kind

    def predict(self, d_rel):
        x = np.asarray(d_rel, dtype=float)
        xc = np.clip(x, self.domain[0], self.domain[1]).reshape(-1)
        out = bspline.build_basis_matrix(xc, self.knots) @ self.coeffs
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def params(self):
        return {'knots': [float(k) for k in self.knots], 'coeffs': [float(c) for c in self.coeffs],
                **self.hyper}

    @classmethod
    def _from_params(cls, p, domain):
        hyper = {k: v for k, v in p.items() if k not in ('knots', 'coeffs')}
        return cls(domain, None, p['knots'], p['coeffs'], cls._kind, hyper)


def _spline_class(kind):
    return type(kind.title().replace('_', '') + 'Model', (SplineModel,), {'_kind': kind})


_MODEL_CLASSES = {'polynomial': PolynomialModel, 'exponential': ExponentialModel}
_MODEL_CLASSES.update({k: _spline_class(k) for k in STRATEGIES[2:]})


def evaluate(model: RescaleModel, d_rel):
    """Evaluate ``model`` and flag inputs outside its fitted domain.

    Returns
    -------
    values : float or numpy.ndarray
        Estimated metric disparity. Non-positive values are passed through.
    outside : bool or numpy.ndarray
        True where ``d_rel`` lies outside ``model.domain``.
    """
    x = np.asarray(d_rel, dtype=float)
    outside = (x < model.domain[0]) | (x > model.domain[1])
    values = model.predict(x)
    if x.ndim == 0:
        return float(values), bool(outside)
    return values, outside


# -- polynomial and exponential -------------------------------------------------

def _scaled_lstsq(x, y, degree):
    lo, hi = float(np.min(x)), float(np.max(x))
    if not hi > lo:
        raise DegenerateDataError('all relative disparities are identical')
    center, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    X = np.vander((x - center) / half, degree + 1, increasing=True)
    coeffs, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < degree + 1:
        raise DegenerateDataError(
            f'degree {degree} needs {degree + 1} distinct disparities, design rank is {rank}')
    return coeffs, center, half, (lo, hi)


def fit_polynomial(pairs, degree: int = 1) -> PolynomialModel:
    """Least-squares polynomial of the given degree (1 to 5).

    Solved by an SVD-based least-squares solve on a Vandermonde matrix built
    from disparities rescaled to ``[-1, 1]``.
    """
    if not 1 <= degree <= 5:
        raise DomainError(f'polynomial degree must be 1..5, got {degree}')
    x, y = _xy(pairs)
    coeffs, center, half, domain = _scaled_lstsq(x, y, degree)
    rss = float(np.sum((npoly.polyval((x - center) / half, coeffs) - y) ** 2))
    return PolynomialModel(domain, FitReport(rss, x.size), tuple(float(c) for c in coeffs),
                           center, half)


def fit_exponential(pairs) -> ExponentialModel:
    """Fit ``a * exp(b * d)`` by a straight-line fit to ``log(d_met)``."""
    x, y = _xy(pairs)
    if np.any(~(y > 0)):
        raise DomainError('exponential fit needs strictly positive metric disparity')
    coeffs, center, half, domain = _scaled_lstsq(x, np.log(y), 1)
    b = coeffs[1] / half
    log_a = coeffs[0] - b * center
    model = ExponentialModel(domain, None, math.exp(log_a), float(b))
    rss = float(np.sum((np.log(model.predict(x)) - np.log(y)) ** 2))
    return ExponentialModel(domain, FitReport(rss, x.size), model.a, model.b)


# -- penalized splines ------------------------------------------------------------

class _SplineSystem:
    """Shared least-squares machinery for a fixed basis and data set.

    The basis is reduced once by QR so each penalized solve only touches an
    ``n x n`` factor.
    """

    def __init__(self, x, y, n_segments):
        self.x, self.y = x, y
        self.knots = bspline.knots_for_samples(x, n_segments)
        self.B = bspline.build_basis_matrix(x, self.knots)
        self.n = self.B.shape[1]
        Q, self.R = np.linalg.qr(self.B)
        self.qty = Q.T @ y
        self.scale = float(np.sum(self.B ** 2))
        self.domain = (float(np.min(x)), float(np.max(x)))

    def weight(self, rel, op):
        return rel * self.scale / float(np.sum(op ** 2))

    def solve(self, *penalties):
        """Minimize ``||y - B b||^2 + sum(w * ||P b||^2)`` for ``(w, P)`` pairs."""
        blocks = [self.R] + [math.sqrt(w) * P for w, P in penalties if w > 0 and P.size]
        rhs = np.concatenate([self.qty, np.zeros(sum(b.shape[0] for b in blocks[1:]))])
        return np.linalg.lstsq(np.vstack(blocks), rhs, rcond=None)[0]

    def rss(self, beta):
        return float(np.sum((self.y - self.B @ beta) ** 2))


def _spline_model(kind, system, beta, report, hyper):
    return _MODEL_CLASSES[kind](system.domain, report, system.knots, beta, kind, hyper)


def fit_smoothing_spline(pairs, s=None, n_segments: int = DEFAULT_KNOTS, penalty: str = 'jump',
                         rtol: float = 1e-6, max_iter: int = 200):
    """Smoothest cubic spline whose residual sum of squares does not exceed ``s``.

    Smoothness is measured by the squared jumps of the third derivative at the
    interior knots (``penalty='jump'``) or by squared third differences of the
    coefficients (``penalty='diff3'``). The penalized problem
    ``||y - B b||^2 + mu ||P b||^2`` is solved for the ``mu`` at which the
    residual equals ``s``, found by bisection on ``log(mu)``; the residual is
    non-decreasing in ``mu``.

    Parameters
    ----------
    pairs : DisparityPairSet or tuple of arrays
        Fitting samples.
    s : float, optional
        Residual bound ``S >= 0``. Defaults to ``N * sigma**2`` with the noise
        variance estimated from the least-squares residual ``r0`` as
        ``r0 / (N - n_coeffs)``; with no spare degrees of freedom the default is
        ``N * (0.01 * mean(d_met))**2``.
    n_segments : int
        Number of equal knot spans.
    penalty : {'jump', 'diff3'}
        Roughness measure.
    rtol : float
        Bisection stops once ``|rss - s| <= rtol * s``.

    Returns
    -------
    SplineModel
        ``report.converged`` is False when even ``mu = 0`` leaves the residual
        above ``s``; the least-squares (interpolating) fit is returned then.
    """
    x, y = _xy(pairs)
    system = _SplineSystem(x, y, n_segments)
    if s is None:
        if x.size > system.n:
            s = system.rss(system.solve()) * x.size / (x.size - system.n)
        else:
            s = x.size * (0.01 * float(np.mean(y))) ** 2
    if s < 0:
        raise DomainError('smoothing bound must be non-negative')
    if penalty == 'jump':
        P = bspline.third_derivative_jump_matrix(system.knots)
    elif penalty == 'diff3':
        P = bspline.difference_matrix(3, system.n)
    else:
        raise DomainError(f'unknown penalty {penalty!r}')
    unit = system.weight(1.0, P)
    hyper = {'s': float(s), 'penalty': penalty, 'n_segments': n_segments}

    def fit(mu):
        beta = system.solve((mu, P))
        return beta, system.rss(beta)

    beta0, r0 = fit(0.0)
    floor = 1e-12 * float(y @ y)
    if r0 >= s:
        ok = r0 <= s + floor or abs(r0 - s) <= rtol * s
        msg = '' if ok else 'residual bound unreachable; returning least-squares limit'
        return _spline_model('smoothing_spline', system, beta0,
                             FitReport(r0, x.size, 1, ok, msg), {**hyper, 'mu': 0.0})

    # infinite-mu limit: best fit within the null space of the penalty
    N = null_space(P)
    beta_inf = N @ np.linalg.lstsq(system.B @ N, y, rcond=None)[0]
    r_inf = system.rss(beta_inf)
    if r_inf <= s:
        return _spline_model('smoothing_spline', system, beta_inf,
                             FitReport(r_inf, x.size, 1, True, 'residual bound inactive'),
                             {**hyper, 'mu': math.inf})

    lo, hi = -16.0, 16.0  # log10 of mu relative to the unit weight
    mid = hi
    beta, r = fit(unit * 10.0 ** hi)
    it = 1
    while r < s and hi < 40.0:
        lo, hi = hi, hi + 8.0
        mid = hi
        beta, r = fit(unit * 10.0 ** hi)
        it += 1
    for it in range(it + 1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        beta, r = fit(unit * 10.0 ** mid)
        if abs(r - s) <= rtol * s:
            break
        if r < s:
            lo = mid
        else:
            hi = mid
    converged = abs(r - s) <= rtol * s
    return _spline_model('smoothing_spline', system, beta,
                         FitReport(r, x.size, it, converged, ''),
                         {**hyper, 'mu': unit * 10.0 ** mid})


def _irls_monotone(kind, x, y, lam, kappa, n_segments, max_iter):
    system = _SplineSystem(x, y, n_segments)
    D1 = bspline.difference_matrix(1, system.n)
    D3 = bspline.difference_matrix(3, system.n) if system.n > 3 else np.zeros((0, system.n))
    lam_abs = system.weight(lam, D3) if lam and D3.size else 0.0
    kappa_abs = system.weight(kappa, D1)
    ridge = (RIDGE * system.scale / system.n, np.eye(system.n))

    v = np.zeros(D1.shape[0], dtype=bool)
    converged = False
    for it in range(1, max_iter + 1):
        beta = system.solve((lam_abs, D3), (kappa_abs, D1[v]), ridge)
        d = D1 @ beta
        new_v = (d < 0) | (v & (d <= PIN_TOL * np.max(np.abs(beta))))
        if np.array_equal(new_v, v):
            converged = True
            break
        v = new_v
    report = FitReport(system.rss(beta), x.size, it, converged,
                       '' if converged else 'monotonicity mask did not settle')
    hyper = {'lam': float(lam), 'kappa': float(kappa), 'lam_abs': lam_abs,
             'kappa_abs': kappa_abs, 'n_segments': n_segments}
    return _spline_model(kind, system, beta, report, hyper)


def fit_monotonic_smoothing_spline(pairs, lam: float = DEFAULT_LAMBDA, kappa: float = DEFAULT_KAPPA,
                                   n_segments: int = DEFAULT_KNOTS, max_iter: int = MAX_IRLS_ITER):
    """Penalized B-spline with a smoothness term and an asymmetric monotonicity term.

    Minimizes ``||y - B b||^2 + lam ||D3 b||^2 + kappa ||V^(1/2) D1 b||^2`` where
    the diagonal 0/1 mask ``V`` selects the decreasing coefficient differences.
    ``V`` is found by iterating solve/re-mask from ``V = 0`` until it stops
    changing or ``max_iter`` solves have run. Differences already penalized
    stay in ``V`` while they sit at zero within ``PIN_TOL``.
    """
    x, y = _xy(pairs)
    return _irls_monotone('monotonic_smoothing_spline', x, y, lam, kappa, n_segments, max_iter)


def fit_monotonic_spline(pairs, kappa: float = DEFAULT_KAPPA, n_segments: int = DEFAULT_KNOTS,
                         max_iter: int = MAX_IRLS_ITER):
    """:func:`fit_monotonic_smoothing_spline` without the smoothness term."""
    x, y = _xy(pairs)
    return _irls_monotone('monotonic_spline', x, y, 0.0, kappa, n_segments, max_iter)


def fit_unconstrained_spline(pairs, n_segments: int = DEFAULT_KNOTS):
    """Plain cubic B-spline least squares on the same basis; a reference fit."""
    x, y = _xy(pairs)
    system = _SplineSystem(x, y, n_segments)
    beta = system.solve((RIDGE * system.scale / system.n, np.eye(system.n)))
    return _spline_model('monotonic_spline', system, beta, FitReport(system.rss(beta), x.size),
                         {'lam': 0.0, 'kappa': 0.0, 'n_segments': n_segments})
