"""Cubic B-spline bases via the Cox-de Boor recursion and difference penalties.

Knot indices are zero-based: basis ``j`` of degree ``t`` is supported on
``[knots[j], knots[j + t + 1]]`` and exists for ``0 <= j <= m - t - 2``.
"""

from __future__ import annotations

import numpy as np

from .core import DegenerateDataError, DomainError

DEGREE = 3


def _ratio(num, den):
    """Elementwise ``num / den`` with the 0/0 (repeated knot) case set to 0."""
    den = np.asarray(den, dtype=float)
    safe = np.where(den == 0, 1.0, den)
    return np.where(den == 0, 0.0, num / safe)


def _last_span(knots) -> int:
    """Index ``i`` of the last non-empty interval ``[k_i, k_{i+1})``."""
    nz = np.nonzero(np.diff(knots) > 0)[0]
    return int(nz[-1]) if nz.size else -1


def basis_value(j: int, t: int, x: float, knots) -> float:
    """Value of the degree-``t`` B-spline basis ``j`` at ``x``.

    Degree 0 is the indicator of ``[k_j, k_{j+1})``, closed on the right for
    the last non-empty interval so the basis still sums to one at the final
    knot. Higher degrees follow the two-term Cox-de Boor recursion.
    """
    k = np.asarray(knots, dtype=float)
    m = k.size
    if t not in (0, 1, 2, 3):
        raise DomainError(f'degree must be 0..3, got {t}')
    if not 0 <= j <= m - t - 2:
        raise DomainError(f'basis index {j} out of range for {m} knots and degree {t}')
    if t == 0:
        if k[j] <= x < k[j + 1]:
            return 1.0
        return 1.0 if (x == k[-1] and j == _last_span(k)) else 0.0
    left = float(_ratio(x - k[j], k[j + t] - k[j]))
    right = float(_ratio(k[j + t + 1] - x, k[j + t + 1] - k[j + 1]))
    value = 0.0
    if left:
        value += left * basis_value(j, t - 1, x, k)
    if right:
        value += right * basis_value(j + 1, t - 1, x, k)
    return value


def open_uniform_knots(lo: float, hi: float, n_segments: int = 10, degree: int = DEGREE) -> np.ndarray:
    """Clamped knot vector with ``n_segments`` equal spans on ``[lo, hi]``."""
    if not hi > lo:
        raise DegenerateDataError('knot span must have positive width')
    if n_segments < 1:
        raise DomainError('at least one knot segment is required')
    inner = np.linspace(lo, hi, n_segments + 1)
    return np.concatenate([np.full(degree, lo), inner, np.full(degree, hi)])


def knots_for_samples(samples, n_segments: int = 10) -> np.ndarray:
    """Clamped knots padded by ``1e-6 * range`` so extreme samples are interior."""
    x = np.asarray(samples, dtype=float)
    lo, hi = float(np.min(x)), float(np.max(x))
    if not hi > lo:
        raise DegenerateDataError('all relative disparities are identical')
    eps = 1e-6 * (hi - lo)
    return open_uniform_knots(lo - eps, hi + eps, n_segments)


def build_basis_matrix(samples, knots, degree: int = DEGREE) -> np.ndarray:
    """Dense ``N x (m - degree - 1)`` matrix of basis values at ``samples``.

    This is the same recursion as :func:`basis_value`, run level by level over
    all samples and all basis indices at once.
    """
    x = np.asarray(samples, dtype=float).reshape(-1, 1)
    k = np.asarray(knots, dtype=float)
    m = k.size
    if m < degree + 2:
        raise DomainError('not enough knots for a single basis function')
    if x.size and (x.min() < k[0] or x.max() > k[-1]):
        raise DomainError('samples must lie inside the knot span')

    # degree 0: one indicator per interval
    B = ((k[:-1] <= x) & (x < k[1:])).astype(float)
    last = _last_span(k)
    if last >= 0:
        B[x[:, 0] == k[-1], last] = 1.0
    for t in range(1, degree + 1):
        n = m - t - 1
        inv_l = _ratio(1.0, k[t:t + n] - k[:n])
        inv_r = _ratio(1.0, k[t + 1:t + 1 + n] - k[1:n + 1])
        B = ((x - k[:n]) * inv_l) * B[:, :n] + ((k[t + 1:t + 1 + n] - x) * inv_r) * B[:, 1:n + 1]
    return B


def difference_matrix(order: int, n_coeffs: int) -> np.ndarray:
    """Forward difference operator of the given order.

    Row ``r`` holds the order-``k`` stencil (``[-1, 1]`` for 1, ``[-1, 3, -3, 1]``
    for 3) starting at column ``r``.
    """
    if order < 1:
        raise DomainError('difference order must be positive')
    if n_coeffs <= order:
        raise DomainError(f'need more than {order} coefficients, got {n_coeffs}')
    return np.diff(np.eye(n_coeffs), n=order, axis=0)


def third_derivative_jump_matrix(knots, degree: int = DEGREE) -> np.ndarray:
    """Matrix ``P`` with ``(P @ beta)_r`` equal to the jump of ``f'''`` at interior knot ``r``.

    Differentiating a spline maps its coefficients through
    ``c'_i = t (c_{i+1} - c_i) / (k_{i+t+1} - k_{i+1})``; three steps leave one
    constant per span and consecutive differences of those are the jumps.
    """
    if degree != 3:
        raise DomainError('third-derivative jumps are defined for cubic splines')
    k = np.asarray(knots, dtype=float)
    n = k.size - degree - 1
    M = np.eye(n)
    kk = k
    for t in range(degree, 0, -1):
        rows = M.shape[0] - 1
        den = kk[t + 1:t + 1 + rows] - kk[1:1 + rows]
        scale = _ratio(float(t), den)
        M = scale[:, None] * (M[1:] - M[:-1])
        kk = kk[1:-1]
    # kk now holds the breakpoints; drop empty spans before differencing
    spans = np.diff(kk) > 0
    M = M[spans]
    return M[1:] - M[:-1]
