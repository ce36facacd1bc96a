"""Cubic B-spline basis on clamped knots.

Prints the basis matrix at a few points, checks partition of unity and shows
that the third-difference operator kills quadratic coefficient sequences.
"""

import numpy as np

from metricdepth import bspline

knots = bspline.open_uniform_knots(0.0, 1.0, n_segments=4)
print('knots:', knots)

x = np.linspace(0.0, 1.0, 6)
B = bspline.build_basis_matrix(x, knots)
np.set_printoptions(precision=4, suppress=True)
print('basis values, one row per sample:')
print(B)
print('row sums:', B.sum(axis=1))

# evaluating a single basis with the scalar recursion gives the same numbers
print('phi_2(0.4) =', bspline.basis_value(2, 3, 0.4, knots), 'vs', B[2, 2])

i = np.arange(B.shape[1], dtype=float)
D3 = bspline.difference_matrix(3, B.shape[1])
print('D3 @ (1 + 2i - 3i^2):', D3 @ (1 + 2 * i - 3 * i ** 2))

# a global cubic has no third-derivative jumps; a kinked curve does
dense = np.linspace(0.0, 1.0, 200)
Bd = bspline.build_basis_matrix(dense, knots)
P = bspline.third_derivative_jump_matrix(knots)
for name, y in (('x^3', dense ** 3), ('|x - 0.4|^3', np.abs(dense - 0.4) ** 3)):
    beta = np.linalg.lstsq(Bd, y, rcond=None)[0]
    print(f'jumps of {name}:', P @ beta)
