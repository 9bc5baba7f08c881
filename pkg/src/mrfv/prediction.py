"""Average-interpolating child prediction on dyadic grids.

The scheme reconstructs the two child cell averages of a coarse cell from a
three-cell coarse neighborhood along each axis (tensor product across axes).
It is exact for polynomials up to total degree 2 and consistent with the
two-cell average, i.e. the mean of the predicted children equals the parent
value, which is what makes sibling detail groups sum to zero.

Domain edges use shifted three-cell stencils derived from the same cubic
primitive construction; axes with fewer than three coarse cells fall back to
the consistent linear (two-cell) or constant (single-cell) rule.
"""

from __future__ import annotations

from itertools import product

import numpy as np

# One-dimensional stencils: {child bit: (offsets, coefficients)}.  Offsets are
# relative to the parent cell.  All coefficients are binary-exact floats.
_CENTERED = {
    0: ((-1, 0, 1), (0.125, 1.0, -0.125)),
    1: ((-1, 0, 1), (-0.125, 1.0, 0.125)),
}
_EDGE_LO = {
    0: ((0, 1, 2), (1.375, -0.5, 0.125)),
    1: ((0, 1, 2), (0.625, 0.5, -0.125)),
}
_EDGE_HI = {
    0: ((-2, -1, 0), (-0.125, 0.5, 0.625)),
    1: ((-2, -1, 0), (0.125, -0.5, 1.375)),
}
_PAIR_LO = {
    0: ((0, 1), (1.25, -0.25)),
    1: ((0, 1), (0.75, 0.25)),
}
_PAIR_HI = {
    0: ((-1, 0), (0.25, 0.75)),
    1: ((-1, 0), (-0.25, 1.25)),
}
_SINGLE = {
    0: ((0,), (1.0,)),
    1: ((0,), (1.0,)),
}


class PredictionScheme:
    """Third-order tensor-product prediction operator (stencil width 3)."""

    order = 3
    radius = 1  # coarse neighbors consulted on each side of the parent

    def axis_coefficients(self, pos: int, n: int, child_bit: int):
        """Stencil along one axis for the child ``child_bit`` of parent ``pos``.

        Parameters
        ----------
        pos : parent index along the axis
        n : number of cells along the axis at the parent level
        child_bit : 0 for the low child, 1 for the high child

        Returns
        -------
        (offsets, coefficients) : offsets relative to ``pos``
        """
        if n == 1:
            table = _SINGLE
        elif n == 2:
            table = _PAIR_LO if pos == 0 else _PAIR_HI
        elif pos == 0:
            table = _EDGE_LO
        elif pos == n - 1:
            table = _EDGE_HI
        else:
            table = _CENTERED
        return table[child_bit]

    def child_value(self, parent_values, corner_bits: tuple[int, ...]) -> float:
        """Predict one child from a full interior ``(3,)*d`` neighborhood.

        ``parent_values`` is indexed by per-axis offsets ``-1..1`` shifted to
        ``0..2``; ``corner_bits`` selects the child along each axis.
        """
        a = np.asarray(parent_values, dtype=float)
        d = a.ndim
        out = 0.0
        for offs in product((-1, 0, 1), repeat=d):
            c = 1.0
            for i in range(d):
                _, coefs = _CENTERED[corner_bits[i]]
                c *= coefs[offs[i] + 1]
            out += c * a[tuple(o + 1 for o in offs)]
        return out


def refine_axis(a: np.ndarray, axis: int, scheme: PredictionScheme | None = None) -> np.ndarray:
    """Predict child averages along one axis, doubling its length."""
    a = np.moveaxis(np.asarray(a, dtype=float), axis, 0)
    n = a.shape[0]
    out = np.empty((2 * n,) + a.shape[1:], dtype=float)
    if n == 1:
        out[0] = a[0]
        out[1] = a[0]
    elif n == 2:
        out[0] = 1.25 * a[0] - 0.25 * a[1]
        out[1] = 0.75 * a[0] + 0.25 * a[1]
        out[2] = 0.25 * a[0] + 0.75 * a[1]
        out[3] = -0.25 * a[0] + 1.25 * a[1]
    else:
        mid = a[1:-1]
        diff = 0.125 * (a[:-2] - a[2:])
        out[2:-2:2] = mid + diff
        out[3:-2:2] = mid - diff
        out[0] = 1.375 * a[0] - 0.5 * a[1] + 0.125 * a[2]
        out[1] = 0.625 * a[0] + 0.5 * a[1] - 0.125 * a[2]
        out[-2] = -0.125 * a[-3] + 0.5 * a[-2] + 0.625 * a[-1]
        out[-1] = 0.125 * a[-3] - 0.5 * a[-2] + 1.375 * a[-1]
    return np.moveaxis(out, 0, axis)


def coarsen_axis(a: np.ndarray, axis: int) -> np.ndarray:
    """Exact two-cell averaging along one axis, halving its length."""
    a = np.moveaxis(np.asarray(a, dtype=float), axis, 0)
    out = 0.5 * (a[0::2] + a[1::2])
    return np.moveaxis(out, 0, axis)


def refine_all(a: np.ndarray) -> np.ndarray:
    for axis in range(a.ndim):
        a = refine_axis(a, axis)
    return a


def coarsen_all(a: np.ndarray) -> np.ndarray:
    for axis in range(a.ndim):
        a = coarsen_axis(a, axis)
    return a
