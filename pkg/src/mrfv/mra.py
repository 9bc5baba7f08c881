"""Multiresolution transform: encode, threshold, decode, adapt.

Fields live as cell averages.  Encoding peels a fully resolved field into a
coarsest-level array plus per-level detail arrays (prediction errors); since
sibling details sum to zero, only ``2**d - 1`` of each sibling group is
stored and the last one is reconstructed on decode.  Thresholding zeroes
details below the level-scaled tolerance, and ``adapt`` turns the surviving
details into a graded forest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from .cells import BOUNDARY, CellId, Grid
from .errors import GradingError
from .forest import CellKind, Forest, transfer_leaf_values
from .prediction import PredictionScheme, coarsen_all, refine_all


def project(child_values: Sequence[float], child_measures: Sequence[float]) -> float:
    """Measure-weighted average of a sibling group (the exact coarse value)."""
    v = np.asarray(child_values, dtype=float)
    m = np.asarray(child_measures, dtype=float)
    if v.shape != m.shape:
        raise ValueError("child_values and child_measures must match")
    return float(np.dot(v, m) / m.sum())


def predict(stencil_values: np.ndarray, corner_bits: tuple[int, ...]) -> float:
    """Predict one child average from a full interior coarse neighborhood."""
    return PredictionScheme().child_value(stencil_values, corner_bits)


def _pack_details(full: np.ndarray) -> np.ndarray:
    """Group a full-level detail array by parent, dropping the last sibling."""
    d = full.ndim
    pshape = tuple(s // 2 for s in full.shape)
    inter = []
    for p in pshape:
        inter.extend((p, 2))
    perm = list(range(0, 2 * d, 2)) + list(range(2 * d - 1, 0, -2))
    arr = full.reshape(inter).transpose(perm).reshape(*pshape, 1 << d)
    return arr[..., :-1].copy()


def _unpack_details(packed: np.ndarray) -> np.ndarray:
    """Inverse of :func:`_pack_details`; the dropped sibling is minus the sum."""
    d = packed.ndim - 1
    pshape = packed.shape[:-1]
    last = -packed.sum(axis=-1, keepdims=True)
    grouped = np.concatenate([packed, last], axis=-1)
    grouped = grouped.reshape(*pshape, *((2,) * d))
    perm = list(range(0, 2 * d, 2)) + list(range(2 * d - 1, 0, -2))
    inv = np.argsort(perm)
    inter = grouped.transpose(inv)
    return inter.reshape(tuple(2 * p for p in pshape))


@dataclass
class MultiScale:
    """Coarse averages plus per-level packed details (index 1..max_level)."""

    dims: int
    n_roots: tuple[int, ...]
    max_level: int
    coarse: np.ndarray
    details: list  # details[0] is None; details[j] has shape (*parents_j, 2**d - 1)

    def copy(self) -> "MultiScale":
        return MultiScale(self.dims, self.n_roots, self.max_level,
                          self.coarse.copy(),
                          [None] + [d.copy() for d in self.details[1:]])


def encode(values: np.ndarray, n_roots: tuple[int, ...] | None = None) -> MultiScale:
    """Full multiresolution analysis of a finest-level field.

    ``values`` is the d-dimensional cell-average array over all roots at the
    finest level; axis i must have length ``n_roots[i] * 2**J`` for a common J.
    """
    values = np.asarray(values, dtype=float)
    d = values.ndim
    n_roots = (1,) * d if n_roots is None else tuple(n_roots)
    if len(n_roots) != d:
        raise ValueError("n_roots must have one entry per array axis")
    levels = set()
    for s, n in zip(values.shape, n_roots):
        if s % n:
            raise ValueError(f"axis length {s} not a multiple of root count {n}")
        q = s // n
        if q & (q - 1):
            raise ValueError(f"axis length {s} is not roots * 2**J")
        levels.add(q.bit_length() - 1)
    if len(levels) > 1:
        raise ValueError(f"axes disagree on the refinement level: {sorted(levels)}")
    max_level = levels.pop()
    details: list = [None] * (max_level + 1)
    f = values
    for j in range(max_level, 0, -1):
        coarse = coarsen_all(f)
        details[j] = _pack_details(f - refine_all(coarse))
        f = coarse
    return MultiScale(d, n_roots, max_level, f, details)


def decode(ms: MultiScale) -> np.ndarray:
    """Exact inverse of :func:`encode`."""
    f = ms.coarse
    for j in range(1, ms.max_level + 1):
        f = refine_all(f) + _unpack_details(ms.details[j])
    return f


@dataclass(frozen=True)
class ThresholdSpec:
    """Accuracy tolerance with the level-scaled per-detail thresholds."""

    eta: float

    def __post_init__(self) -> None:
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")

    def epsilons(self, dims: int, max_level: int) -> np.ndarray:
        j = np.arange(max_level + 1)
        return 2.0 ** (0.5 * dims * (j - max_level)) * self.eta


@dataclass
class KeptSet:
    """Which stored detail slots survived thresholding (roots always kept)."""

    dims: int
    masks: list  # masks[0] is None; masks[j] is boolean, shaped like details[j]

    def parent_mask(self, j: int) -> np.ndarray:
        """Parents at level ``j - 1`` with at least one significant child."""
        return self.masks[j].any(axis=-1)

    @property
    def kept_count(self) -> int:
        return int(sum(m.sum() for m in self.masks[1:]))

    @property
    def total_count(self) -> int:
        return int(sum(m.size for m in self.masks[1:]))

    def cells(self):
        """Kept detail cells as ids (tests and diagnostics; roots excluded)."""
        for j in range(1, len(self.masks)):
            for idx in np.argwhere(self.masks[j]):
                *p, m = idx
                k = tuple(2 * p[i] + ((int(m) >> i) & 1) for i in range(self.dims))
                yield CellId(j, k)


def threshold(ms: MultiScale, spec: ThresholdSpec) -> tuple[MultiScale, KeptSet]:
    """Zero details below the level threshold; report what was kept."""
    eps = spec.epsilons(ms.dims, ms.max_level)
    out = ms.copy()
    masks: list = [None] * (ms.max_level + 1)
    for j in range(1, ms.max_level + 1):
        keep = np.abs(out.details[j]) >= eps[j]
        out.details[j] = np.where(keep, out.details[j], 0.0)
        masks[j] = keep
    return out, KeptSet(ms.dims, masks)


# -- norms -----------------------------------------------------------------

def norm_l2_uniform(values: np.ndarray, n_roots: tuple[int, ...] | None = None) -> float:
    """Level-normalized l2 norm of a finest-level field (root-count aware)."""
    values = np.asarray(values, dtype=float)
    n_roots = (1,) * values.ndim if n_roots is None else tuple(n_roots)
    w = 1.0
    for s, n in zip(values.shape, n_roots):
        w *= n / s
    return float(np.sqrt(w * np.sum(values * values)))


def norm_l2(forest: Forest, values: np.ndarray) -> float:
    """Same normalization generalized to leaf measures of an adapted forest."""
    lm = forest.enumerate_leaves()
    values = np.asarray(values, dtype=float)
    if values.shape != (len(lm),):
        raise ValueError(f"expected {len(lm)} leaf values, got {values.shape}")
    grid = forest.grid
    scale = grid.root_count / grid.domain_measure()
    weights = np.array([grid.measure(c.level) for c in lm.cells])
    return float(np.sqrt(scale * np.sum(weights * values * values)))


# -- forest-resident transform and adaptation ------------------------------

def leaf_values_to_grid(forest: Forest, values: np.ndarray) -> np.ndarray:
    """Scatter leaf values of a fully uniform forest into a dense array."""
    grid = forest.grid
    lm = forest.enumerate_leaves()
    shape = tuple(grid.axis_cells(grid.max_level, i) for i in range(grid.dims))
    out = np.empty(shape, dtype=float)
    values = np.asarray(values, dtype=float)
    for i, cell in enumerate(lm.cells):
        out[cell.k] = values[i]
    return out


def grid_to_leaf_values(forest: Forest, arr: np.ndarray) -> np.ndarray:
    lm = forest.enumerate_leaves()
    return np.array([arr[c.k] for c in lm.cells], dtype=float)


def _is_uniform(forest: Forest) -> bool:
    grid = forest.grid
    full = grid.root_count << (grid.dims * grid.max_level)
    return forest.leaf_count == full


def _tree_value_map(forest: Forest, values: np.ndarray) -> dict[CellId, float]:
    """Leaf data plus exact averages on every inner cell."""
    lm = forest.enumerate_leaves()
    out: dict[CellId, float] = {}
    for i, cell in enumerate(lm.cells):
        out[cell] = float(values[i])
    share = 1.0 / (1 << forest.grid.dims)
    inner_by_level: dict[int, list[CellId]] = {}
    for c, rec in forest.cells.items():
        if rec.kind == CellKind.INNER:
            inner_by_level.setdefault(c.level, []).append(c)
    for level in sorted(inner_by_level, reverse=True):
        for cell in inner_by_level[level]:
            out[cell] = share * sum(out[ch] for ch in cell.children())
    return out


def tree_details(forest: Forest, value_map: dict[CellId, float]):
    """Details of every refined sibling group, computed on the tree.

    Yields ``(parent, children, details)`` with children in corner order.
    Grading guarantees the prediction stencil of every refined parent is a
    tree cell; a missing member is reported as a grading violation.
    """
    grid = forest.grid
    scheme = forest.scheme
    d = grid.dims
    corners = 1 << d
    for cell, rec in forest.cells.items():
        if rec.kind != CellKind.INNER:
            continue
        axis_stencils = []
        for i in range(d):
            n = grid.axis_cells(cell.level, i)
            lo = scheme.axis_coefficients(cell.k[i], n, 0)
            hi = scheme.axis_coefficients(cell.k[i], n, 1)
            axis_stencils.append((lo, hi))
        kids = cell.children()
        details = []
        for m in range(corners):
            pred = 0.0
            combos = [axis_stencils[i][(m >> i) & 1] for i in range(d)]
            for picks in product(*(zip(*c) for c in combos)):
                coef = 1.0
                for _, cc in picks:
                    coef *= cc
                member = grid.shifted(cell, tuple(o for o, _ in picks))
                if member is BOUNDARY:
                    raise GradingError(
                        f"prediction stencil of {cell} leaves the domain")
                try:
                    pred += coef * value_map[member]
                except KeyError:
                    raise GradingError(
                        f"stencil member {member} of {cell} is not a tree cell")
            details.append(value_map[kids[m]] - pred)
        yield cell, kids, details


def encode_forest(forest: Forest, values: np.ndarray) -> MultiScale:
    """Multiscale content of an adapted-forest field.

    Details exist only where the tree is refined; everything below the leaves
    is implicitly zero, so decoding yields the prediction prolongation of the
    leaf data onto the finest level.
    """
    grid = forest.grid
    d, J = grid.dims, grid.max_level
    vm = _tree_value_map(forest, np.asarray(values, dtype=float))
    coarse = np.empty(tuple(grid.axis_cells(0, i) for i in range(d)))
    for root in grid.roots():
        coarse[root.k] = vm[root]
    details: list = [None]
    for j in range(1, J + 1):
        pshape = tuple(grid.axis_cells(j - 1, i) for i in range(d))
        details.append(np.zeros(pshape + ((1 << d) - 1,)))
    for parent, kids, dets in tree_details(forest, vm):
        j = parent.level + 1
        for m in range((1 << d) - 1):
            details[j][parent.k + (m,)] = dets[m]
    return MultiScale(d, grid.n_roots, J, coarse, details)


def adapt(forest: Forest, fields: Sequence[np.ndarray], spec: ThresholdSpec,
          flux_stencil_radius: int = 1) -> Forest:
    """Build the graded forest selected by the fields' significant details.

    Every refined sibling group of the input forest whose stored details meet
    the level threshold in any field keeps its parent refined; the result is
    graded, phantom-complete and enumerated, and carries the first field's
    values (transferred by exact averaging or prediction as levels require).
    """
    if not fields:
        raise ValueError("adapt needs at least one field")
    grid = forest.grid
    d, J = grid.dims, grid.max_level
    eps = spec.epsilons(d, J)
    fields = [np.asarray(f, dtype=float) for f in fields]

    keep: set[CellId] = set()
    if _is_uniform(forest):
        for f in fields:
            ms = encode(leaf_values_to_grid(forest, f), grid.n_roots)
            for j in range(1, J + 1):
                hit = (np.abs(ms.details[j]) >= eps[j]).any(axis=-1)
                for p in np.argwhere(hit):
                    keep.add(CellId(j - 1, tuple(int(x) for x in p)))
    else:
        for f in fields:
            vm = _tree_value_map(forest, f)
            for parent, kids, dets in tree_details(forest, vm):
                j = parent.level + 1
                if any(abs(dets[m]) >= eps[j] for m in range((1 << d) - 1)):
                    keep.add(parent)

    out = Forest.roots_only(grid)
    for parent in sorted(keep):
        out.ensure_refined(parent)
    out.finalize(flux_stencil_radius)
    out.sync_values(transfer_leaf_values(forest, out, fields[0]))
    return out
