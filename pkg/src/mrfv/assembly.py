"""Elliptic operator assembly directly on adapted forests.

Every interior interface is visited exactly once, from the low side, and its
flux is written into both adjacent rows with opposite signs, so the discrete
operator is conservative by construction.  Faces between different levels are
evaluated at the finer level: the coarse side participates through its
phantom children, whose values expand into leaf values via the prediction
stencils (and through exact child averages wherever the stencil touches a
refined region).  The coarse row receives the fine-face fluxes weighted by
the child-to-parent volume ratio.

Boundary faces apply the configured condition at the leaf's own level with a
second-order ghost relation; Dirichlet data lands in ``rhs_bc``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .cells import BOUNDARY, CellId, Grid
from .errors import GradingError
from .forest import CellKind, Forest
from .sparse import SparseMatrix, matrix_stats  # noqa: F401  (re-exported)


@dataclass(frozen=True)
class FluxScheme:
    """Two-point second-order face flux (one cell on each side)."""

    order: int = 2
    radius: int = 1


@dataclass(frozen=True)
class OperatorSpec:
    """Laplacian, optionally screened: rows get ``-screening`` on the diagonal."""

    screening: float = 0.0

    def __post_init__(self) -> None:
        if self.screening < 0:
            raise ValueError("screening coefficient must be nonnegative")

    @property
    def kind(self) -> str:
        return "screened" if self.screening else "laplace"

    @classmethod
    def laplace(cls) -> "OperatorSpec":
        return cls(0.0)

    @classmethod
    def screened(cls, coefficient: float) -> "OperatorSpec":
        return cls(coefficient)


# -- boundary conditions ---------------------------------------------------

Point = tuple[float, ...]


@dataclass(frozen=True)
class Dirichlet:
    """Fixed face value; a callable receives the face-center position."""

    value: Union[float, Callable[[Point], float]] = 0.0

    def face_value(self, point: Point) -> float:
        return self.value(point) if callable(self.value) else float(self.value)


@dataclass(frozen=True)
class Neumann:
    """Zero normal flux."""


@dataclass(frozen=True)
class Symmetry:
    """Mirror plane: identical to zero normal flux for cell averages."""


@dataclass(frozen=True)
class Robin:
    """Normal derivative tied to the unknown: dphi/dn = -c * phi - g.

    ``source`` supplies g; a callable receives (face point, leaf row) so
    lagged coupling fields can be looked up per boundary cell.
    """

    coefficient: float = 0.0
    source: Union[float, Callable[[Point, int], float]] = 0.0

    def source_value(self, point: Point, row: int) -> float:
        return self.source(point, row) if callable(self.source) else float(self.source)


BCFace = Union[Dirichlet, Neumann, Symmetry, Robin]


@dataclass(frozen=True)
class BCSpec:
    """One condition per domain face: ``faces[axis] = (low side, high side)``."""

    faces: tuple[tuple[BCFace, BCFace], ...]

    @classmethod
    def uniform(cls, face: BCFace, dims: int) -> "BCSpec":
        return cls(tuple((face, face) for _ in range(dims)))

    def face(self, axis: int, side: int) -> BCFace:
        return self.faces[axis][0 if side < 0 else 1]


def dirichlet_rows(forest: Forest, bc: BCSpec) -> np.ndarray:
    """Boolean mask of rows whose equations absorb Dirichlet face data."""
    lm = forest.enumerate_leaves()
    grid = forest.grid
    out = np.zeros(len(lm), dtype=bool)
    for i, cell in enumerate(lm.cells):
        for axis in range(grid.dims):
            for side in (-1, 1):
                if grid.neighbor(cell, axis, side) is BOUNDARY and \
                        isinstance(bc.face(axis, side), Dirichlet):
                    out[i] = True
    return out


# -- assembly --------------------------------------------------------------

def _bc_face(cell: CellId, i: int, axis: int, side: int, face: BCFace,
             grid: Grid, matrix: SparseMatrix | None, rhs: np.ndarray) -> None:
    """Apply one boundary face at the leaf's own level.

    Dirichlet eliminates a linear ghost (value 2 g - u); Robin folds the face
    relation into the flux at second order.  ``matrix=None`` recomputes only
    the rhs part (used when lagged Robin sources change between solves).
    """
    if isinstance(face, (Neumann, Symmetry)):
        return
    w = grid.widths(cell.level)[axis]
    if isinstance(face, Dirichlet):
        g = face.face_value(grid.face_center(cell, axis, side))
        if matrix is not None:
            matrix.add(i, i, -2.0 / (w * w))
        rhs[i] -= 2.0 * g / (w * w)
        return
    if isinstance(face, Robin):
        denom = 1.0 + 0.5 * face.coefficient * w
        if matrix is not None:
            matrix.add(i, i, -face.coefficient / (w * denom))
        g = face.source_value(grid.face_center(cell, axis, side), i)
        rhs[i] += g / (w * denom)
        return
    raise TypeError(f"unknown boundary condition {face!r}")


def assemble_adapted(forest: Forest, scheme: FluxScheme, op: OperatorSpec,
                     bc: BCSpec,
                     instrument: dict | None = None
                     ) -> tuple[SparseMatrix, np.ndarray]:
    """Assemble the operator on an adapted forest's leaves.

    Returns the finalized matrix and the boundary-data vector ``rhs_bc``
    (added to the source term to form the full right-hand side).  When
    ``instrument`` is given it collects one count per physical face touched;
    single assembly per interface means every count is one.
    """
    if scheme.order != 2 or scheme.radius != 1:
        raise NotImplementedError("only the two-point second-order flux is built in")
    grid = forest.grid
    lm = forest.enumerate_leaves()
    n = len(lm)
    matrix = SparseMatrix(n)
    rhs_bc = np.zeros(n)
    d = grid.dims
    share = 1.0 / (1 << d)  # child-to-parent volume ratio
    inv_w2 = [tuple(1.0 / (w * w) for w in grid.widths(j))
              for j in range(grid.max_level + 2)]

    def count(key) -> None:
        if instrument is not None:
            instrument[key] = instrument.get(key, 0) + 1

    for i, cell in enumerate(lm.cells):
        for axis in range(d):
            for side in (-1, 1):
                nb = grid.neighbor(cell, axis, side)
                if nb is BOUNDARY:
                    _bc_face(cell, i, axis, side, bc.face(axis, side),
                             grid, matrix, rhs_bc)
                    count(("bc", axis, cell.level, cell.k, side))
                    continue
                if side == -1:
                    continue  # interior faces are assembled from the low side
                rec = forest.cells.get(nb)
                if rec is None:
                    raise GradingError(
                        f"leaf {cell} misses its neighbor {nb}; "
                        "finalize the forest before assembling")
                c = inv_w2[cell.level][axis]
                if rec.kind == CellKind.LEAF:
                    j = lm.row(nb)
                    matrix.add(i, j, c)
                    matrix.add(i, i, -c)
                    matrix.add(j, i, c)
                    matrix.add(j, j, -c)
                    count((axis, cell.level, nb.k))
                elif rec.kind == CellKind.PHANTOM:
                    # fine leaf against a coarser region: flux at this level,
                    # mirrored into the phantom's parent leaf with the volume ratio
                    parent = nb.parent()
                    prec = forest.cells.get(parent)
                    if prec is None or prec.kind != CellKind.LEAF:
                        raise GradingError(f"phantom {nb} is not the child of a leaf")
                    jp = lm.row(parent)
                    rows, wts = forest.resolve_to_leaves(nb)
                    matrix.add(i, i, -c)
                    matrix.add(jp, i, share * c)
                    for rr, ww in zip(rows, wts):
                        cv = c * ww
                        matrix.add(i, rr, cv)
                        matrix.add(jp, rr, -share * cv)
                    count((axis, cell.level, nb.k))
                else:
                    # coarse leaf against a refined region: evaluate each
                    # sub-face at the finer level through the phantom children
                    cf = inv_w2[cell.level + 1][axis]
                    for ghat in cell.children():
                        if not (ghat.sibling_corner() >> axis) & 1:
                            continue
                        mu = grid.neighbor(ghat, axis, 1)
                        if mu is BOUNDARY or not forest.is_leaf(mu):
                            raise GradingError(
                                f"expected a fine leaf across {ghat}; grading violated")
                        jm = lm.row(mu)
                        rows, wts = forest.resolve_to_leaves(ghat)
                        matrix.add(i, jm, share * cf)
                        matrix.add(jm, jm, -cf)
                        for rr, ww in zip(rows, wts):
                            cv = cf * ww
                            matrix.add(i, rr, -share * cv)
                            matrix.add(jm, rr, cv)
                        count((axis, cell.level + 1, mu.k))

    if op.screening:
        for i in range(n):
            matrix.add(i, i, -op.screening)
    return matrix.finalize(), rhs_bc


def assemble_bc_rhs(forest: Forest, scheme: FluxScheme, bc: BCSpec) -> np.ndarray:
    """Recompute only ``rhs_bc`` (cheap; used when lagged BC sources change)."""
    grid = forest.grid
    lm = forest.enumerate_leaves()
    rhs_bc = np.zeros(len(lm))
    for i, cell in enumerate(lm.cells):
        for axis in range(grid.dims):
            for side in (-1, 1):
                if grid.neighbor(cell, axis, side) is BOUNDARY:
                    _bc_face(cell, i, axis, side, bc.face(axis, side),
                             grid, None, rhs_bc)
    return rhs_bc


def assemble_uniform(grid: Grid, level: int, scheme: FluxScheme, op: OperatorSpec,
                     bc: BCSpec) -> tuple[SparseMatrix, np.ndarray]:
    """Direct single-level stencil assembly (the independent oracle).

    Rows are built cell by cell from the (1, -2, 1) per-axis stencil without
    any flux pairing or tree machinery; cell order is given by
    :func:`uniform_cell_order`.
    """
    if scheme.order != 2 or scheme.radius != 1:
        raise NotImplementedError("only the two-point second-order flux is built in")
    shape = tuple(grid.axis_cells(level, i) for i in range(grid.dims))
    n = int(np.prod(shape))
    w = grid.widths(level)
    matrix = SparseMatrix(n)
    rhs_bc = np.zeros(n)

    def flat(k: tuple[int, ...]) -> int:
        out = 0
        for i in reversed(range(grid.dims)):
            out = out * shape[i] + k[i]
        return out

    for k in np.ndindex(*reversed(shape)):
        k = tuple(reversed(k))
        i = flat(k)
        for axis in range(grid.dims):
            iw2 = 1.0 / (w[axis] * w[axis])
            for side in (-1, 1):
                kk = k[axis] + side
                if 0 <= kk < shape[axis]:
                    nb = list(k)
                    nb[axis] = kk
                    matrix.add(i, i, -iw2)
                    matrix.add(i, flat(tuple(nb)), iw2)
                    continue
                face = bc.face(axis, side)
                if isinstance(face, (Neumann, Symmetry)):
                    continue
                if isinstance(face, Dirichlet):
                    cell = CellId(level, k)
                    g = face.face_value(grid.face_center(cell, axis, side))
                    matrix.add(i, i, -2.0 * iw2)
                    rhs_bc[i] -= 2.0 * g * iw2
                elif isinstance(face, Robin):
                    cell = CellId(level, k)
                    denom = 1.0 + 0.5 * face.coefficient * w[axis]
                    matrix.add(i, i, -face.coefficient / (w[axis] * denom))
                    g = face.source_value(grid.face_center(cell, axis, side), i)
                    rhs_bc[i] += g / (w[axis] * denom)
                else:
                    raise TypeError(f"unknown boundary condition {face!r}")
        if op.screening:
            matrix.add(i, i, -op.screening)
    return matrix.finalize(), rhs_bc


def uniform_cell_order(grid: Grid, level: int) -> list[CellId]:
    """Cell ids in the flat order used by :func:`assemble_uniform`."""
    shape = tuple(grid.axis_cells(level, i) for i in range(grid.dims))
    return [CellId(level, tuple(reversed(k))) for k in np.ndindex(*reversed(shape))]


def assemble_rhs(forest: Forest, source_values: Sequence[float], op: OperatorSpec,
                 bc: BCSpec, rhs_bc: np.ndarray) -> np.ndarray:
    """Full right-hand side: source cell averages plus boundary data."""
    lm = forest.enumerate_leaves()
    src = np.asarray(source_values, dtype=float)
    rhs_bc = np.asarray(rhs_bc, dtype=float)
    if src.shape != (len(lm),) or rhs_bc.shape != (len(lm),):
        raise ValueError("source and rhs_bc must both have one entry per leaf")
    return src + rhs_bc


# -- gradients -------------------------------------------------------------

def gradient(forest: Forest, values: np.ndarray,
             bc: BCSpec | None = None) -> np.ndarray:
    """Per-axis first derivatives at leaf centers, face-difference averaged.

    Interfaces use the same-level neighbor value through the leaf resolution
    machinery (prediction across coarse/fine jumps, exact averages across
    fine/coarse ones).  Boundary faces use the condition when given,
    otherwise they just drop out of the average.
    """
    grid = forest.grid
    lm = forest.enumerate_leaves()
    values = np.asarray(values, dtype=float)
    if values.shape != (len(lm),):
        raise ValueError(f"expected {len(lm)} leaf values, got {values.shape}")
    out = np.zeros((len(lm), grid.dims))

    def neighbor_value(nb: CellId) -> float:
        rec = forest.cells.get(nb)
        if rec is not None and rec.kind == CellKind.LEAF:
            return float(values[lm.row(nb)])
        rows, wts = forest.resolve_to_leaves(nb)
        return float(np.dot(values[list(rows)], wts))

    for i, cell in enumerate(lm.cells):
        w = grid.widths(cell.level)
        for axis in range(grid.dims):
            acc = 0.0
            cnt = 0
            for side in (-1, 1):
                nb = grid.neighbor(cell, axis, side)
                if nb is BOUNDARY:
                    face = None if bc is None else bc.face(axis, side)
                    if face is None:
                        continue
                    if isinstance(face, (Neumann, Symmetry)):
                        slope = 0.0
                    elif isinstance(face, Dirichlet):
                        g = face.face_value(grid.face_center(cell, axis, side))
                        slope = side * (g - values[i]) / (0.5 * w[axis])
                    elif isinstance(face, Robin):
                        denom = 1.0 + 0.5 * face.coefficient * w[axis]
                        g = face.source_value(grid.face_center(cell, axis, side), i)
                        dn = -(face.coefficient * values[i] + g) / denom
                        slope = side * dn
                    else:
                        raise TypeError(f"unknown boundary condition {face!r}")
                else:
                    slope = side * (neighbor_value(nb) - values[i]) / w[axis]
                acc += slope
                cnt += 1
            out[i, axis] = acc / cnt if cnt else 0.0
    return out
