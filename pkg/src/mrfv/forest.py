"""Graded dyadic forests with phantom cells.

A forest stores the tree cells of every root grid in a single hash map.
Inner cells always carry their full sibling group of children; leaves carry
the resolved field values; phantoms are virtual children of leaves that stand
in for missing same-level flux neighbors and never hold independent data.

The grading rule enforced here is the interpolation-stencil closure: for every
tree cell, all in-domain neighbors of its parent (faces and corners) are tree
cells too.  This implies that adjacent leaves differ by at most one level
across any shared face or corner, and that every prediction stencil a leaf or
phantom needs is representable.
"""

from __future__ import annotations

from collections import deque
from enum import IntEnum
from itertools import product
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .cells import BOUNDARY, CellId, Grid
from .errors import GradingError
from .prediction import PredictionScheme


class CellKind(IntEnum):
    LEAF = 0
    INNER = 1
    PHANTOM = 2


class CellRecord:
    """Per-cell payload: role in the tree plus one real cell-average slot."""

    __slots__ = ("kind", "value")

    def __init__(self, kind: CellKind, value: float = np.nan):
        self.kind = kind
        self.value = value

    def __repr__(self) -> str:
        return f"CellRecord({CellKind(self.kind).name}, {self.value!r})"


class LeafMap:
    """Bijection between leaves and contiguous indices ``1..N_L``.

    The enumeration is root-major, then depth-first with the first axis
    varying fastest within each sibling group, which interleaves level bits
    the way a Z-order curve does.  ``row`` gives the zero-based position used
    for vectors and matrix rows.
    """

    def __init__(self, cells: list[CellId]):
        self.cells = cells
        self._forward = {c: i + 1 for i, c in enumerate(cells)}

    def __len__(self) -> int:
        return len(self.cells)

    def __contains__(self, cell: CellId) -> bool:
        return cell in self._forward

    def index(self, cell: CellId) -> int:
        return self._forward[cell]

    def row(self, cell: CellId) -> int:
        return self._forward[cell] - 1

    def cell_at(self, index: int) -> CellId:
        if not 1 <= index <= len(self.cells):
            raise KeyError(f"leaf index {index} outside [1, {len(self.cells)}]")
        return self.cells[index - 1]


class Forest:
    """Mutable cell container over a :class:`Grid`.

    Construction mutates the forest (refine / grading / phantom insertion);
    afterwards :meth:`finalize` freezes the leaf enumeration.  Reads after
    finalize are safe to share; any further mutation invalidates the cached
    enumeration and resolver state.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        self.cells: dict[CellId, CellRecord] = {}
        self.scheme = PredictionScheme()
        self.leafmap: LeafMap | None = None
        self._resolve_cache: dict[CellId, tuple[tuple[int, ...], tuple[float, ...]]] = {}
        for r in grid.roots():
            self.cells[r] = CellRecord(CellKind.LEAF)

    # -- constructors ------------------------------------------------------

    @classmethod
    def roots_only(cls, grid: Grid) -> "Forest":
        return cls(grid)

    @classmethod
    def uniform(cls, grid: Grid, level: int | None = None) -> "Forest":
        """Fully refined forest down to ``level`` (default ``grid.max_level``)."""
        level = grid.max_level if level is None else level
        f = cls(grid)
        frontier = list(grid.roots())
        for _ in range(level):
            nxt = []
            for c in frontier:
                f.refine(c)
                nxt.extend(c.children())
            frontier = nxt
        return f

    # -- basic structure ---------------------------------------------------

    def kind(self, cell: CellId) -> CellKind | None:
        rec = self.cells.get(cell)
        return None if rec is None else rec.kind

    def is_leaf(self, cell: CellId) -> bool:
        rec = self.cells.get(cell)
        return rec is not None and rec.kind == CellKind.LEAF

    def children(self, cell: CellId) -> list[CellId]:
        if cell.level >= self.grid.max_level:
            raise GradingError(
                f"children of {cell} would exceed max_level={self.grid.max_level}")
        return cell.children()

    def refine(self, cell: CellId) -> list[CellId]:
        """Turn a leaf into an inner cell, creating its full sibling group."""
        rec = self.cells.get(cell)
        if rec is None:
            raise KeyError(f"cannot refine absent cell {cell}")
        if rec.kind == CellKind.PHANTOM:
            raise GradingError(f"cannot refine phantom cell {cell}")
        if rec.kind == CellKind.INNER:
            return cell.children()
        kids = self.children(cell)
        for c in kids:
            if c in self.cells:
                raise GradingError(f"child {c} already present before refine")
            self.cells[c] = CellRecord(CellKind.LEAF)
        rec.kind = CellKind.INNER
        self._invalidate()
        return kids

    def ensure_refined(self, cell: CellId) -> list[CellId]:
        """Refine ``cell``, creating any missing ancestors on the way down.

        Returns every cell created by the call, deepest last.
        """
        created: list[CellId] = []
        if cell not in self.cells:
            created.extend(self.ensure_refined(cell.parent()))
        if self.cells[cell].kind != CellKind.INNER:
            before = set(cell.children()) - self.cells.keys()
            self.refine(cell)
            created.extend(c for c in cell.children() if c in before)
        return created

    def tree_cells(self) -> Iterator[CellId]:
        for c, rec in self.cells.items():
            if rec.kind != CellKind.PHANTOM:
                yield c

    def leaves(self) -> Iterator[CellId]:
        for c, rec in self.cells.items():
            if rec.kind == CellKind.LEAF:
                yield c

    def phantoms(self) -> Iterator[CellId]:
        for c, rec in self.cells.items():
            if rec.kind == CellKind.PHANTOM:
                yield c

    def _invalidate(self) -> None:
        self.leafmap = None
        self._resolve_cache.clear()

    # -- grading -----------------------------------------------------------

    def _neighbor_offsets(self) -> list[tuple[int, ...]]:
        return [o for o in product((-1, 0, 1), repeat=self.grid.dims)
                if any(o)]

    def ensure_graded(self) -> "Forest":
        """Close the forest under the stencil grading rule (in place).

        Monotone (only adds cells) and idempotent.  Phantoms are ignored:
        grading concerns the tree proper and runs before phantom insertion.
        """
        offsets = self._neighbor_offsets()
        pending = deque(c for c in self.tree_cells() if c.level >= 1)
        while pending:
            cell = pending.popleft()
            rec = self.cells.get(cell)
            if rec is None or rec.kind == CellKind.PHANTOM:
                continue
            parent = cell.parent()
            for off in offsets:
                n = self.grid.shifted(parent, off)
                if n is BOUNDARY:
                    continue
                nrec = self.cells.get(n)
                if nrec is not None and nrec.kind != CellKind.PHANTOM:
                    continue
                if nrec is not None:
                    raise GradingError(
                        f"grading requires {n} which is materialized as a phantom")
                for fresh in self.ensure_refined(n.parent()):
                    if fresh.level >= 1:
                        pending.append(fresh)
        return self

    # -- phantoms ----------------------------------------------------------

    def insert_phantoms(self, flux_stencil_radius: int = 1) -> "Forest":
        """Materialize missing same-level flux neighbors of every leaf.

        A phantom is always created as a child of an existing leaf; anything
        else means the forest is not graded and raises.
        """
        created = []
        for leaf in list(self.leaves()):
            for axis in range(self.grid.dims):
                for side in (-1, 1):
                    cur = leaf
                    for _ in range(flux_stencil_radius):
                        n = self.grid.neighbor(cur, axis, side)
                        if n is BOUNDARY:
                            break
                        if n not in self.cells:
                            prec = self.cells.get(n.parent())
                            if prec is None or prec.kind != CellKind.LEAF:
                                raise GradingError(
                                    f"phantom {n} would not be the child of a leaf; "
                                    f"forest is not graded near {leaf}")
                            self.cells[n] = CellRecord(CellKind.PHANTOM)
                            created.append(n)
                        cur = n
        if created:
            self._invalidate()
        return self

    # -- enumeration -------------------------------------------------------

    def enumerate_leaves(self) -> LeafMap:
        """Root-major, Z-order leaf enumeration; cached until mutation."""
        if self.leafmap is not None:
            return self.leafmap
        out: list[CellId] = []
        for root in self.grid.roots():
            stack = [root]
            while stack:
                cell = stack.pop()
                rec = self.cells[cell]
                if rec.kind == CellKind.LEAF:
                    out.append(cell)
                elif rec.kind == CellKind.INNER:
                    stack.extend(reversed(cell.children()))
        self.leafmap = LeafMap(out)
        return self.leafmap

    def finalize(self, flux_stencil_radius: int = 1) -> LeafMap:
        self.ensure_graded()
        self.insert_phantoms(flux_stencil_radius)
        return self.enumerate_leaves()

    @property
    def leaf_count(self) -> int:
        return len(self.enumerate_leaves())

    # -- value resolution --------------------------------------------------

    def resolve_to_leaves(self, cell: CellId):
        """Express a cell average as weights over leaf rows.

        Leaves resolve to themselves; inner cells distribute through the
        exact child average; phantoms and other virtual cells expand through
        the prediction stencil of their parent, recursively.  Termination is
        guaranteed because prediction steps strictly decrease the level and
        root cells always exist.

        Returns ``(rows, weights)`` as parallel tuples; rows are zero-based.
        """
        cached = self._resolve_cache.get(cell)
        if cached is not None:
            return cached
        lm = self.enumerate_leaves()
        rec = self.cells.get(cell)
        if rec is not None and rec.kind == CellKind.LEAF:
            result = ((lm.row(cell),), (1.0,))
        elif rec is not None and rec.kind == CellKind.INNER:
            acc: dict[int, float] = {}
            share = 1.0 / (1 << self.grid.dims)  # equal child measures
            for child in cell.children():
                rows, wts = self.resolve_to_leaves(child)
                for r, w in zip(rows, wts):
                    acc[r] = acc.get(r, 0.0) + share * w
            result = (tuple(acc.keys()), tuple(acc.values()))
        else:
            if cell.level == 0:
                raise GradingError(f"root cell {cell} missing from forest")
            parent = cell.parent()
            corner = cell.sibling_corner()
            d = self.grid.dims
            axis_stencils = []
            for i in range(d):
                n = self.grid.axis_cells(parent.level, i)
                offs, coefs = self.scheme.axis_coefficients(
                    parent.k[i], n, (corner >> i) & 1)
                axis_stencils.append(list(zip(offs, coefs)))
            acc = {}
            for combo in product(*axis_stencils):
                coef = 1.0
                for _, c in combo:
                    coef *= c
                member = self.grid.shifted(parent, tuple(o for o, _ in combo))
                if member is BOUNDARY:
                    raise GradingError(
                        f"prediction stencil of {cell} leaves the domain")
                rows, wts = self.resolve_to_leaves(member)
                for r, w in zip(rows, wts):
                    acc[r] = acc.get(r, 0.0) + coef * w
            result = (tuple(acc.keys()), tuple(acc.values()))
        self._resolve_cache[cell] = result
        return result

    # -- values ------------------------------------------------------------

    def set_leaf_values(self, values: Sequence[float]) -> None:
        lm = self.enumerate_leaves()
        arr = np.asarray(values, dtype=float)
        if arr.shape != (len(lm),):
            raise ValueError(f"expected {len(lm)} leaf values, got {arr.shape}")
        for i, cell in enumerate(lm.cells):
            self.cells[cell].value = float(arr[i])

    def leaf_values(self) -> np.ndarray:
        lm = self.enumerate_leaves()
        return np.array([self.cells[c].value for c in lm.cells], dtype=float)

    def sync_values(self, leaf_values: Sequence[float] | None = None) -> None:
        """Propagate leaf data: inner cells by exact averaging (coarsest last),
        phantoms by prediction from the resolved leaf data."""
        if leaf_values is not None:
            self.set_leaf_values(leaf_values)
        by_level: dict[int, list[CellId]] = {}
        for c, rec in self.cells.items():
            if rec.kind == CellKind.INNER:
                by_level.setdefault(c.level, []).append(c)
        share = 1.0 / (1 << self.grid.dims)
        for level in sorted(by_level, reverse=True):
            for cell in by_level[level]:
                self.cells[cell].value = share * sum(
                    self.cells[ch].value for ch in cell.children())
        vals = self.leaf_values()
        for p in self.phantoms():
            rows, wts = self.resolve_to_leaves(p)
            self.cells[p].value = float(np.dot(vals[list(rows)], wts))

    # -- diagnostics -------------------------------------------------------

    def leaf_measure_total(self) -> float:
        return sum(self.grid.measure(c.level) for c in self.leaves())

    def dump(self, stream) -> None:
        """One line per cell: kind, root, level, per-root index, value."""
        order = sorted(self.cells, key=lambda c: (c.level, c.k))
        for cell in order:
            rec = self.cells[cell]
            fields = [CellKind(rec.kind).name.lower(),
                      str(cell.root_index(self.grid.n_roots)),
                      str(cell.level)]
            fields.extend(str(x) for x in cell.local_k())
            fields.append(f"{rec.value:.17g}")
            stream.write(" ".join(fields) + "\n")


def transfer_leaf_values(src: Forest, dst: Forest, values: np.ndarray) -> np.ndarray:
    """Carry a leaf field from one forest to another over the same grid.

    Coarsened regions pick up exact child averages, refined regions predicted
    values, via the source forest's leaf resolution.
    """
    values = np.asarray(values, dtype=float)
    lm_dst = dst.enumerate_leaves()
    out = np.empty(len(lm_dst), dtype=float)
    for i, cell in enumerate(lm_dst.cells):
        rows, wts = src.resolve_to_leaves(cell)
        out[i] = float(np.dot(values[list(rows)], wts))
    return out
