"""Dyadic cell addressing on a forest of root grids.

Cells are identified by a refinement level and a per-axis position counted
globally across all root grids, so neighbor and parent/child lookups are
plain integer arithmetic even across root boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Union


class _Boundary:
    """Singleton marker for positions outside the computational domain."""

    _instance = None

    def __new__(cls) -> "_Boundary":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "BOUNDARY"


BOUNDARY = _Boundary()


class CellId(NamedTuple):
    """A dyadic cell: level plus global per-axis index.

    Axis i of level ``j`` spans ``[0, n_roots[i] * 2**j)``.  The owning root
    and the root-local index are derived quantities, see :meth:`root_coords`
    and :meth:`local_k`.
    """

    level: int
    k: tuple[int, ...]

    def parent(self) -> "CellId":
        return CellId(self.level - 1, tuple(c >> 1 for c in self.k))

    def children(self) -> list["CellId"]:
        """All ``2**d`` children, first axis varying fastest."""
        d = len(self.k)
        base = tuple(c << 1 for c in self.k)
        out = []
        for m in range(1 << d):
            out.append(CellId(self.level + 1,
                              tuple(base[i] + ((m >> i) & 1) for i in range(d))))
        return out

    def sibling_corner(self) -> int:
        """Position within the sibling group, first axis in the low bit."""
        return sum((self.k[i] & 1) << i for i in range(len(self.k)))

    def root_coords(self, n_roots: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(c >> self.level for c in self.k)

    def root_index(self, n_roots: tuple[int, ...]) -> int:
        """Flattened root number, first axis varying fastest."""
        coords = self.root_coords(n_roots)
        r = 0
        for i in reversed(range(len(coords))):
            r = r * n_roots[i] + coords[i]
        return r

    def local_k(self) -> tuple[int, ...]:
        """Index within the owning root, each component in ``[0, 2**level)``."""
        mask = (1 << self.level) - 1
        return tuple(c & mask for c in self.k)

    @staticmethod
    def from_root(root_coords: tuple[int, ...], level: int,
                  local_k: tuple[int, ...]) -> "CellId":
        return CellId(level, tuple((r << level) + c
                                   for r, c in zip(root_coords, local_k)))


NeighborResult = Union[CellId, _Boundary]


@dataclass(frozen=True)
class Grid:
    """Domain geometry: a box tiled by ``n_roots`` level-0 cells per axis."""

    dims: int
    n_roots: tuple[int, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    max_level: int

    def __post_init__(self) -> None:
        if self.dims not in (1, 2, 3):
            raise ValueError(f"dims must be 1, 2 or 3, got {self.dims}")
        for name in ("n_roots", "lo", "hi"):
            if len(getattr(self, name)) != self.dims:
                raise ValueError(f"{name} must have {self.dims} entries")
        if any(n < 1 for n in self.n_roots):
            raise ValueError("n_roots entries must be positive")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("domain extents must be positive")
        if self.max_level < 0:
            raise ValueError("max_level must be nonnegative")

    @property
    def root_count(self) -> int:
        n = 1
        for m in self.n_roots:
            n *= m
        return n

    def axis_cells(self, level: int, axis: int) -> int:
        return self.n_roots[axis] << level

    def widths(self, level: int) -> tuple[float, ...]:
        return tuple((self.hi[i] - self.lo[i]) / self.axis_cells(level, i)
                     for i in range(self.dims))

    def measure(self, level: int) -> float:
        m = 1.0
        for w in self.widths(level):
            m *= w
        return m

    def domain_measure(self) -> float:
        m = 1.0
        for l, h in zip(self.lo, self.hi):
            m *= h - l
        return m

    def center(self, cell: CellId) -> tuple[float, ...]:
        w = self.widths(cell.level)
        return tuple(self.lo[i] + (cell.k[i] + 0.5) * w[i]
                     for i in range(self.dims))

    def face_center(self, cell: CellId, axis: int, side: int) -> tuple[float, ...]:
        w = self.widths(cell.level)
        c = list(self.center(cell))
        c[axis] += 0.5 * side * w[axis]
        return tuple(c)

    def face_area(self, level: int, axis: int) -> float:
        return self.measure(level) / self.widths(level)[axis]

    def contains(self, cell: CellId) -> bool:
        if not 0 <= cell.level <= self.max_level:
            return False
        return all(0 <= cell.k[i] < self.axis_cells(cell.level, i)
                   for i in range(self.dims))

    def neighbor(self, cell: CellId, axis: int, side: int) -> NeighborResult:
        """Same-level neighbor across a face; BOUNDARY outside the domain."""
        kk = cell.k[axis] + side
        if not 0 <= kk < self.axis_cells(cell.level, axis):
            return BOUNDARY
        k = list(cell.k)
        k[axis] = kk
        return CellId(cell.level, tuple(k))

    def shifted(self, cell: CellId, offsets: tuple[int, ...]) -> NeighborResult:
        """Same-level cell displaced by a per-axis offset (diagonals allowed)."""
        k = []
        for i in range(self.dims):
            kk = cell.k[i] + offsets[i]
            if not 0 <= kk < self.axis_cells(cell.level, i):
                return BOUNDARY
            k.append(kk)
        return CellId(cell.level, tuple(k))

    def roots(self) -> Iterator[CellId]:
        """Level-0 cells in root-major order (first axis fastest)."""
        idx = [0] * self.dims
        total = self.root_count
        for _ in range(total):
            yield CellId(0, tuple(idx))
            for i in range(self.dims):
                idx[i] += 1
                if idx[i] < self.n_roots[i]:
                    break
                idx[i] = 0
