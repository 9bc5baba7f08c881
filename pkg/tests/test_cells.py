"""Cell addressing and grid geometry."""

import pytest

from mrfv.cells import BOUNDARY, CellId, Grid


def test_parent_child_roundtrip():
    cell = CellId(2, (3, 5))
    assert cell.parent() == CellId(1, (1, 2))
    assert cell in cell.parent().children()


def test_children_order_first_axis_fastest():
    kids = CellId(0, (0, 0)).children()
    assert kids == [CellId(1, (0, 0)), CellId(1, (1, 0)),
                    CellId(1, (0, 1)), CellId(1, (1, 1))]
    # the list position equals the sibling corner
    for m, kid in enumerate(kids):
        assert kid.sibling_corner() == m


def test_children_1d_and_3d():
    assert CellId(1, (3,)).children() == [CellId(2, (6,)), CellId(2, (7,))]
    kids = CellId(0, (0, 0, 0)).children()
    assert len(kids) == 8
    assert kids[5] == CellId(1, (1, 0, 1))  # corner 5 = x high, z high


def test_sibling_corner():
    assert CellId(2, (3, 4)).sibling_corner() == 1
    assert CellId(2, (2, 5)).sibling_corner() == 2
    assert CellId(3, (7, 7)).sibling_corner() == 3


def test_root_coordinates():
    # two roots along x, three along y
    n_roots = (2, 3)
    cell = CellId(1, (3, 5))
    assert cell.root_coords(n_roots) == (1, 2)
    assert cell.local_k() == (1, 1)
    # flattened root number counts the first axis fastest
    assert cell.root_index(n_roots) == 1 + 2 * 2
    assert CellId.from_root((1, 2), 1, (1, 1)) == cell


def test_from_root_level0():
    assert CellId.from_root((1, 2), 0, (0, 0)) == CellId(0, (1, 2))


@pytest.fixture
def grid():
    return Grid(dims=2, n_roots=(1, 2), lo=(0.0, 0.0), hi=(1.0, 2.0),
                max_level=4)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(dims=4, n_roots=(1,) * 4, lo=(0.0,) * 4, hi=(1.0,) * 4, max_level=1)
    with pytest.raises(ValueError):
        Grid(dims=1, n_roots=(1, 1), lo=(0.0,), hi=(1.0,), max_level=1)
    with pytest.raises(ValueError):
        Grid(dims=1, n_roots=(0,), lo=(0.0,), hi=(1.0,), max_level=1)
    with pytest.raises(ValueError):
        Grid(dims=1, n_roots=(1,), lo=(1.0,), hi=(1.0,), max_level=1)
    with pytest.raises(ValueError):
        Grid(dims=1, n_roots=(1,), lo=(0.0,), hi=(1.0,), max_level=-1)


def test_grid_geometry(grid):
    assert grid.root_count == 2
    assert grid.axis_cells(0, 1) == 2
    assert grid.axis_cells(2, 0) == 4
    assert grid.widths(0) == (1.0, 1.0)
    assert grid.widths(1) == (0.5, 0.5)
    assert grid.measure(1) == 0.25
    assert grid.domain_measure() == 2.0
    assert grid.face_area(1, 0) == 0.5


def test_centers_and_faces(grid):
    cell = CellId(1, (1, 2))
    assert grid.center(cell) == (0.75, 1.25)
    assert grid.face_center(cell, 1, -1) == (0.75, 1.0)
    assert grid.face_center(cell, 0, 1) == (1.0, 1.25)


def test_contains(grid):
    assert grid.contains(CellId(1, (1, 3)))
    assert not grid.contains(CellId(1, (2, 0)))   # off the x extent
    assert not grid.contains(CellId(5, (0, 0)))   # beyond max_level
    assert not grid.contains(CellId(1, (0, 4)))


def test_neighbor(grid):
    cell = CellId(1, (0, 0))
    assert grid.neighbor(cell, 0, -1) is BOUNDARY
    assert grid.neighbor(cell, 0, 1) == CellId(1, (1, 0))
    assert grid.neighbor(cell, 1, 1) == CellId(1, (0, 1))
    # neighbor lookups cross root boundaries transparently
    assert grid.neighbor(CellId(0, (0, 0)), 1, 1) == CellId(0, (0, 1))
    assert grid.neighbor(CellId(0, (0, 1)), 1, 1) is BOUNDARY


def test_shifted_diagonal(grid):
    cell = CellId(1, (1, 1))
    assert grid.shifted(cell, (-1, 1)) == CellId(1, (0, 2))
    assert grid.shifted(cell, (1, 0)) is BOUNDARY
    assert grid.shifted(cell, (0, 0)) == cell


def test_roots_order():
    g = Grid(dims=2, n_roots=(2, 2), lo=(0.0, 0.0), hi=(1.0, 1.0), max_level=1)
    assert list(g.roots()) == [CellId(0, (0, 0)), CellId(0, (1, 0)),
                               CellId(0, (0, 1)), CellId(0, (1, 1))]
