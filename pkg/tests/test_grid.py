import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import quad

from nearwell import grid


def overlap_by_quadrature(r, rect):
    """Disk-rectangle overlap from the chord length integrated along x."""
    x0, x1, y0, y1 = rect
    lo, hi = max(x0, -r), min(x1, r)
    if hi <= lo:
        return 0.0

    def chord(x):
        half = math.sqrt(max(r * r - x * x, 0.0))
        return max(0.0, min(y1, half) - max(y0, -half))

    # integrate piecewise between the kinks of the chord length
    kinks = [math.sqrt(r * r - y * y) for y in (y0, y1) if abs(y) < r]
    cuts = sorted({lo, hi, *(s * k for k in kinks for s in (-1, 1) if lo < s * k < hi)})
    return sum(quad(chord, a, b, epsabs=1e-14, epsrel=1e-12)[0] for a, b in zip(cuts[:-1], cuts[1:]))


def test_radial_grid_faces():
    g = grid.build_radial_log_grid(0.25, 100.0, 50, [5.0])
    assert g.n_cells == 50
    assert g.r_faces[0] == 0.25 and g.r_faces[-1] == 100.0
    getcontext().prec = 40
    face25 = Decimal("0.25") * (Decimal(400) ** (Decimal(25) / Decimal(50)))
    assert_allclose(g.r_faces[25], float(face25), rtol=1e-14)
    assert_allclose(g.r_faces[25], 5.0, rtol=1e-14)


def test_single_ring_grid():
    g = grid.build_radial_log_grid(1.0, math.e, 1, [1.0])
    assert_allclose(g.r_faces, [1.0, math.e])
    assert g.connectivity(1e-12).n_faces == 0


@pytest.mark.parametrize("args", [(0.0, 10.0, 5), (1.0, 0.5, 5), (0.25, 100.0, 0), (0.25, 100.0, 2.5)])
def test_radial_grid_rejects_bad_geometry(args):
    with pytest.raises(grid.InvalidGeometryError):
        grid.build_radial_log_grid(*args, [1.0])


def test_radial_transmissibility():
    g = grid.build_radial_log_grid(1.0, math.e**3, 3, [5.0])
    # centre radii are e^0.5, e^1.5, e^2.5 so consecutive ratios are e
    assert_allclose(grid.radial_transmissibility(g, 1, 1e-12, 5.0), 2 * math.pi * 5e-12, rtol=1e-13)
    assert_allclose(grid.radial_transmissibility(g, 1, 2e-12, 5.0), 2 * grid.radial_transmissibility(g, 1, 1e-12, 5.0))
    assert grid.radial_transmissibility(g, 1, 0.0, 5.0) == 0.0
    with pytest.raises(IndexError):
        grid.radial_transmissibility(g, 0, 1e-12, 5.0)


def test_radial_connectivity_matches_face_formula():
    g = grid.build_radial_log_grid(0.25, 100.0, 10, [2.0, 3.0])
    conn = g.connectivity([1e-12, 2e-12], [0.5e-12, 1e-12])
    radial = conn.trans[: 2 * 9].reshape(2, 9)
    for i in range(1, 10):
        assert_allclose(radial[1, i - 1], grid.radial_transmissibility(g, i, 2e-12, 3.0), rtol=1e-13)
    vertical = conn.trans[18:]
    assert_allclose(vertical, g.ring_areas / (1.0 / 0.5e-12 + 1.5 / 1e-12), rtol=1e-13)
    assert_allclose(conn.bulk_volume.sum(), math.pi * (100.0**2 - 0.25**2) * 5.0, rtol=1e-12)


def test_cartesian_transmissibility():
    g = grid.build_cartesian_grid([1.0, 1.0], [1.0], [1.0])
    assert_allclose(grid.cartesian_transmissibility(g, (0, 0, 0, "x"), 1e-12, 3e-12), 1.5e-12, rtol=1e-14)
    assert_allclose(grid.cartesian_transmissibility(g, (0, 0, 0, "x"), 2e-12, 2e-12), 2e-12, rtol=1e-14)
    assert grid.cartesian_transmissibility(g, (0, 0, 0, "x"), 0.0, 1e-12) == 0.0


def test_uniform_well_grid_centres_well():
    g = grid.uniform_well_grid(1100.0, 100.0, [5.0], quarter=False)
    assert g.n_x == 11 and g.n_y == 11
    x, y = g.cell_centers()
    i, j = g.well_column
    assert_allclose([x[i], y[j]], [0.0, 0.0], atol=1e-12)


def test_quarter_grid_has_quarter_volume():
    full = grid.uniform_well_grid(1100.0, 100.0, [5.0], quarter=False)
    quarter = grid.uniform_well_grid(1100.0, 100.0, [5.0], quarter=True)
    assert_allclose(quarter.cell_volumes().sum(), 0.25 * full.cell_volumes().sum(), rtol=1e-12)


def test_two_zone_grid_resolution():
    g = grid.two_zone_grid(1100.0, 4.5, 18.0, 50.0, [5.0], quarter=False)
    assert g.dx[g.well_column[0]] == 4.5
    assert g.dx.min() == 4.5 and g.dx.max() == 18.0
    assert abs(g.dx.sum() - 1100.0) < 18.0
    assert g.n_x % 2 == 1


def test_circle_rect_containment():
    assert_allclose(grid.circle_rect_overlap(1.0, (-5, 5, -5, 5)), math.pi, rtol=1e-14)
    assert_allclose(grid.circle_rect_overlap(10.0, (-1, 2, -3, 1)), 12.0, rtol=1e-14)
    assert_allclose(grid.circle_rect_overlap(1.0, (0, 10, -10, 10)), math.pi / 2, rtol=1e-14)
    assert grid.circle_rect_overlap(0.0, (-1, 1, -1, 1)) == 0.0


@settings(max_examples=60, deadline=None)
@given(
    r=st.floats(0.1, 20.0),
    x0=st.floats(-25.0, 25.0), w=st.floats(0.1, 30.0),
    y0=st.floats(-25.0, 25.0), hgt=st.floats(0.1, 30.0),
)
def test_circle_rect_matches_quadrature(r, x0, w, y0, hgt):
    rect = (x0, x0 + w, y0, y0 + hgt)
    assert_allclose(grid.circle_rect_overlap(r, rect), overlap_by_quadrature(r, rect), rtol=1e-8, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(r_in=st.floats(0.0, 30.0), width=st.floats(0.01, 40.0), cell=st.floats(3.0, 40.0))
def test_annulus_overlaps_partition_the_annulus(r_in, width, cell):
    r_out = r_in + width
    n = int(math.ceil(r_out / cell)) + 1
    edges = cell * np.arange(-n, n + 1)
    total = sum(
        grid.annulus_rect_overlap(r_in, r_out, (edges[a], edges[a + 1], edges[b], edges[b + 1]))
        for a in range(2 * n) for b in range(2 * n)
    )
    assert_allclose(total, math.pi * (r_out**2 - r_in**2), rtol=1e-9)
