"""Radial and Cartesian grids, two-point transmissibilities and overlap geometry.

Both grid types reduce to a :class:`Connectivity` (cells plus faces with
geometric transmissibilities) which is all the flow solver needs. Cells are
numbered layer-major: ``cell = layer * n_columns + column``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InvalidGeometryError(ValueError):
    """Raised for non-positive or non-monotone geometric input."""


@dataclass(frozen=True)
class Connectivity:
    """Cell/face graph of a grid with permeability-weighted transmissibilities."""

    bulk_volume: np.ndarray  # m³
    pv_multiplier: np.ndarray  # dimensionless, 1 except at the lateral boundary
    depth: np.ndarray  # m, positive downwards
    face_cells: np.ndarray  # (n_faces, 2)
    trans: np.ndarray  # m³

    @property
    def n_cells(self) -> int:
        return self.bulk_volume.shape[0]

    @property
    def n_faces(self) -> int:
        return self.face_cells.shape[0]


def _check_heights(layer_heights) -> np.ndarray:
    h = np.atleast_1d(np.asarray(layer_heights, dtype=float))
    if h.size == 0 or np.any(~np.isfinite(h)) or np.any(h <= 0):
        raise InvalidGeometryError(f"layer heights must be positive, got {h}")
    return h


def _layer_depths(heights: np.ndarray, top: float) -> np.ndarray:
    return top + np.cumsum(heights) - 0.5 * heights


# ---------------------------------------------------------------------------
# radial grid


@dataclass(frozen=True)
class RadialGrid:
    """Axisymmetric logarithmic grid around a well with vertical layering."""

    r_w: float
    r_outer: float
    n_r: int
    layer_heights: np.ndarray
    r_faces: np.ndarray
    depth_top: float = 0.0
    boundary_pv_multiplier: float = 1.0

    @property
    def n_z(self) -> int:
        return self.layer_heights.shape[0]

    @property
    def n_cells(self) -> int:
        return self.n_r * self.n_z

    @property
    def r_centers(self) -> np.ndarray:
        # geometric mean: the steady radial profile is linear in ln r
        return np.sqrt(self.r_faces[:-1] * self.r_faces[1:])

    @property
    def ring_areas(self) -> np.ndarray:
        return np.pi * (self.r_faces[1:] ** 2 - self.r_faces[:-1] ** 2)

    @property
    def layer_depths(self) -> np.ndarray:
        return _layer_depths(self.layer_heights, self.depth_top)

    def cell_volumes(self) -> np.ndarray:
        return np.outer(self.layer_heights, self.ring_areas).ravel()

    def cell_index(self, layer: int, ring: int) -> int:
        return layer * self.n_r + ring

    def connectivity(self, k_h, k_v=None) -> Connectivity:
        """Connectivity for per-layer horizontal/vertical permeability (m²)."""
        k_h = np.broadcast_to(np.asarray(k_h, dtype=float), (self.n_z,))
        k_v = k_h if k_v is None else np.broadcast_to(np.asarray(k_v, dtype=float), (self.n_z,))
        nr, nz = self.n_r, self.n_z
        cells = np.arange(self.n_cells).reshape(nz, nr)
        faces, trans = [], []
        if nr > 1:
            lnr = np.log(self.r_centers[1:] / self.r_centers[:-1])
            t = 2.0 * np.pi * np.outer(k_h * self.layer_heights, 1.0 / lnr)
            faces.append(np.stack([cells[:, :-1].ravel(), cells[:, 1:].ravel()], axis=1))
            trans.append(t.ravel())
        if nz > 1:
            h = self.layer_heights
            with np.errstate(divide="ignore"):
                resist = 0.5 * h[:-1] / k_v[:-1] + 0.5 * h[1:] / k_v[1:]
            t = np.outer(np.where(np.isfinite(resist), 1.0 / resist, 0.0), self.ring_areas)
            faces.append(np.stack([cells[:-1, :].ravel(), cells[1:, :].ravel()], axis=1))
            trans.append(t.ravel())
        mult = np.ones((nz, nr))
        mult[:, -1] = self.boundary_pv_multiplier
        depth = np.repeat(self.layer_depths, nr)
        return Connectivity(
            bulk_volume=self.cell_volumes(),
            pv_multiplier=mult.ravel(),
            depth=depth,
            face_cells=np.concatenate(faces) if faces else np.zeros((0, 2), dtype=int),
            trans=np.concatenate(trans) if trans else np.zeros(0),
        )


def build_radial_log_grid(
    r_w: float,
    r_outer: float,
    n_r: int,
    layer_heights,
    depth_top: float = 0.0,
    boundary_pv_multiplier: float = 1.0,
) -> RadialGrid:
    """Logarithmically spaced faces ``r_i = r_w (r_outer/r_w)^(i/n_r)``."""
    if not (np.isfinite(r_w) and np.isfinite(r_outer)) or not 0 < r_w < r_outer:
        raise InvalidGeometryError(f"need 0 < r_w < r_outer, got r_w={r_w}, r_outer={r_outer}")
    if int(n_r) != n_r or n_r < 1:
        raise InvalidGeometryError(f"n_r must be a positive integer, got {n_r}")
    if boundary_pv_multiplier < 1:
        raise InvalidGeometryError("boundary pore-volume multiplier must be >= 1")
    heights = _check_heights(layer_heights)
    i = np.arange(n_r + 1)
    r_faces = r_w * (r_outer / r_w) ** (i / n_r)
    r_faces[0], r_faces[-1] = r_w, r_outer
    return RadialGrid(
        r_w=float(r_w),
        r_outer=float(r_outer),
        n_r=int(n_r),
        layer_heights=heights,
        r_faces=r_faces,
        depth_top=float(depth_top),
        boundary_pv_multiplier=float(boundary_pv_multiplier),
    )


def radial_transmissibility(grid: RadialGrid, i: int, k: float, h: float) -> float:
    """TPFA transmissibility of interior face ``i`` (between rings ``i-1`` and ``i``)."""
    if not 1 <= i <= grid.n_r - 1:
        raise IndexError(f"face {i} is not an interior face of a {grid.n_r}-ring grid")
    rc = grid.r_centers
    return 2.0 * math.pi * k * h / math.log(rc[i] / rc[i - 1])


# ---------------------------------------------------------------------------
# Cartesian grid


@dataclass(frozen=True)
class CartesianGrid:
    """Tensor-product grid with the well column at its centre.

    ``dx``/``dy``/``dz`` hold per-column, per-row and per-layer widths. With
    ``quarter=True`` only the quadrant ``x, y >= 0`` is stored: the first
    column and row straddle the symmetry planes, so their volumes and the
    areas of faces cut by a plane are halved.
    """

    dx: np.ndarray
    dy: np.ndarray
    dz: np.ndarray
    pore_volume_multiplier_boundary: float = 1.0
    quarter: bool = False
    depth_top: float = 0.0

    @property
    def n_x(self) -> int:
        return self.dx.shape[0]

    @property
    def n_y(self) -> int:
        return self.dy.shape[0]

    @property
    def n_z(self) -> int:
        return self.dz.shape[0]

    @property
    def n_cells(self) -> int:
        return self.n_x * self.n_y * self.n_z

    @property
    def n_columns(self) -> int:
        return self.n_x * self.n_y

    @property
    def well_column(self) -> tuple[int, int]:
        if self.quarter:
            return 0, 0
        return self.n_x // 2, self.n_y // 2

    @property
    def layer_depths(self) -> np.ndarray:
        return _layer_depths(self.dz, self.depth_top)

    def cell_index(self, i: int, j: int, layer: int) -> int:
        return (layer * self.n_y + j) * self.n_x + i

    def _sym_factors(self) -> tuple[np.ndarray, np.ndarray]:
        fx = np.ones(self.n_x)
        fy = np.ones(self.n_y)
        if self.quarter:
            fx[0] = fy[0] = 0.5
        return fx, fy

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """x and y coordinates of column centres relative to the well."""
        def centers(w, quarter):
            edges = np.concatenate([[0.0], np.cumsum(w)])
            c = 0.5 * (edges[:-1] + edges[1:])
            return c - (0.5 * w[0] if quarter else edges[-1] / 2)
        return centers(self.dx, self.quarter), centers(self.dy, self.quarter)

    def cell_volumes(self) -> np.ndarray:
        fx, fy = self._sym_factors()
        area = np.outer(self.dy * fy, self.dx * fx)
        return (self.dz[:, None, None] * area[None]).ravel()

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros((self.n_y, self.n_x), dtype=bool)
        m[:, -1] = m[-1, :] = True
        if not self.quarter:
            m[:, 0] = m[0, :] = True
        return np.broadcast_to(m, (self.n_z, self.n_y, self.n_x)).ravel()

    def connectivity(self, k_h, k_v=None) -> Connectivity:
        """Connectivity for per-layer horizontal/vertical permeability (m²)."""
        nx, ny, nz = self.n_x, self.n_y, self.n_z
        k_h = np.broadcast_to(np.asarray(k_h, dtype=float), (nz,))
        k_v = k_h if k_v is None else np.broadcast_to(np.asarray(k_v, dtype=float), (nz,))
        fx, fy = self._sym_factors()
        cells = np.arange(self.n_cells).reshape(nz, ny, nx)
        kh3 = np.broadcast_to(k_h[:, None, None], (nz, ny, nx))
        faces, trans = [], []
        if nx > 1:
            area = np.outer(self.dz, self.dy * fy)[:, :, None]
            t = area / (0.5 * self.dx[:-1] / kh3[:, :, :-1] + 0.5 * self.dx[1:] / kh3[:, :, 1:])
            faces.append(np.stack([cells[:, :, :-1].ravel(), cells[:, :, 1:].ravel()], 1))
            trans.append(t.ravel())
        if ny > 1:
            area = np.outer(self.dz, self.dx * fx)[:, None, :]
            dy = self.dy[None, :, None]
            t = area / (0.5 * dy[:, :-1] / kh3[:, :-1, :] + 0.5 * dy[:, 1:] / kh3[:, 1:, :])
            faces.append(np.stack([cells[:, :-1, :].ravel(), cells[:, 1:, :].ravel()], 1))
            trans.append(t.ravel())
        if nz > 1:
            area = np.outer(self.dy * fy, self.dx * fx)[None]
            with np.errstate(divide="ignore"):
                resist = 0.5 * self.dz[:-1] / k_v[:-1] + 0.5 * self.dz[1:] / k_v[1:]
            cond = np.where(np.isfinite(resist), 1.0 / resist, 0.0)
            t = cond[:, None, None] * area
            faces.append(np.stack([cells[:-1].ravel(), cells[1:].ravel()], 1))
            trans.append(t.ravel())
        mult = np.where(self.boundary_mask(), self.pore_volume_multiplier_boundary, 1.0)
        depth = np.repeat(self.layer_depths, ny * nx)
        return Connectivity(
            bulk_volume=self.cell_volumes(),
            pv_multiplier=mult,
            depth=depth,
            face_cells=np.concatenate(faces) if faces else np.zeros((0, 2), dtype=int),
            trans=np.concatenate(trans) if trans else np.zeros(0),
        )


def _widths(w, n=None) -> np.ndarray:
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if n is not None and w.size == 1:
        w = np.full(int(n), w[0])
    if w.size == 0 or np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise InvalidGeometryError(f"cell sizes must be positive, got {w}")
    return w


def build_cartesian_grid(
    dx,
    dy,
    dz,
    n_x: int | None = None,
    n_y: int | None = None,
    n_z: int | None = None,
    pore_volume_multiplier_boundary: float = 1.0,
    quarter: bool = False,
    depth_top: float = 0.0,
) -> CartesianGrid:
    """Build a Cartesian grid from scalar sizes and counts or from width arrays."""
    if pore_volume_multiplier_boundary < 1:
        raise InvalidGeometryError("boundary pore-volume multiplier must be >= 1")
    for n in (n_x, n_y, n_z):
        if n is not None and n < 1:
            raise InvalidGeometryError("cell counts must be >= 1")
    return CartesianGrid(
        dx=_widths(dx, n_x),
        dy=_widths(dy, n_y),
        dz=_widths(dz, n_z),
        pore_volume_multiplier_boundary=float(pore_volume_multiplier_boundary),
        quarter=bool(quarter),
        depth_top=float(depth_top),
    )


def uniform_well_grid(
    domain: float,
    cell_size: float,
    layer_heights,
    pore_volume_multiplier_boundary: float = 1e6,
    quarter: bool = True,
    depth_top: float = 0.0,
) -> CartesianGrid:
    """Square grid of ``cell_size`` cells with an odd cell count so the well sits
    at a cell centre; the domain is the odd multiple of ``cell_size`` closest to
    ``domain``."""
    n = max(1, int(round(domain / cell_size)))
    if n % 2 == 0:
        n = n + 1 if abs((n + 1) * cell_size - domain) <= abs((n - 1) * cell_size - domain) else n - 1
    n = max(n, 1)
    widths = np.full(n, float(cell_size))
    if quarter:
        widths = widths[n // 2:]
    return build_cartesian_grid(
        widths, widths, layer_heights,
        pore_volume_multiplier_boundary=pore_volume_multiplier_boundary,
        quarter=quarter, depth_top=depth_top,
    )


def two_zone_grid(
    domain: float,
    fine_size: float,
    coarse_size: float,
    near_extent: float,
    layer_heights,
    pore_volume_multiplier_boundary: float = 1e6,
    quarter: bool = True,
    depth_top: float = 0.0,
) -> CartesianGrid:
    """Refined near-well block of ``fine_size`` cells (half-width at least
    ``near_extent``) surrounded by ``coarse_size`` cells out to ``domain``."""
    n_fine_half = int(math.ceil((near_extent - 0.5 * fine_size) / fine_size))
    half_fine = (n_fine_half + 0.5) * fine_size
    n_coarse = max(1, int(round((0.5 * domain - half_fine) / coarse_size)))
    widths_half = np.concatenate([np.full(n_fine_half, fine_size), np.full(n_coarse, coarse_size)])
    if quarter:
        widths = np.concatenate([[fine_size], widths_half])
    else:
        widths = np.concatenate([widths_half[::-1], [fine_size], widths_half])
    return build_cartesian_grid(
        widths, widths, layer_heights,
        pore_volume_multiplier_boundary=pore_volume_multiplier_boundary,
        quarter=quarter, depth_top=depth_top,
    )


def cartesian_transmissibility(
    grid: CartesianGrid, face: tuple[int, int, int, str], k_left: float, k_right: float
) -> float:
    """Harmonic TPFA transmissibility of the face on the positive side of cell
    ``(i, j, layer)`` along ``axis`` in ``{'x', 'y', 'z'}``.

    Symmetry-plane area factors of quarter grids are not applied here.
    """
    i, j, layer, axis = face
    if axis == "x":
        area, d_l, d_r = grid.dy[j] * grid.dz[layer], grid.dx[i], grid.dx[i + 1]
    elif axis == "y":
        area, d_l, d_r = grid.dx[i] * grid.dz[layer], grid.dy[j], grid.dy[j + 1]
    elif axis == "z":
        area, d_l, d_r = grid.dx[i] * grid.dy[j], grid.dz[layer], grid.dz[layer + 1]
    else:
        raise ValueError(f"unknown axis {axis!r}")
    if k_left <= 0 or k_right <= 0:
        return 0.0
    return area / (0.5 * d_l / k_left + 0.5 * d_r / k_right)


# ---------------------------------------------------------------------------
# disk / rectangle overlap


def _quadrant_area(x: float, y: float, r: float) -> float:
    """Signed area of the disk of radius ``r`` inside ``[0, x] x [0, y]``."""
    sx, sy = math.copysign(1.0, x), math.copysign(1.0, y)
    x, y = min(abs(x), r), min(abs(y), r)
    if x * x + y * y <= r * r:
        return sx * sy * x * y

    def prim(t):  # integral of sqrt(r² - s²) from 0 to t
        return 0.5 * (t * math.sqrt(max(r * r - t * t, 0.0)) + r * r * math.asin(min(t / r, 1.0)))

    x_star = math.sqrt(max(r * r - y * y, 0.0))
    return sx * sy * (y * x_star + prim(x) - prim(x_star))


def circle_rect_overlap(radius: float, rect: tuple[float, float, float, float]) -> float:
    """Exact area of the disk ``|p| <= radius`` (centred at the origin) inside the
    axis-aligned rectangle ``(x0, x1, y0, y1)``."""
    if radius < 0:
        raise InvalidGeometryError("radius must be non-negative")
    x0, x1, y0, y1 = rect
    if radius == 0 or x1 <= x0 or y1 <= y0:
        return 0.0
    r = radius
    return (
        _quadrant_area(x1, y1, r)
        - _quadrant_area(x0, y1, r)
        - _quadrant_area(x1, y0, r)
        + _quadrant_area(x0, y0, r)
    )


def annulus_rect_overlap(r_in: float, r_out: float, rect) -> float:
    return circle_rect_overlap(r_out, rect) - circle_rect_overlap(r_in, rect)
