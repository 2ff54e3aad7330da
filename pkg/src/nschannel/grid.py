"""Periodic-channel MAC geometry and the discrete calculus on it.

The domain is the rectangle [0,Lx) x [0,Ly], periodic in x, bounded by two
solid walls at y=0 and y=Ly.  Scalars (phase field, chemical potential,
pressure) live at cell centers; each wall carries a 1D periodic mesh whose
nodes sit at the x-positions of the bulk cell centers.

Wall-coupled stencils are closed with the ghost convention

    ghost = 2*trace - interior,

i.e. the linear interpolant between the ghost cell and the first interior
cell hits the prescribed trace value exactly on the wall.  The outward flux
that is discretely adjoint to this closure is ``wall_flux`` (the gradient
on the half-cell between wall and first center).  ``normal_derivative`` is
the pointwise second-order one-sided derivative used for diagnostics; the
two agree to O(hy).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BulkField = np.ndarray  # shape (nx, ny), cell-centered


@dataclass(frozen=True)
class ChannelGrid:
    """Uniform MAC grid on a periodic channel with two wall meshes."""

    Lx: float
    Ly: float
    nx: int
    ny: int
    hx: float
    hy: float

    @property
    def xc(self):
        """Cell-center x positions, shape (nx,)."""
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def yc(self):
        """Cell-center y positions, shape (ny,)."""
        return (np.arange(self.ny) + 0.5) * self.hy

    @property
    def xf(self):
        """Vertical-face (and wall-node-face) x positions, shape (nx,)."""
        return np.arange(self.nx) * self.hx

    @property
    def area(self):
        return self.Lx * self.Ly

    @property
    def wall_length(self):
        """Total boundary measure |Gamma| = 2*Lx (two walls)."""
        return 2.0 * self.Lx

    def cell_mesh(self):
        """Meshgrid (X, Y) of cell centers, each shape (nx, ny)."""
        return np.meshgrid(self.xc, self.yc, indexing="ij")


def build_grid(Lx, Ly, nx, ny) -> ChannelGrid:
    """Validate and construct a channel grid.

    Rejects nonpositive lengths and cell counts below 4, which would make
    the wall-coupled stencils degenerate.
    """
    if Lx <= 0 or Ly <= 0:
        raise ValueError(f"domain lengths must be positive, got Lx={Lx}, Ly={Ly}")
    nx, ny = int(nx), int(ny)
    if nx < 4 or ny < 4:
        raise ValueError(f"cell counts must be at least 4, got nx={nx}, ny={ny}")
    return ChannelGrid(Lx=float(Lx), Ly=float(Ly), nx=nx, ny=ny,
                       hx=float(Lx) / nx, hy=float(Ly) / ny)


@dataclass
class WallPair:
    """A scalar field on both walls: ``bottom`` and ``top``, each (nx,)."""

    bottom: np.ndarray
    top: np.ndarray

    def copy(self):
        return WallPair(self.bottom.copy(), self.top.copy())

    def __add__(self, other):
        return WallPair(self.bottom + other.bottom, self.top + other.top)

    def __sub__(self, other):
        return WallPair(self.bottom - other.bottom, self.top - other.top)

    def __mul__(self, a):
        if isinstance(a, WallPair):
            return WallPair(self.bottom * a.bottom, self.top * a.top)
        return WallPair(self.bottom * a, self.top * a)

    __rmul__ = __mul__

    def __neg__(self):
        return WallPair(-self.bottom, -self.top)

    def concat(self):
        return np.concatenate([self.bottom, self.top])

    def map(self, fn):
        return WallPair(fn(self.bottom), fn(self.top))

    @staticmethod
    def zeros(grid: ChannelGrid):
        return WallPair(np.zeros(grid.nx), np.zeros(grid.nx))

    @staticmethod
    def full(grid: ChannelGrid, value):
        return WallPair(np.full(grid.nx, float(value)), np.full(grid.nx, float(value)))

    @staticmethod
    def from_concat(vec, grid: ChannelGrid):
        nx = grid.nx
        return WallPair(vec[:nx].copy(), vec[nx:2 * nx].copy())


def _check_bulk(f, grid):
    if f.shape != (grid.nx, grid.ny):
        raise ValueError(f"bulk field shape {f.shape} does not match grid "
                         f"({grid.nx}, {grid.ny})")


def _check_wall(g, grid):
    if g.bottom.shape != (grid.nx,) or g.top.shape != (grid.nx,):
        raise ValueError(f"wall field shapes {g.bottom.shape}/{g.top.shape} "
                         f"do not match grid ({grid.nx},)")


def bulk_laplacian(f: BulkField, trace: WallPair, grid: ChannelGrid) -> BulkField:
    """Five-point Laplacian, periodic in x, ghost-closed in y at both walls."""
    _check_bulk(f, grid)
    _check_wall(trace, grid)
    hx2, hy2 = grid.hx ** 2, grid.hy ** 2
    lap = (np.roll(f, -1, axis=0) - 2.0 * f + np.roll(f, 1, axis=0)) / hx2
    lap[:, 1:-1] += (f[:, 2:] - 2.0 * f[:, 1:-1] + f[:, :-2]) / hy2
    # ghost = 2*trace - interior closes the wall rows
    lap[:, 0] += (f[:, 1] - 3.0 * f[:, 0] + 2.0 * trace.bottom) / hy2
    lap[:, -1] += (f[:, -2] - 3.0 * f[:, -1] + 2.0 * trace.top) / hy2
    return lap


def surface_laplacian(g: WallPair, grid: ChannelGrid) -> WallPair:
    """Periodic three-point Laplace-Beltrami on each wall independently."""
    _check_wall(g, grid)
    hx2 = grid.hx ** 2

    def lap1d(a):
        return (np.roll(a, -1) - 2.0 * a + np.roll(a, 1)) / hx2

    return WallPair(lap1d(g.bottom), lap1d(g.top))


def normal_derivative(f: BulkField, trace: WallPair, grid: ChannelGrid) -> WallPair:
    """Outward normal derivative at the walls, second-order one-sided.

    Quadratic fit through the wall trace and the two nearest cell centers;
    the outward normal is -e_y at the bottom wall and +e_y at the top wall.
    """
    _check_bulk(f, grid)
    _check_wall(trace, grid)
    h3 = 3.0 * grid.hy
    bot = (8.0 * trace.bottom - 9.0 * f[:, 0] + f[:, 1]) / h3
    top = (8.0 * trace.top - 9.0 * f[:, -1] + f[:, -2]) / h3
    return WallPair(bot, top)


def wall_flux(f: BulkField, trace: WallPair, grid: ChannelGrid) -> WallPair:
    """Outward half-cell gradient at the walls (ghost-convention flux).

    This is the normal derivative that is discretely adjoint to
    ``bulk_laplacian``: with it, the summation-by-parts identity
    quad(f * lap f) = -quad(|grad f|^2) + quad_wall(flux * trace) is exact.
    """
    _check_bulk(f, grid)
    _check_wall(trace, grid)
    c = 2.0 / grid.hy
    return WallPair(c * (trace.bottom - f[:, 0]), c * (trace.top - f[:, -1]))


def quadrature(f, grid: ChannelGrid) -> float:
    """Midpoint-rule integral of a bulk field or a wall pair."""
    if isinstance(f, WallPair):
        _check_wall(f, grid)
        return float((f.bottom.sum() + f.top.sum()) * grid.hx)
    _check_bulk(f, grid)
    return float(f.sum() * grid.hx * grid.hy)


def grad_x(f: BulkField, grid: ChannelGrid) -> np.ndarray:
    """x-gradient at vertical faces; face i sits between cells i-1 and i."""
    return (f - np.roll(f, 1, axis=0)) / grid.hx


def grad_y_interior(f: BulkField, grid: ChannelGrid) -> np.ndarray:
    """y-gradient at the ny-1 interior horizontal faces, shape (nx, ny-1)."""
    return (f[:, 1:] - f[:, :-1]) / grid.hy


def wall_gaps(f: BulkField, trace: WallPair) -> WallPair:
    """Trace-minus-adjacent-cell differences (bottom, top), used by the
    half-cell wall gradient (gap / (hy/2))."""
    return WallPair(trace.bottom - f[:, 0], trace.top - f[:, -1])


def bulk_gradient_sq(f: BulkField, trace: WallPair, grid: ChannelGrid) -> float:
    """Discrete ||grad f||^2 over the channel, including the wall half-cells.

    This is the Dirichlet energy whose gradient is -bulk_laplacian; pairing
    it with ``wall_flux`` makes the discrete Green identity exact.
    """
    vol = grid.hx * grid.hy
    gx = grad_x(f, grid)
    gy = grad_y_interior(f, grid)
    gaps = wall_gaps(f, trace)
    half = (2.0 * grid.hx / grid.hy) * (np.sum(gaps.bottom ** 2) + np.sum(gaps.top ** 2))
    return float(np.sum(gx ** 2) * vol + np.sum(gy ** 2) * vol + half)


def surface_gradient_sq(g: WallPair, grid: ChannelGrid) -> float:
    """Discrete ||grad_Gamma g||^2 summed over both walls."""

    def one(a):
        d = (a - np.roll(a, 1)) / grid.hx
        return np.sum(d ** 2) * grid.hx

    return float(one(g.bottom) + one(g.top))
