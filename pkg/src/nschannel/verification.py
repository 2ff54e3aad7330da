"""Self-contained verification studies shared by the CLI and the test suite:
eigen-structure checks, the manufactured elliptic convergence study and the
chain-rule residual study."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bulk_surface import (bulk_surface_eigenpairs, chain_rule_residual,
                           quadrature_weights, solve_coupled_elliptic)
from .grid import WallPair, build_grid


def observed_orders(errors):
    """log2 reduction factors between consecutive errors of a halving study."""
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


# ---------------------------------------------------------------------------
# eigen structure


@dataclass
class EigenStructureReport:
    lam1: float
    first_pair_error: float
    gram_error: float
    mean_constraint_error: float
    lam_min: float

    def ok(self, tol=1e-10):
        return (abs(self.lam1) <= tol and self.first_pair_error <= tol
                and self.gram_error <= tol
                and self.mean_constraint_error <= tol
                and self.lam_min >= -tol)


def eigen_structure_report(k, alpha, grid) -> EigenStructureReport:
    pairs = bulk_surface_eigenpairs(k, alpha, grid)
    w = quadrature_weights(grid)
    Z = np.column_stack([p.vector() for p in pairs])
    gram = Z.T @ (w[:, None] * Z)
    gram_err = float(np.max(np.abs(gram - np.eye(k))))

    norm = math.sqrt(alpha ** 2 * grid.area + grid.wall_length)
    exact = np.concatenate([np.full(grid.nx * grid.ny, alpha / norm),
                            np.full(2 * grid.nx, 1.0 / norm)])
    v1 = Z[:, 0]
    if v1 @ exact < 0:
        v1 = -v1
    first_err = float(np.max(np.abs(v1 - exact)))

    mean_err = 0.0
    for p in pairs[1:]:
        m = alpha * grid.area * np.mean(p.zeta) + \
            grid.wall_length * 0.5 * (np.mean(p.xi.bottom) + np.mean(p.xi.top))
        mean_err = max(mean_err, abs(m))

    return EigenStructureReport(
        lam1=pairs[0].lam, first_pair_error=first_err, gram_error=gram_err,
        mean_constraint_error=mean_err,
        lam_min=min(p.lam for p in pairs))


# ---------------------------------------------------------------------------
# manufactured elliptic study


def manufactured_elliptic_error(nx, ny, kappa=1.0, sigma=1.0, Lx=1.0, Ly=1.0):
    """L2 errors of the coupled resolvent solve against the smooth exact
    solution phi* = cos(2 pi x / Lx)(1 + y(Ly - y)), psi* = phi*|_Gamma / sigma,
    with analytically computed right-hand sides."""
    grid = build_grid(Lx, Ly, nx, ny)
    X, Y = grid.cell_mesh()
    kx = 2.0 * np.pi / Lx

    phi_ex = np.cos(kx * X) * (1.0 + Y * (Ly - Y))
    cosx = np.cos(kx * grid.xc)
    psi_ex = WallPair(cosx / sigma, cosx / sigma)

    lap_phi = -kx ** 2 * np.cos(kx * X) * (1.0 + Y * (Ly - Y)) - 2.0 * np.cos(kx * X)
    f = phi_ex - lap_phi
    dn = -cosx * Ly  # outward normal derivative, same on both walls
    lapG = -kx ** 2 * cosx / sigma
    g_wall = cosx / sigma - kappa * lapG + sigma * dn
    g = WallPair(g_wall.copy(), g_wall.copy())

    phi_h, psi_h = solve_coupled_elliptic(f, g, kappa, sigma, grid)
    vol, hx = grid.hx * grid.hy, grid.hx
    e_phi = math.sqrt(float(np.sum((phi_h - phi_ex) ** 2)) * vol)
    e_psi = math.sqrt(float(np.sum((psi_h.bottom - psi_ex.bottom) ** 2)
                            + np.sum((psi_h.top - psi_ex.top) ** 2)) * hx)
    return e_phi, e_psi


@dataclass
class EllipticStudy:
    grids: tuple
    errors_phi: np.ndarray
    errors_psi: np.ndarray

    @property
    def orders_phi(self):
        return observed_orders(self.errors_phi)

    @property
    def orders_psi(self):
        return observed_orders(self.errors_psi)

    def ok(self, min_order=1.9):
        return bool(np.all(self.orders_phi >= min_order)
                    and np.all(self.orders_psi >= min_order))


def elliptic_convergence_study(grids=((16, 8), (32, 16), (64, 32)),
                               kappa=1.0, sigma=1.0) -> EllipticStudy:
    ep, es = [], []
    for nx, ny in grids:
        a, b = manufactured_elliptic_error(nx, ny, kappa=kappa, sigma=sigma)
        ep.append(a)
        es.append(b)
    return EllipticStudy(tuple(grids), np.array(ep), np.array(es))


# ---------------------------------------------------------------------------
# chain-rule residual study


def _manufactured_trajectory(grid, times, sigma):
    """phi(x,y,t) = t^2 cos(2 pi x / Lx) y (Ly - y) with the trace-compatible
    (identically zero) wall field."""
    X, Y = grid.cell_mesh()
    shape = np.cos(2.0 * np.pi * X / grid.Lx) * Y * (grid.Ly - Y)
    out = []
    for t in times:
        out.append((t * t * shape, WallPair.zeros(grid)))
    return out


@dataclass
class ChainRuleStudy:
    dts: tuple
    residuals: np.ndarray

    @property
    def orders(self):
        return observed_orders(self.residuals)

    def ok(self, min_order=1.9):
        return bool(np.all(self.orders >= min_order))


def chain_rule_study(dts=(1e-2, 5e-3, 2.5e-3), nx=16, ny=8, kappa=1.0,
                     sigma=1.0, window=(0.5, 0.58)) -> ChainRuleStudy:
    grid = build_grid(1.0, 1.0, nx, ny)
    res = []
    for dt in dts:
        m = int(round((window[1] - window[0]) / dt))
        times = window[0] + dt * np.arange(m + 1)
        traj = _manufactured_trajectory(grid, times, sigma)
        res.append(chain_rule_residual(traj, kappa, sigma, dt, grid))
    return ChainRuleStudy(tuple(dts), np.array(res))
