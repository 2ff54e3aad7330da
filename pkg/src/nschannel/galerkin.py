"""Spectral-Galerkin verification of the coupled system's energy identity.

The phase space is spanned by eigenpairs of the discrete bulk-surface
eigenproblem (trace factor alpha = sqrt(beta)), the velocity space by
eigenfields of the discrete Stokes operator with unit Navier-slip walls.
Projecting the weak formulation onto these bases yields a closed ODE for
the coefficient vectors (a, b); the chemical coefficients c follow
algebraically from b.  For the semi-discrete system the energy identity

    E(t) + int_0^t (D_visc + D_fric + D_bulk + D_surf) = E(0)

is exact, so the reported residual measures pure time-integration error
and must scale with the integrator tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .bulk_surface import (assemble_pair_stiffness, bulk_surface_eigenpairs,
                           pack, quadrature_weights)
from .grid import ChannelGrid, WallPair
from .model import ConstitutiveSet
from .navier_stokes import (assemble_viscous_form, divergence_matrix,
                            pack_velocity, unpack_velocity, velocity_weights)

_GRID_CAP = (32, 16)
_MODE_CAP = 16


# ---------------------------------------------------------------------------
# Stokes eigenfields


@dataclass
class StokesBasis:
    lams: np.ndarray
    fields: list          # list of (u, v) arrays, M-orthonormal
    div_max: float


def stokes_eigenfields(k, grid: ChannelGrid) -> StokesBasis:
    """The k smallest eigenfields of the discrete Stokes operator with
    Navier boundary conditions (unit viscosity and friction):

        2 Int Dw:Dv + Int_Gamma w.v = lam Int w.v  for all div-free v,

    computed densely on the divergence-free subspace."""
    if grid.nx > _GRID_CAP[0] or grid.ny > _GRID_CAP[1]:
        raise ValueError(f"verifier grids are capped at {_GRID_CAP}")
    ones_wall = WallPair(np.ones(grid.nx), np.ones(grid.nx))
    A = assemble_viscous_form(grid, np.ones((grid.nx, grid.ny)),
                              ones_wall, ones_wall).toarray()
    D = divergence_matrix(grid).toarray()
    Z = scipy.linalg.null_space(D)
    if k > Z.shape[1]:
        raise ValueError(f"k={k} exceeds the divergence-free dimension {Z.shape[1]}")
    w = velocity_weights(grid)
    Ar = Z.T @ A @ Z
    Mr = Z.T @ (w[:, None] * Z)
    lams, vecs = scipy.linalg.eigh(Ar, Mr)
    lams, vecs = lams[:k], vecs[:, :k]
    cols = Z @ vecs
    fields = [unpack_velocity(cols[:, i], grid) for i in range(k)]
    div_max = float(np.max(np.abs(D @ cols))) if k else 0.0
    return StokesBasis(lams, fields, div_max)


# ---------------------------------------------------------------------------
# assembled system


@dataclass
class GalerkinSystem:
    """Precomputed bases and projected forms for one mode count k.

    The verifier runs the normalization eps = delta = kappa = 1; beta (and
    alpha = sqrt(beta)) and the constitutive functions are configurable.
    """

    grid: ChannelGrid
    consts: ConstitutiveSet
    beta: float
    k: int
    alpha: float
    phase_modes: list                 # EigenPair list
    stokes: StokesBasis
    K_phase: np.ndarray               # Z^T (M1 + alpha^2 M2) Z, k x k
    # per-mode precomputed arrays
    zeta: np.ndarray                  # (k, nx, ny)
    xi_b: np.ndarray                  # (k, nx)
    xi_t: np.ndarray
    gxZ: np.ndarray                   # (k, nx, ny) x-face gradients
    gyZ: np.ndarray                   # (k, nx, ny-1)
    gapZ_b: np.ndarray                # (k, nx) zeta_adj - alpha*xi
    gapZ_t: np.ndarray
    gsZ_b: np.ndarray                 # (k, nx) surface face gradients
    gsZ_t: np.ndarray
    u_basis: np.ndarray               # (k, nx, ny)
    v_basis: np.ndarray               # (k, nx, ny+1)
    mass_norm: float                  # sqrt(alpha^2|Omega| + |Gamma|)
    trace_coef: float = 0.0           # wall trace map of the velocity space

    def reconstruct_phase(self, b):
        phi = np.tensordot(b, self.zeta, axes=1)
        Psi = WallPair(b @ self.xi_b, b @ self.xi_t)
        return phi, Psi

    def reconstruct_velocity(self, a):
        return np.tensordot(a, self.u_basis, axes=1), \
            np.tensordot(a, self.v_basis, axes=1)


def build_galerkin_system(k, beta, grid: ChannelGrid,
                          consts: ConstitutiveSet | None = None) -> GalerkinSystem:
    if k > _MODE_CAP:
        raise ValueError(f"verifier mode count is capped at {_MODE_CAP}")
    consts = consts or ConstitutiveSet()
    alpha = math.sqrt(beta)
    modes = bulk_surface_eigenpairs(k, alpha, grid)
    stokes = stokes_eigenfields(k, grid)

    # stiffness split: M1 = bulk faces + wall coupling, M2 = surface faces
    M1 = assemble_pair_stiffness(grid, kappa=None, sigma=alpha, surf_scale=0.0)
    M2 = assemble_pair_stiffness(grid, kappa=None, sigma=alpha, surf_scale=1.0,
                                 face_mx=np.zeros((grid.nx, grid.ny)),
                                 face_my=np.zeros((grid.nx, grid.ny - 1)),
                                 wall_coef=WallPair.zeros(grid))
    Z = np.column_stack([m.vector() for m in modes])
    K_phase = Z.T @ ((M1 + beta * M2) @ Z)
    K_phase = 0.5 * (K_phase + K_phase.T)

    hy = grid.hy
    zeta = np.stack([m.zeta for m in modes])
    xi_b = np.stack([m.xi.bottom for m in modes])
    xi_t = np.stack([m.xi.top for m in modes])
    gxZ = (zeta - np.roll(zeta, 1, axis=1)) / grid.hx
    gyZ = (zeta[:, :, 1:] - zeta[:, :, :-1]) / hy
    gapZ_b = zeta[:, :, 0] - alpha * xi_b
    gapZ_t = zeta[:, :, -1] - alpha * xi_t
    gsZ_b = (xi_b - np.roll(xi_b, 1, axis=1)) / grid.hx
    gsZ_t = (xi_t - np.roll(xi_t, 1, axis=1)) / grid.hx

    u_basis = np.stack([f[0] for f in stokes.fields])
    v_basis = np.stack([f[1] for f in stokes.fields])

    return GalerkinSystem(
        grid=grid, consts=consts, beta=beta, k=k, alpha=alpha,
        phase_modes=modes, stokes=stokes, K_phase=K_phase,
        zeta=zeta, xi_b=xi_b, xi_t=xi_t, gxZ=gxZ, gyZ=gyZ,
        gapZ_b=gapZ_b, gapZ_t=gapZ_t, gsZ_b=gsZ_b, gsZ_t=gsZ_t,
        u_basis=u_basis, v_basis=v_basis,
        mass_norm=math.sqrt(beta * grid.area + grid.wall_length),
        trace_coef=2.0 / (2.0 + hy))


# ---------------------------------------------------------------------------
# weak-form evaluations


def _face_avg_x(f):
    return 0.5 * (f + np.roll(f, 1, axis=0))


def _chemical_coefficients(b, sys: GalerkinSystem):
    """c from the algebraic potential relation: c = K_phase b + projections
    of the stabilized-free nonlinearity (F'(phi), alpha G'(alpha Psi))."""
    g = sys.grid
    vol, hx = g.hx * g.hy, g.hx
    phi, Psi = sys.reconstruct_phase(b)
    fp = sys.consts.F.d1(phi)
    gp_b = sys.alpha * sys.consts.G.d1(sys.alpha * Psi.bottom)
    gp_t = sys.alpha * sys.consts.G.d1(sys.alpha * Psi.top)
    n = vol * np.tensordot(sys.zeta, fp, axes=([1, 2], [0, 1])) \
        + hx * (sys.xi_b @ gp_b + sys.xi_t @ gp_t)
    return sys.K_phase @ b + n, phi, Psi


def galerkin_rhs(a, b, sys: GalerkinSystem):
    """Right-hand side of the projected weak formulation; the chemical
    coefficients are reconstructed from b before evaluation."""
    da, db, _ = _galerkin_rhs_full(a, b, sys)
    return da, db


def _galerkin_rhs_full(a, b, sys: GalerkinSystem):
    g = sys.grid
    hx, hy = g.hx, g.hy
    vol = hx * hy
    cs = sys.consts
    alpha = sys.alpha

    c, phi, Psi = _chemical_coefficients(b, sys)
    mu = np.tensordot(c, sys.zeta, axes=1)
    Th_b, Th_t = c @ sys.xi_b, c @ sys.xi_t
    u, v = sys.reconstruct_velocity(a)

    # --- phase equation -----------------------------------------------
    m = cs.mob_bulk(phi)
    m_x = 2.0 * m * np.roll(m, 1, axis=0) / (m + np.roll(m, 1, axis=0))
    m_y = 2.0 * m[:, 1:] * m[:, :-1] / (m[:, 1:] + m[:, :-1])
    m_wb = cs.mob_bulk(alpha * Psi.bottom)
    m_wt = cs.mob_bulk(alpha * Psi.top)
    # n_Gamma(Psi) = m_Gamma(alpha Psi) / alpha^2 at wall faces
    ng_b = cs.mob_surf(alpha * _face_avg_1d(Psi.bottom)) / sys.beta
    ng_t = cs.mob_surf(alpha * _face_avg_1d(Psi.top)) / sys.beta

    gx_mu = (mu - np.roll(mu, 1, axis=0)) / hx
    gy_mu = (mu[:, 1:] - mu[:, :-1]) / hy
    gap_mu_b = mu[:, 0] - alpha * Th_b
    gap_mu_t = mu[:, -1] - alpha * Th_t
    gs_Th_b = (Th_b - np.roll(Th_b, 1)) / hx
    gs_Th_t = (Th_t - np.roll(Th_t, 1)) / hx

    diff = vol * np.tensordot(sys.gxZ, m_x * gx_mu, axes=([1, 2], [0, 1])) \
        + vol * np.tensordot(sys.gyZ, m_y * gy_mu, axes=([1, 2], [0, 1])) \
        + (2.0 * hx / hy) * (sys.gapZ_b @ (m_wb * gap_mu_b)
                             + sys.gapZ_t @ (m_wt * gap_mu_t)) \
        + hx * (sys.gsZ_b @ (ng_b * gs_Th_b) + sys.gsZ_t @ (ng_t * gs_Th_t))

    uw = sys.trace_coef * u[:, 0], sys.trace_coef * u[:, -1]
    conv = vol * np.tensordot(sys.gxZ, _face_avg_x(phi) * u, axes=([1, 2], [0, 1])) \
        + vol * np.tensordot(sys.gyZ, 0.5 * (phi[:, 1:] + phi[:, :-1]) * v[:, 1:-1],
                             axes=([1, 2], [0, 1])) \
        + hx * (sys.gsZ_b @ (_face_avg_1d(Psi.bottom) * uw[0])
                + sys.gsZ_t @ (_face_avg_1d(Psi.top) * uw[1]))

    db = conv - diff

    # --- momentum equation ----------------------------------------------
    from .navier_stokes import advection, korteweg_force

    adv_u, adv_v = advection(u, v, g)
    adv = vol * (np.tensordot(sys.u_basis, adv_u, axes=([1, 2], [0, 1]))
                 + np.tensordot(sys.v_basis[:, :, 1:-1], adv_v[:, 1:-1],
                                axes=([1, 2], [0, 1])))

    nu = cs.viscosity(phi)
    nu_c = 0.25 * (nu[:, 1:] + nu[:, :-1] + np.roll(nu, 1, axis=0)[:, 1:]
                   + np.roll(nu, 1, axis=0)[:, :-1])
    nu_wb = cs.viscosity(alpha * _face_avg_1d(Psi.bottom))
    nu_wt = cs.viscosity(alpha * _face_avg_1d(Psi.top))
    ga_wb = cs.friction(alpha * _face_avg_1d(Psi.bottom))
    ga_wt = cs.friction(alpha * _face_avg_1d(Psi.top))

    d11 = (np.roll(u, -1, axis=0) - u) / hx
    d22 = (v[:, 1:] - v[:, :-1]) / hy
    dudv = (u[:, 1:] - u[:, :-1]) / hy \
        + (v[:, 1:-1] - np.roll(v, 1, axis=0)[:, 1:-1]) / hx
    d12w_b = (1.0 - sys.trace_coef) * u[:, 0] / hy
    d12w_t = (1.0 - sys.trace_coef) * u[:, -1] / hy

    d11_B = (np.roll(sys.u_basis, -1, axis=1) - sys.u_basis) / hx
    d22_B = (sys.v_basis[:, :, 1:] - sys.v_basis[:, :, :-1]) / hy
    dudv_B = (sys.u_basis[:, :, 1:] - sys.u_basis[:, :, :-1]) / hy \
        + (sys.v_basis[:, :, 1:-1] - np.roll(sys.v_basis, 1, axis=1)[:, :, 1:-1]) / hx
    d12wB_b = (1.0 - sys.trace_coef) * sys.u_basis[:, :, 0] / hy
    d12wB_t = (1.0 - sys.trace_coef) * sys.u_basis[:, :, -1] / hy
    uwB_b = sys.trace_coef * sys.u_basis[:, :, 0]
    uwB_t = sys.trace_coef * sys.u_basis[:, :, -1]

    visc = vol * (2.0 * np.tensordot(d11_B, nu * d11, axes=([1, 2], [0, 1]))
                  + 2.0 * np.tensordot(d22_B, nu * d22, axes=([1, 2], [0, 1]))
                  + np.tensordot(dudv_B, nu_c * dudv, axes=([1, 2], [0, 1]))) \
        + 2.0 * vol * (d12wB_b @ (nu_wb * d12w_b) + d12wB_t @ (nu_wt * d12w_t))

    fx, fy = korteweg_force(mu, phi, g)
    kort = vol * (np.tensordot(sys.u_basis, fx, axes=([1, 2], [0, 1]))
                  + np.tensordot(sys.v_basis[:, :, 1:-1], fy[:, 1:-1],
                                 axes=([1, 2], [0, 1])))

    fric = hx * (uwB_b @ (ga_wb * uw[0]) + uwB_t @ (ga_wt * uw[1]))
    mara = hx * (uwB_b @ (_face_avg_1d(Psi.bottom) * gs_Th_b)
                 + uwB_t @ (_face_avg_1d(Psi.top) * gs_Th_t))

    da = -adv - visc + kort - fric - mara

    # dissipation rates for the audited identity
    d_visc = vol * (2.0 * np.sum(nu * d11 ** 2) + 2.0 * np.sum(nu * d22 ** 2)
                    + np.sum(nu_c * dudv ** 2)) \
        + 2.0 * vol * (np.sum(nu_wb * d12w_b ** 2) + np.sum(nu_wt * d12w_t ** 2))
    d_fric = hx * (np.sum(ga_wb * uw[0] ** 2) + np.sum(ga_wt * uw[1] ** 2))
    d_bulk = vol * (np.sum(m_x * gx_mu ** 2) + np.sum(m_y * gy_mu ** 2)) \
        + (2.0 * hx / hy) * (np.sum(m_wb * gap_mu_b ** 2)
                             + np.sum(m_wt * gap_mu_t ** 2))
    d_surf = hx * (np.sum(ng_b * gs_Th_b ** 2) + np.sum(ng_t * gs_Th_t ** 2))
    return da, db, (d_visc, d_fric, d_bulk, d_surf)


def _face_avg_1d(a):
    return 0.5 * (a + np.roll(a, 1))


def system_energy(a, b, sys: GalerkinSystem):
    """Total energy E(v, phi, alpha*Psi) of a coefficient state."""
    g = sys.grid
    phi, Psi = sys.reconstruct_phase(b)
    e_kin = 0.5 * float(a @ a)
    e_grad = 0.5 * float(b @ (sys.K_phase @ b))
    e_pot = float(np.sum(sys.consts.F(phi)) * g.hx * g.hy) \
        + float((np.sum(sys.consts.G(sys.alpha * Psi.bottom))
                 + np.sum(sys.consts.G(sys.alpha * Psi.top))) * g.hx)
    return e_kin + e_grad + e_pot


def project_initial_data(sys: GalerkinSystem, flow, phase):
    """L^2 projections of (v0, phi0, Psi0) onto the two bases, where phase
    holds the physical fields (phi0, psi0) and Psi0 = psi0 / alpha."""
    g = sys.grid
    w = velocity_weights(g)
    x = pack_velocity(flow.u, flow.v)
    a0 = np.array([float((w * pack_velocity(u_i, v_i)) @ x)
                   for (u_i, v_i) in sys.stokes.fields])
    wq = quadrature_weights(g)
    y = pack(phase.phi, phase.psi * (1.0 / sys.alpha))
    b0 = np.array([float((wq * m.vector()) @ y) for m in sys.phase_modes])
    return a0, b0


# ---------------------------------------------------------------------------
# integration and audit


@dataclass
class GalerkinReport:
    times: np.ndarray
    energy_residuals: np.ndarray
    mass_residuals: np.ndarray
    E0: float
    tol: float
    n_rhs: int

    @property
    def max_energy_residual(self):
        return float(np.max(self.energy_residuals))

    @property
    def max_mass_residual(self):
        return float(np.max(self.mass_residuals))


def integrate_and_audit(sys: GalerkinSystem, a0, b0, t_end, tol,
                        n_out=33) -> GalerkinReport:
    """Integrate the projected ODE with an adaptive embedded Runge-Kutta
    pair and report the energy-identity and mass residuals at n_out output
    times.  The four dissipation integrals ride along as extra states so
    the identity residual is pure ODE error."""
    k = sys.k

    def fun(_t, y):
        a, b = y[:k], y[k:2 * k]
        da, db, diss = _galerkin_rhs_full(a, b, sys)
        return np.concatenate([da, db, diss])

    y0 = np.concatenate([a0, b0, np.zeros(4)])
    sol = solve_ivp(fun, (0.0, t_end), y0, method="RK45",
                    rtol=tol, atol=tol * 1e-3,
                    t_eval=np.linspace(0.0, t_end, n_out))
    if not sol.success:
        raise RuntimeError(f"Galerkin integrator failed: {sol.message}")

    E0 = system_energy(a0, b0, sys)
    mass0 = sys.mass_norm * b0[0]
    e_res, m_res = [], []
    for j in range(sol.t.size):
        a, b = sol.y[:k, j], sol.y[k:2 * k, j]
        e = system_energy(a, b, sys)
        e_res.append(abs(e + np.sum(sol.y[2 * k:, j]) - E0))
        m_res.append(abs(sys.mass_norm * b[0] - mass0))
    return GalerkinReport(times=sol.t, energy_residuals=np.array(e_res),
                          mass_residuals=np.array(m_res), E0=E0, tol=tol,
                          n_rhs=sol.nfev)
