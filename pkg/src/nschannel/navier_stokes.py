"""Incompressible MAC solver with Navier-slip walls and Marangoni stress.

Layout: u at vertical faces (nx, ny), v at horizontal faces (nx, ny+1) with
the wall rows v[:,0] = v[:,ny] identically zero, pressure at cell centers.

The tangential wall condition [2 nu (Dv n) + gamma v]_tau = [-psi grad_G
theta]_tau is imposed through a ghost closure below/above the walls.  Its
variational elimination turns the wall stress into a diagonal friction
coefficient d_w = 2 nu gamma / (2 nu + gamma hy) on the wall-adjacent u
faces plus an explicit stress load, which keeps the implicit viscous
matrix symmetric positive definite and makes the semi-discrete kinetic
energy identity exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import ChannelGrid, WallPair


@dataclass
class FlowState:
    """Staggered velocity and cell-centered pressure.

    adv_prev stores the previous advection term for the Adams-Bashforth
    step; it is None on a freshly initialized state.
    """

    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    adv_prev: tuple | None = None

    def copy(self):
        return FlowState(self.u.copy(), self.v.copy(), self.p.copy(),
                         self.adv_prev)

    @staticmethod
    def zeros(grid: ChannelGrid):
        return FlowState(np.zeros((grid.nx, grid.ny)),
                         np.zeros((grid.nx, grid.ny + 1)),
                         np.zeros((grid.nx, grid.ny)))


def divergence(u, v, grid: ChannelGrid):
    return (np.roll(u, -1, axis=0) - u) / grid.hx + (v[:, 1:] - v[:, :-1]) / grid.hy


def grad_p(p, grid: ChannelGrid):
    """Pressure gradient at u faces and at all v faces (wall rows zero)."""
    gx = (p - np.roll(p, 1, axis=0)) / grid.hx
    gy = np.zeros((grid.nx, grid.ny + 1))
    gy[:, 1:-1] = (p[:, 1:] - p[:, :-1]) / grid.hy
    return gx, gy


# ---------------------------------------------------------------------------
# pressure Poisson (periodic x, homogeneous Neumann y), direct spectral solve


class PoissonSolver:
    """FFT-in-x / DCT-in-y solver for the cell-centered Poisson problem."""

    def __init__(self, grid: ChannelGrid):
        self.grid = grid
        kx = np.arange(grid.nx // 2 + 1)
        lx = (2.0 * np.cos(2.0 * np.pi * kx / grid.nx) - 2.0) / grid.hx ** 2
        my = np.arange(grid.ny)
        ly = (2.0 * np.cos(np.pi * my / grid.ny) - 2.0) / grid.hy ** 2
        lam = lx[:, None] + ly[None, :]
        lam[0, 0] = 1.0  # gauge mode, zeroed explicitly below
        self._lam = lam

    def solve(self, rhs):
        """Solve lap q = rhs; the zero mode of rhs is projected out and the
        solution has zero mean (pressure gauge)."""
        g = self.grid
        rh = scipy.fft.dct(scipy.fft.rfft(rhs, axis=0), type=2, axis=1)
        rh /= self._lam
        rh[0, 0] = 0.0
        return scipy.fft.irfft(scipy.fft.idct(rh, type=2, axis=1), n=g.nx, axis=0)


def project(u, v, grid: ChannelGrid, solver: PoissonSolver | None = None):
    """Subtract the gradient part of a wall-compatible face field.

    Returns (u', v', q) with div(u',v') at solver accuracy and q the
    zero-mean potential that was removed.
    """
    if np.any(v[:, 0] != 0.0) or np.any(v[:, -1] != 0.0):
        raise ValueError("projection input must have zero wall-normal velocity")
    solver = solver or PoissonSolver(grid)
    q = solver.solve(divergence(u, v, grid))
    gx, gy = grad_p(q, grid)
    return u - gx, v - gy, q


# ---------------------------------------------------------------------------
# forcing terms


def korteweg_force(mu, phi, grid: ChannelGrid):
    """mu * grad(phi) at velocity faces (x-faces and interior y-faces).

    Uses centered face averages of mu and face differences of phi, the
    combination whose work cancels the convective work of the phase
    equation exactly on divergence-free fields.
    """
    if mu.shape != phi.shape or mu.shape != (grid.nx, grid.ny):
        raise ValueError("field shapes do not match grid")
    fx = 0.5 * (mu + np.roll(mu, 1, axis=0)) * (phi - np.roll(phi, 1, axis=0)) / grid.hx
    fy = np.zeros((grid.nx, grid.ny + 1))
    fy[:, 1:-1] = 0.5 * (mu[:, 1:] + mu[:, :-1]) * (phi[:, 1:] - phi[:, :-1]) / grid.hy
    return fx, fy


def marangoni_stress(psi: WallPair, theta: WallPair, grid: ChannelGrid):
    """Tangential stress -psi * d_x(theta) at the wall faces of each wall."""

    def one(ps, th):
        pf = 0.5 * (ps + np.roll(ps, 1))
        return -pf * (th - np.roll(th, 1)) / grid.hx

    return WallPair(one(psi.bottom, theta.bottom), one(psi.top, theta.top))


def wall_coefficients(psi: WallPair, consts, grid: ChannelGrid):
    """Viscosity and friction evaluated at the wall faces (from the wall
    phase field averaged to face positions)."""

    def face_avg(a):
        return 0.5 * (a + np.roll(a, 1))

    nu = WallPair(consts.viscosity(face_avg(psi.bottom)),
                  consts.viscosity(face_avg(psi.top)))
    ga = WallPair(consts.friction(face_avg(psi.bottom)),
                  consts.friction(face_avg(psi.top)))
    return nu, ga


def wall_tangential_velocity(flow: FlowState, psi: WallPair, theta: WallPair,
                             consts, grid: ChannelGrid) -> WallPair:
    """Tangential velocity on the walls from the Navier-slip ghost closure:
    u_w = (2 nu u_adj / hy + g) / (2 nu / hy + gamma) with g the Marangoni
    stress.  Values live at the wall x-face positions."""
    nu, ga = wall_coefficients(psi, consts, grid)
    g = marangoni_stress(psi, theta, grid)

    def one(u_adj, nu1, ga1, g1):
        return (2.0 * nu1 * u_adj / grid.hy + g1) / (2.0 * nu1 / grid.hy + ga1)

    return WallPair(one(flow.u[:, 0], nu.bottom, ga.bottom, g.bottom),
                    one(flow.u[:, -1], nu.top, ga.top, g.top))


# ---------------------------------------------------------------------------
# advection (divergence form; energy-neutral on discretely div-free fields)


def advection(u, v, grid: ChannelGrid):
    hx, hy = grid.hx, grid.hy
    nx, ny = grid.nx, grid.ny

    # u-momentum: d/dx (ubar^x)^2 + d/dy (vbar^x ubar^y)
    ucc = 0.5 * (u + np.roll(u, -1, axis=0))            # at cell centers
    fxx = ucc * ucc
    adv_u = (fxx - np.roll(fxx, 1, axis=0)) / hx
    vc = 0.5 * (v + np.roll(v, 1, axis=0))              # v averaged to corners
    fxy = np.zeros((nx, ny + 1))
    fxy[:, 1:-1] = vc[:, 1:-1] * 0.5 * (u[:, 1:] + u[:, :-1])
    adv_u += (fxy[:, 1:] - fxy[:, :-1]) / hy

    # v-momentum: d/dx (ubar^y vbar^x) + d/dy (vbar^y)^2, interior faces only
    uc = np.zeros((nx, ny + 1))
    uc[:, 1:-1] = 0.5 * (u[:, 1:] + u[:, :-1])          # u averaged to corners
    gxy = uc * vc
    vcc = 0.5 * (v[:, 1:] + v[:, :-1])                  # at cell centers
    fyy = vcc * vcc
    adv_v = np.zeros((nx, ny + 1))
    adv_v[:, 1:-1] = (np.roll(gxy, -1, axis=0) - gxy)[:, 1:-1] / hx \
        + (fyy[:, 1:] - fyy[:, :-1]) / hy
    return adv_u, adv_v


# ---------------------------------------------------------------------------
# viscous form


def _dof_maps(grid: ChannelGrid):
    nx, ny = grid.nx, grid.ny
    nu_dof = nx * ny
    iu = np.arange(nu_dof).reshape(nx, ny)
    iv = nu_dof + np.arange(nx * (ny - 1)).reshape(nx, ny - 1)
    return iu, iv, nu_dof + nx * (ny - 1)


def wall_friction_diag(nu_w, gamma_w, hy):
    """Condensed wall coefficient of the Navier-slip closure."""
    return 2.0 * nu_w * gamma_w / (2.0 * nu_w + gamma_w * hy)


def assemble_viscous_form(grid: ChannelGrid, nu_cells, nu_wall: WallPair,
                          gamma_wall: WallPair):
    """Quadrature-weighted stiffness of 2*Integral nu |Dv|^2 plus the
    condensed Navier-slip wall friction, on dofs [u, v_interior]."""
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    iu, iv, n = _dof_maps(grid)
    vol = hx * hy
    rows, cols, vals = [], [], []

    def add_edges(a, b, coef):
        rows.extend([a, b, a, b])
        cols.extend([a, b, b, a])
        vals.extend([coef, coef, -coef, -coef])

    def add_diag(a, coef):
        rows.append(a)
        cols.append(a)
        vals.append(coef)

    # 2 nu (d_x u)^2 per cell
    coef = 2.0 * nu_cells * hy / hx
    add_edges(iu.ravel(), np.roll(iu, -1, axis=0).ravel(), coef.ravel())

    # 2 nu (d_y v)^2 per cell; wall v values are fixed zero
    coef = 2.0 * nu_cells * hx / hy
    add_diag(iv[:, 0].ravel(), coef[:, 0].ravel())          # cells j = 0
    add_diag(iv[:, -1].ravel(), coef[:, -1].ravel())        # cells j = ny-1
    if ny > 2:
        add_edges(iv[:, :-1].ravel(), iv[:, 1:].ravel(), coef[:, 1:-1].ravel())

    # interior corners: nu_c * (d_y u + d_x v)^2
    nu_c = 0.25 * (nu_cells[:, 1:] + nu_cells[:, :-1]
                   + np.roll(nu_cells, 1, axis=0)[:, 1:]
                   + np.roll(nu_cells, 1, axis=0)[:, :-1])   # (nx, ny-1)
    dofs = [iu[:, 1:].ravel(), iu[:, :-1].ravel(),
            iv.ravel(), np.roll(iv, 1, axis=0).ravel()]
    s = [1.0 / hy, -1.0 / hy, 1.0 / hx, -1.0 / hx]
    w_c = (nu_c * vol).ravel()
    for a in range(4):
        for b in range(4):
            rows.append(dofs[a])
            cols.append(dofs[b])
            vals.append(w_c * (s[a] * s[b]))

    # condensed wall closure on wall-adjacent u faces
    for adj, nuw, gw in ((iu[:, 0], nu_wall.bottom, gamma_wall.bottom),
                         (iu[:, -1], nu_wall.top, gamma_wall.top)):
        add_diag(adj, wall_friction_diag(nuw, gw, hy) * hx)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def divergence_matrix(grid: ChannelGrid):
    """Sparse map from [u, v_interior] dofs to cell divergences."""
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    iu, iv, n = _dof_maps(grid)
    ic = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, vals = [], [], []
    rows += [ic.ravel(), ic.ravel()]
    cols += [np.roll(iu, -1, axis=0).ravel(), iu.ravel()]
    vals += [np.full(nx * ny, 1.0 / hx), np.full(nx * ny, -1.0 / hx)]
    rows += [ic[:, :-1].ravel(), ic[:, 1:].ravel()]
    cols += [iv.ravel(), iv.ravel()]
    vals += [np.full(nx * (ny - 1), 1.0 / hy), np.full(nx * (ny - 1), -1.0 / hy)]
    return sp.csr_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(nx * ny, n))


def velocity_weights(grid: ChannelGrid):
    _, _, n = _dof_maps(grid)
    return np.full(n, grid.hx * grid.hy)


def pack_velocity(u, v):
    return np.concatenate([u.ravel(), v[:, 1:-1].ravel()])


def unpack_velocity(x, grid: ChannelGrid):
    nx, ny = grid.nx, grid.ny
    u = x[:nx * ny].reshape(nx, ny).copy()
    v = np.zeros((nx, ny + 1))
    v[:, 1:-1] = x[nx * ny:].reshape(nx, ny - 1)
    return u, v


def deformation_tensor(u, v, uw: WallPair, grid: ChannelGrid):
    """Components of Dv: (D11, D22) at cells, D12 at interior corners and
    the wall-corner values implied by the wall trace uw."""
    d11 = (np.roll(u, -1, axis=0) - u) / grid.hx
    d22 = (v[:, 1:] - v[:, :-1]) / grid.hy
    du = (u[:, 1:] - u[:, :-1]) / grid.hy
    dv = (v[:, 1:-1] - np.roll(v, 1, axis=0)[:, 1:-1]) / grid.hx
    d12 = 0.5 * (du + dv)
    d12_bot = (u[:, 0] - uw.bottom) / grid.hy
    d12_top = (u[:, -1] - uw.top) / grid.hy
    return d11, d22, d12, WallPair(d12_bot, d12_top)


def viscous_dissipation(u, v, uw: WallPair, nu_cells, nu_wall: WallPair,
                        grid: ChannelGrid):
    """2 * Integral nu |Dv|^2 with half-cell weights at the wall corners."""
    vol = grid.hx * grid.hy
    d11, d22, d12, d12w = deformation_tensor(u, v, uw, grid)
    nu_c = 0.25 * (nu_cells[:, 1:] + nu_cells[:, :-1]
                   + np.roll(nu_cells, 1, axis=0)[:, 1:]
                   + np.roll(nu_cells, 1, axis=0)[:, :-1])
    out = 2.0 * np.sum(nu_cells * (d11 ** 2 + d22 ** 2)) * vol
    out += 4.0 * np.sum(nu_c * d12 ** 2) * vol
    out += 2.0 * vol * (np.sum(nu_wall.bottom * d12w.bottom ** 2)
                        + np.sum(nu_wall.top * d12w.top ** 2))
    return float(out)


def friction_dissipation(uw: WallPair, gamma_wall: WallPair, grid: ChannelGrid):
    """Integral_Gamma gamma |v_tau|^2 over both walls."""
    return float((np.sum(gamma_wall.bottom * uw.bottom ** 2)
                  + np.sum(gamma_wall.top * uw.top ** 2)) * grid.hx)


def kinetic_energy(u, v, grid: ChannelGrid):
    vol = grid.hx * grid.hy
    return float(0.5 * vol * (np.sum(u ** 2) + np.sum(v[:, 1:-1] ** 2)))


# ---------------------------------------------------------------------------
# time step


@dataclass
class NsDiagnostics:
    d_visc: float
    d_fric: float
    div_max: float
    work_korteweg: float
    work_marangoni: float
    uw: WallPair


class NsStepper:
    """One momentum step: AB2 advection, implicit deformation-form viscosity
    with the condensed slip closure, explicit Korteweg and Marangoni
    forcing, incremental pressure projection."""

    def __init__(self, grid: ChannelGrid, params, consts):
        self.grid = grid
        self.params = params
        self.consts = consts
        self.poisson = PoissonSolver(grid)
        self._cached = None  # (dt, splu) when coefficients are constant

    @property
    def _constant_coeffs(self):
        return self.consts.viscosity.is_constant and self.consts.friction.is_constant

    def _solver(self, dt, nu_cells, nu_wall, gamma_wall):
        key = float(dt)
        if self._constant_coeffs and self._cached and self._cached[0] == key:
            return self._cached[1]
        A = assemble_viscous_form(self.grid, nu_cells, nu_wall, gamma_wall)
        w = velocity_weights(self.grid)
        M = (sp.diags(w) + dt * A).tocsc()
        solve = spla.splu(M).solve
        if self._constant_coeffs:
            self._cached = (key, solve)
        return solve

    def step(self, flow: FlowState, phase, chem, dt, body_force=None):
        if dt <= 0:
            raise ValueError("dt must be positive")
        g = self.grid
        u, v, p = flow.u, flow.v, flow.p
        phi, psi = phase.phi, phase.psi
        mu, theta = chem.mu, chem.theta

        nu_cells = self.consts.viscosity(phi)
        nu_wall, gamma_wall = wall_coefficients(psi, self.consts, g)
        stress = marangoni_stress(psi, theta, g)

        adv = advection(u, v, g)
        if flow.adv_prev is None:
            au, av = adv
        else:
            au = 1.5 * adv[0] - 0.5 * flow.adv_prev[0]
            av = 1.5 * adv[1] - 0.5 * flow.adv_prev[1]

        fx, fy = korteweg_force(mu, phi, g)
        if body_force is not None:
            fx = fx + body_force[0]
            fy = fy + body_force[1]
        gpx, gpy = grad_p(p, g)

        rhs_u = u + dt * (-au + fx - gpx)
        rhs_v = v + dt * (-av + fy - gpy)
        w = velocity_weights(g)
        rhs = w * pack_velocity(rhs_u, rhs_v)
        # explicit Marangoni load on the wall-adjacent u rows
        cw_b = 2.0 * nu_wall.bottom / (2.0 * nu_wall.bottom + gamma_wall.bottom * g.hy)
        cw_t = 2.0 * nu_wall.top / (2.0 * nu_wall.top + gamma_wall.top * g.hy)
        nx, ny = g.nx, g.ny
        iu = np.arange(nx * ny).reshape(nx, ny)
        rhs[iu[:, 0]] += dt * g.hx * cw_b * stress.bottom
        rhs[iu[:, -1]] += dt * g.hx * cw_t * stress.top

        solve = self._solver(dt, nu_cells, nu_wall, gamma_wall)
        ustar, vstar = unpack_velocity(solve(rhs), g)

        u1, v1, q = project(ustar, vstar, g, self.poisson)
        p1 = p + q / dt

        uw = wall_tangential_velocity(FlowState(u1, v1, p1), psi, theta,
                                      self.consts, g)
        diag = NsDiagnostics(
            d_visc=viscous_dissipation(u1, v1, uw, nu_cells, nu_wall, g),
            d_fric=friction_dissipation(uw, gamma_wall, g),
            div_max=float(np.max(np.abs(divergence(u1, v1, g)))),
            work_korteweg=float(g.hx * g.hy * (np.sum(fx * u1)
                                               + np.sum(fy[:, 1:-1] * v1[:, 1:-1]))),
            work_marangoni=float(g.hx * (np.sum(stress.bottom * uw.bottom)
                                         + np.sum(stress.top * uw.top))),
            uw=uw,
        )
        return FlowState(u1, v1, p1, adv_prev=adv), diag


def ns_step(flow, phase, chem, dt, params, consts, grid, body_force=None):
    """One-off momentum step (builds a fresh stepper; see NsStepper for the
    cached variant used by the time loop)."""
    new_flow, _ = NsStepper(grid, params, consts).step(flow, phase, chem, dt,
                                                       body_force=body_force)
    return new_flow
