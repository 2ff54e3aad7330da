"""Convective Cahn-Hilliard dynamics with dynamic boundary conditions.

One step solves the linearly stabilized semi-implicit system

    (phi,psi)^{n+1}/dt + div(conv^n) = -grad-flux of (mu,theta)^{n+1}
    (mu,theta)^{n+1} = A_p (phi,psi)^{n+1} + S-stabilized nonlinearity

as one symmetric indefinite block system in which the trace constraints are
eliminated: psi supplies the ghost values of phi, and the chemical wall
coupling is condensed into the single flux relation

    q = (beta*theta - mu_adj) / (L + hy / (2 m_w)),

which interpolates between the Dirichlet (L=0) and Robin regimes and whose
quadratic form reproduces the bulk, surface and Robin dissipation exactly.
In the Neumann regime the wall flux is dropped altogether.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bulk_surface import assemble_pair_stiffness, pack, quadrature_weights, unpack
from .grid import (BulkField, ChannelGrid, WallPair, bulk_laplacian,
                   surface_laplacian, wall_flux)
from .model import Coupling, ConstitutiveSet, ModelParams


@dataclass
class PhasePair:
    """Bulk phase field with its wall counterpart (trace-compatible by
    construction: psi is the discrete trace of phi)."""

    phi: BulkField
    psi: WallPair

    def copy(self):
        return PhasePair(self.phi.copy(), self.psi.copy())

    @staticmethod
    def constant(grid: ChannelGrid, value):
        return PhasePair(np.full((grid.nx, grid.ny), float(value)),
                         WallPair.full(grid, value))


@dataclass
class ChemPair:
    """Bulk and surface chemical potentials."""

    mu: BulkField
    theta: WallPair

    def copy(self):
        return ChemPair(self.mu.copy(), self.theta.copy())


def overshoot(phase: PhasePair) -> float:
    """Excess of |phi|, |psi| beyond the physical range [-1, 1] (monitor
    only; the scheme does not enforce a bound)."""
    m = max(float(np.max(np.abs(phase.phi))),
            float(np.max(np.abs(phase.psi.bottom))),
            float(np.max(np.abs(phase.psi.top))))
    return max(0.0, m - 1.0)


def assemble_potentials(phase: PhasePair, params: ModelParams,
                        consts: ConstitutiveSet, grid: ChannelGrid) -> ChemPair:
    """Chemical potentials of a phase pair:

    mu    = -eps lap phi + F'(phi)/eps
    theta = -delta kappa lapG psi + G'(psi)/delta + eps dn phi

    with the ghost-closed operators (dn is the half-cell wall flux, so the
    pair (mu,theta) is exactly the variational derivative of the discrete
    free energy)."""
    phi, psi = phase.phi, phase.psi
    mu = -params.eps * bulk_laplacian(phi, psi, grid) \
        + consts.F.d1(phi) / params.eps
    theta = -(params.delta * params.kappa) * surface_laplacian(psi, grid) \
        + params.eps * wall_flux(phi, psi, grid)
    theta = theta + (1.0 / params.delta) * WallPair(consts.G.d1(psi.bottom),
                                                    consts.G.d1(psi.top))
    return ChemPair(mu, theta)


# ---------------------------------------------------------------------------
# convective terms (conservative flux form)


def convective_divergence_bulk(phi: BulkField, flow, grid: ChannelGrid) -> BulkField:
    """div(phi v) from centered face fluxes; telescopes to zero total mass
    (wall-normal velocity vanishes)."""
    u, v = flow.u, flow.v
    fx = u * 0.5 * (phi + np.roll(phi, 1, axis=0))
    fy = np.zeros((grid.nx, grid.ny + 1))
    fy[:, 1:-1] = v[:, 1:-1] * 0.5 * (phi[:, 1:] + phi[:, :-1])
    return (np.roll(fx, -1, axis=0) - fx) / grid.hx + (fy[:, 1:] - fy[:, :-1]) / grid.hy


def convective_divergence_surface(psi: WallPair, v_tau: WallPair,
                                  grid: ChannelGrid) -> WallPair:
    """div_Gamma(psi v_tau) on each wall; v_tau holds the wall tangential
    velocity sampled at the wall face positions (Navier-slip ghost
    convention of the momentum module)."""

    def one(ps, ut):
        f = ut * 0.5 * (ps + np.roll(ps, 1))
        return (np.roll(f, -1) - f) / grid.hx

    return WallPair(one(psi.bottom, v_tau.bottom), one(psi.top, v_tau.top))


# ---------------------------------------------------------------------------
# mobility layout and chemical dissipation


def _harmonic(a, b):
    return 2.0 * a * b / (a + b)


@dataclass
class MobilityFields:
    """Face mobilities frozen at the beginning of a step."""

    face_x: np.ndarray        # (nx, ny) vertical faces
    face_y: np.ndarray        # (nx, ny-1) interior horizontal faces
    wall: WallPair            # m_Omega(psi) at wall nodes
    wall_coef: WallPair       # flux coefficient 1/(L + hy/(2 m_w)), 0 if Neumann
    surf: WallPair            # m_Gamma at wall tangential faces


def mobility_fields(phase: PhasePair, coupling: Coupling,
                    consts: ConstitutiveSet, grid: ChannelGrid) -> MobilityFields:
    m = consts.mob_bulk(phase.phi)
    face_x = _harmonic(m, np.roll(m, 1, axis=0))
    face_y = _harmonic(m[:, 1:], m[:, :-1])
    wall = WallPair(consts.mob_bulk(phase.psi.bottom),
                    consts.mob_bulk(phase.psi.top))
    if coupling.is_neumann:
        coef = WallPair.zeros(grid)
    else:
        L = coupling.L
        coef = wall.map(lambda mw: 1.0 / (L + grid.hy / (2.0 * mw)))

    def surf_faces(ps):
        mg = consts.mob_surf(ps)
        return _harmonic(mg, np.roll(mg, 1))

    surf = WallPair(surf_faces(phase.psi.bottom), surf_faces(phase.psi.top))
    return MobilityFields(face_x, face_y, wall, coef, surf)


def mu_wall_trace(chem: ChemPair, mob: MobilityFields, beta, coupling: Coupling,
                  grid: ChannelGrid) -> WallPair:
    """Discrete wall trace of mu consistent with the flux coupling: equals
    beta*theta in the Dirichlet regime, the Robin-interpolated value for
    finite L, and the adjacent cell value (zero flux) for Neumann."""
    if coupling.is_neumann:
        return WallPair(chem.mu[:, 0].copy(), chem.mu[:, -1].copy())
    L = coupling.L

    def one(th, mu_adj, mw):
        r = 2.0 * L * mw / grid.hy
        return (beta * th + r * mu_adj) / (1.0 + r)

    return WallPair(one(chem.theta.bottom, chem.mu[:, 0], mob.wall.bottom),
                    one(chem.theta.top, chem.mu[:, -1], mob.wall.top))


@dataclass
class ChemicalDissipation:
    d_bulk: float
    d_surf: float
    d_robin: float
    wall_residual: float      # ||beta*theta - mu|_Gamma||_{L^2(Gamma)}
    mu_trace: WallPair


def chemical_dissipation(chem: ChemPair, mob: MobilityFields, beta,
                         coupling: Coupling, grid: ChannelGrid) -> ChemicalDissipation:
    """Bulk, surface and Robin-transfer dissipation of a chemical pair with
    the frozen face mobilities; together they equal the quadratic form of
    the step's diffusion operator exactly."""
    hx, hy = grid.hx, grid.hy
    vol = hx * hy
    mu, th = chem.mu, chem.theta

    gx = (mu - np.roll(mu, 1, axis=0)) / hx
    gy = (mu[:, 1:] - mu[:, :-1]) / hy
    d_bulk = float(np.sum(mob.face_x * gx ** 2) * vol
                   + np.sum(mob.face_y * gy ** 2) * vol)

    trace = mu_wall_trace(chem, mob, beta, coupling, grid)
    for tr, adj, mw in ((trace.bottom, mu[:, 0], mob.wall.bottom),
                        (trace.top, mu[:, -1], mob.wall.top)):
        d_bulk += float(np.sum(mw * (2.0 * (tr - adj) / hy) ** 2) * (hy / 2.0) * hx)

    d_surf = 0.0
    for t1, mf in ((th.bottom, mob.surf.bottom), (th.top, mob.surf.top)):
        g = (t1 - np.roll(t1, 1)) / hx
        d_surf += float(np.sum(mf * g ** 2) * hx)

    res2 = float((np.sum((beta * th.bottom - trace.bottom) ** 2)
                  + np.sum((beta * th.top - trace.top) ** 2)) * hx)
    d_robin = res2 / coupling.L if coupling.kind == "robin" else 0.0
    return ChemicalDissipation(d_bulk, d_surf, d_robin, math.sqrt(res2), trace)


# ---------------------------------------------------------------------------
# the step


class ChStepper:
    """Cahn-Hilliard step with a cached factorization of the block system
    (rebuilt per step only when the mobilities are non-constant)."""

    def __init__(self, grid: ChannelGrid, params: ModelParams,
                 consts: ConstitutiveSet):
        self.grid = grid
        self.params = params
        self.consts = consts
        self.w = quadrature_weights(grid)
        nb = grid.nx * grid.ny
        se = np.empty_like(self.w)
        se[:nb] = params.stabilization / params.eps
        se[nb:] = params.stabilization / params.delta
        self._se = se
        self.A_phase = assemble_pair_stiffness(
            grid, kappa=None, sigma=1.0, bulk_coeff=params.eps,
            surf_scale=params.delta * params.kappa)
        self._cached = None

    @property
    def _constant_mobilities(self):
        return self.consts.mob_bulk.is_constant and self.consts.mob_surf.is_constant

    def _diffusion_matrix(self, mob: MobilityFields):
        return assemble_pair_stiffness(
            self.grid, kappa=None, sigma=self.params.beta, bulk_coeff=1.0,
            surf_scale=1.0, face_mx=mob.face_x, face_my=mob.face_y,
            wall_coef=mob.wall_coef, surf_m=mob.surf)

    def _solver(self, dt, mob: MobilityFields):
        key = float(dt)
        if self._constant_mobilities and self._cached and self._cached[0] == key:
            return self._cached[1]
        W = sp.diags(self.w)
        K = self._diffusion_matrix(mob)
        M = sp.bmat([[-(self.A_phase + sp.diags(self.w * self._se)), W],
                     [W, dt * K]], format="csc")
        solve = spla.splu(M).solve
        if self._constant_mobilities:
            self._cached = (key, solve)
        return solve

    def step(self, phase: PhasePair, flow, v_tau: WallPair, dt):
        if dt <= 0:
            raise ValueError("dt must be positive")
        g, pr, cs = self.grid, self.params, self.consts
        phi, psi = phase.phi, phase.psi

        mob = mobility_fields(phase, pr.coupling, cs, g)
        conv_b = convective_divergence_bulk(phi, flow, g)
        conv_s = convective_divergence_surface(psi, v_tau, g)

        u_old = pack(phi, psi)
        nl = pack(cs.F.d1(phi) / pr.eps,
                  WallPair(cs.G.d1(psi.bottom), cs.G.d1(psi.top)) * (1.0 / pr.delta))
        rhs1 = self.w * (nl - self._se * u_old)
        rhs2 = self.w * (u_old - dt * pack(conv_b, conv_s))

        x = self._solver(dt, mob)(np.concatenate([rhs1, rhs2]))
        n = u_old.size
        phi1, psi1 = unpack(x[:n], g)
        mu1, th1 = unpack(x[n:], g)
        phase1 = PhasePair(phi1, psi1)
        chem1 = ChemPair(mu1, th1)
        diss = chemical_dissipation(chem1, mob, pr.beta, pr.coupling, g)
        return phase1, chem1, diss


def ch_step(phase, flow, dt, params, consts, grid):
    """One-off Cahn-Hilliard step; assembles the current chemical pair to
    sample the wall velocity, then solves the block system.  The time loop
    uses ChStepper directly to reuse the factorization."""
    from .navier_stokes import wall_tangential_velocity

    chem_n = assemble_potentials(phase, params, consts, grid)
    v_tau = wall_tangential_velocity(flow, phase.psi, chem_n.theta, consts, grid)
    phase1, chem1, _ = ChStepper(grid, params, consts).step(phase, flow, v_tau, dt)
    return phase1, chem1
