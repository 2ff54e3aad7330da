"""Time-loop orchestration and the conservation/dissipation bookkeeping.

Each step advances the phase pair with the lagged velocity, then the
momentum with the fresh chemistry, and records masses, energy components
and the dissipation channels.  The energy law is monitored, not enforced:
``dissipation_audit`` exposes the per-step residual

    R_n = E(t_{n+1}) - E(t_n) + dt * (D_visc + D_fric + D_bulk + D_surf
                                      + D_robin)(t_{n+1})

so that violations are visible with their size and dt-trend.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .cahn_hilliard import (ChemPair, ChStepper, PhasePair, assemble_potentials,
                            chemical_dissipation, mobility_fields)
from .grid import (ChannelGrid, WallPair, bulk_gradient_sq, quadrature,
                   surface_gradient_sq)
from .model import ConstitutiveSet, ModelParams, h_of_L
from .navier_stokes import (FlowState, NsStepper, friction_dissipation,
                            kinetic_energy, viscous_dissipation,
                            wall_coefficients, wall_tangential_velocity)

log = logging.getLogger(__name__)


@dataclass
class SimState:
    t: float
    flow: FlowState
    phase: PhasePair
    chem: ChemPair


@dataclass
class DiagnosticsRecord:
    """One output row: energy and mass components plus the dissipation
    channels of the step that produced this state."""

    t: float
    E_kin: float
    E_bulk: float
    E_surf: float
    E_total: float
    M_bulk: float
    M_surf: float
    M_weighted: float
    D_visc: float
    D_fric: float
    D_bulk: float
    D_surf: float
    D_robin: float

    COLUMNS = ("t", "E_kin", "E_bulk", "E_surf", "E_total",
               "M_bulk", "M_surf", "M_weighted",
               "D_visc", "D_fric", "D_bulk", "D_surf", "D_robin")

    def as_row(self):
        return tuple(getattr(self, c) for c in self.COLUMNS)


@dataclass
class EnergyParts:
    E_kin: float
    E_bulk: float
    E_surf: float

    @property
    def E_total(self):
        return self.E_kin + self.E_bulk + self.E_surf


def total_energy(state: SimState, params: ModelParams, consts: ConstitutiveSet,
                 grid: ChannelGrid) -> EnergyParts:
    """Kinetic, bulk and surface energies by midpoint quadrature with the
    face-gradient reconstruction (wall half-cells included, so the bulk
    gradient energy is exactly the quadratic form of the phase stiffness)."""
    phase = state.phase
    e_kin = kinetic_energy(state.flow.u, state.flow.v, grid)
    e_bulk = 0.5 * params.eps * bulk_gradient_sq(phase.phi, phase.psi, grid) \
        + quadrature(consts.F(phase.phi), grid) / params.eps
    g_vals = WallPair(consts.G(phase.psi.bottom), consts.G(phase.psi.top))
    e_surf = 0.5 * params.delta * params.kappa * surface_gradient_sq(phase.psi, grid) \
        + quadrature(g_vals, grid) / params.delta
    return EnergyParts(e_kin, e_bulk, e_surf)


def masses(phase: PhasePair, beta, grid: ChannelGrid):
    mb = quadrature(phase.phi, grid)
    ms = quadrature(phase.psi, grid)
    return mb, ms, beta * mb + ms


# ---------------------------------------------------------------------------
# seeded random fields (cross-language reproducible)


class Lcg64:
    """64-bit linear congruential generator (Knuth MMIX constants).

    state <- (6364136223846793005 * state + 1442695040888963407) mod 2^64;
    uniforms take the top 53 bits.  Documented so runs can be replicated
    bit-exactly from the seed in any language.
    """

    MULT = 6364136223846793005
    INC = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed):
        self.state = int(seed) & self.MASK

    def next_u64(self):
        self.state = (self.MULT * self.state + self.INC) & self.MASK
        return self.state

    def uniform(self):
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def fill(self, n):
        return np.array([self.uniform() for _ in range(n)])


def spinodal_phase(grid: ChannelGrid, seed, amplitude) -> PhasePair:
    """Uniform random perturbation in [-amplitude, amplitude]: bulk cells in
    array order (x index outer, y inner), then bottom wall, then top wall."""
    rng = Lcg64(seed)
    nb = grid.nx * grid.ny
    vals = amplitude * (2.0 * rng.fill(nb + 2 * grid.nx) - 1.0)
    phi = vals[:nb].reshape(grid.nx, grid.ny)
    psi = WallPair(vals[nb:nb + grid.nx], vals[nb + grid.nx:])
    return PhasePair(phi, psi)


def stripe_phase(grid: ChannelGrid, y0, width, eps) -> PhasePair:
    """Horizontal band of the +1 phase centered at y0 with tanh profile of
    width controlled by the interface parameter eps."""

    def profile(y):
        return np.tanh((0.5 * width - np.abs(y - y0)) / (math.sqrt(2.0) * eps))

    _, Y = grid.cell_mesh()
    phi = profile(Y)
    psi = WallPair(np.full(grid.nx, profile(np.array(0.0))),
                   np.full(grid.nx, profile(np.array(grid.Ly))))
    return PhasePair(phi, psi)


def constant_phase(grid: ChannelGrid, value) -> PhasePair:
    return PhasePair.constant(grid, value)


def uniform_flow(grid: ChannelGrid, U) -> FlowState:
    flow = FlowState.zeros(grid)
    flow.u[:] = U
    return flow


# ---------------------------------------------------------------------------
# the coupled loop


@dataclass
class RunStats:
    div_max: float = 0.0
    cfl_breaches: int = 0
    steps: int = 0


class Simulation:
    """Owns the cached CH and NS steppers of one configuration."""

    def __init__(self, grid: ChannelGrid, params: ModelParams,
                 consts: ConstitutiveSet):
        self.grid = grid
        self.params = params
        self.consts = consts
        self.ch = ChStepper(grid, params, consts)
        self.ns = NsStepper(grid, params, consts)
        self.stats = RunStats()
        self.last_ch_diag = None
        self.last_ns_diag = None

    def initial_state(self, phase: PhasePair, flow: FlowState | None = None) -> SimState:
        flow = flow if flow is not None else FlowState.zeros(self.grid)
        chem = assemble_potentials(phase, self.params, self.consts, self.grid)
        return SimState(0.0, flow, phase, chem)

    def initial_record(self, state: SimState) -> DiagnosticsRecord:
        """Record at t=0 with instantaneous dissipation rates."""
        g, pr, cs = self.grid, self.params, self.consts
        mob = mobility_fields(state.phase, pr.coupling, cs, g)
        chd = chemical_dissipation(state.chem, mob, pr.beta, pr.coupling, g)
        uw = wall_tangential_velocity(state.flow, state.phase.psi,
                                      state.chem.theta, cs, g)
        nu_wall, gamma_wall = wall_coefficients(state.phase.psi, cs, g)
        d_visc = viscous_dissipation(state.flow.u, state.flow.v, uw,
                                     cs.viscosity(state.phase.phi), nu_wall, g)
        d_fric = friction_dissipation(uw, gamma_wall, g)
        return self._record(state, d_visc, d_fric, chd)

    def _record(self, state, d_visc, d_fric, chd) -> DiagnosticsRecord:
        e = total_energy(state, self.params, self.consts, self.grid)
        mb, ms, mw = masses(state.phase, self.params.beta, self.grid)
        return DiagnosticsRecord(
            t=state.t, E_kin=e.E_kin, E_bulk=e.E_bulk, E_surf=e.E_surf,
            E_total=e.E_total, M_bulk=mb, M_surf=ms, M_weighted=mw,
            D_visc=d_visc, D_fric=d_fric, D_bulk=chd.d_bulk,
            D_surf=chd.d_surf, D_robin=chd.d_robin)

    def advance(self, state: SimState, dt) -> tuple[SimState, DiagnosticsRecord]:
        """One CH step with the current velocity, then one NS step with the
        updated chemistry; diagnostics reflect both substeps."""
        g = self.grid
        vmax = max(float(np.max(np.abs(state.flow.u))),
                   float(np.max(np.abs(state.flow.v))))
        if vmax > 0 and dt > 0.5 * min(g.hx, g.hy) / vmax:
            self.stats.cfl_breaches += 1
            log.warning("advective CFL exceeded at t=%.6g (dt=%.3g, max|v|=%.3g)",
                        state.t, dt, vmax)

        v_tau = wall_tangential_velocity(state.flow, state.phase.psi,
                                         state.chem.theta, self.consts, g)
        phase1, chem1, chd = self.ch.step(state.phase, state.flow, v_tau, dt)
        flow1, nsd = self.ns.step(state.flow, phase1, chem1, dt)

        new = SimState(state.t + dt, flow1, phase1, chem1)
        self.stats.div_max = max(self.stats.div_max, nsd.div_max)
        self.stats.steps += 1
        self.last_ch_diag = chd
        self.last_ns_diag = nsd
        return new, self._record(new, nsd.d_visc, nsd.d_fric, chd)


def advance(state, dt, params, consts, grid):
    """One-off coupled step (builds fresh steppers; the loop uses
    Simulation.advance to reuse the factorizations)."""
    return Simulation(grid, params, consts).advance(state, dt)


def run_simulation(grid, params, consts, phase0, flow0=None, output_every=1):
    """Run from t=0 to t_end; returns (records, final state, stats).

    Records are written at t=0, every ``output_every`` steps, and at the
    final step.  With output_every=1 the record sequence is audit-ready.
    """
    sim = Simulation(grid, params, consts)
    state = sim.initial_state(phase0, flow0)
    records = [sim.initial_record(state)]
    nsteps = int(round(params.t_end / params.dt))
    for n in range(1, nsteps + 1):
        state, rec = sim.advance(state, params.dt)
        state.t = n * params.dt  # keep output times exactly reproducible
        rec.t = state.t
        if n % output_every == 0 or n == nsteps:
            records.append(rec)
    return records, state, sim.stats


# ---------------------------------------------------------------------------
# dissipation audit


@dataclass
class AuditReport:
    max_residual: float           # signed max R_n (the least-dissipative step)
    max_abs_residual: float
    residuals: np.ndarray
    flagged: tuple
    tolerance: float
    energy_increase_max: float

    @property
    def ok(self):
        return not self.flagged


def dissipation_audit(records, dt, tolerance=None) -> AuditReport:
    """Per-step energy-law residuals of a record sequence (records must be
    one step apart).  Residuals above the tolerance are flagged; the default
    tolerance is 1e-8 * (1 + E(0))."""
    if len(records) < 2:
        raise ValueError("dissipation audit needs at least 2 records")
    e0 = records[0].E_total
    tol = 1e-8 * (1.0 + abs(e0)) if tolerance is None else tolerance
    res = []
    einc = 0.0
    for a, b in zip(records[:-1], records[1:]):
        diss = b.D_visc + b.D_fric + b.D_bulk + b.D_surf + b.D_robin
        res.append(b.E_total - a.E_total + dt * diss)
        einc = max(einc, b.E_total - a.E_total)
    res = np.array(res)
    flagged = tuple(int(i) for i in np.nonzero(res > tol)[0])
    return AuditReport(max_residual=float(np.max(res)),
                       max_abs_residual=float(np.max(np.abs(res))),
                       residuals=res, flagged=flagged, tolerance=tol,
                       energy_increase_max=float(einc))


def verify_h_weight(params: ModelParams) -> float:
    """Convenience re-export of the Robin dissipation weight."""
    return h_of_L(params.coupling)
