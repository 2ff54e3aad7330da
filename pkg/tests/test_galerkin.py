"""Spectral verifier: bases, projected dynamics, and the exact identities."""

import math

import numpy as np
import pytest

from nschannel.coupler import (Simulation, spinodal_phase, stripe_phase,
                               total_energy)
from nschannel.galerkin import (_chemical_coefficients, build_galerkin_system,
                                galerkin_rhs, integrate_and_audit,
                                project_initial_data, stokes_eigenfields,
                                system_energy)
from nschannel.grid import build_grid
from nschannel.model import ConstitutiveSet, Coupling, ModelParams
from nschannel.navier_stokes import FlowState, divergence, velocity_weights, \
    pack_velocity


@pytest.fixture(scope="module")
def grid():
    return build_grid(1.0, 1.0, 16, 8)


@pytest.fixture(scope="module")
def system(grid):
    return build_galerkin_system(8, beta=2.0, grid=grid,
                                 consts=ConstitutiveSet())


class TestStokesEigenfields:
    def test_positive_spectrum(self, grid):
        basis = stokes_eigenfields(6, grid)
        assert np.all(basis.lams > 0)

    def test_orthonormal_gram(self, grid):
        basis = stokes_eigenfields(6, grid)
        w = velocity_weights(grid)
        Z = np.column_stack([pack_velocity(u, v) for u, v in basis.fields])
        gram = Z.T @ (w[:, None] * Z)
        assert np.max(np.abs(gram - np.eye(6))) <= 1e-10

    def test_divergence_free(self, grid):
        basis = stokes_eigenfields(6, grid)
        for u, v in basis.fields:
            assert np.max(np.abs(divergence(u, v, grid))) <= 1e-10

    def test_grid_cap(self):
        with pytest.raises(ValueError):
            stokes_eigenfields(4, build_grid(1.0, 1.0, 64, 32))


class TestGalerkinRhs:
    def test_equilibrium_is_stationary(self, system):
        # b representing (phi, Psi) = (1, 1/alpha), a = 0
        from nschannel.bulk_surface import pack, quadrature_weights
        from nschannel.grid import WallPair

        g = system.grid
        wq = quadrature_weights(g)
        target = pack(np.ones((g.nx, g.ny)),
                      WallPair.full(g, 1.0 / system.alpha))
        b = np.array([float((wq * m.vector()) @ target)
                      for m in system.phase_modes])
        da, db = galerkin_rhs(np.zeros(system.k), b, system)
        assert np.max(np.abs(da)) < 1e-10
        assert np.max(np.abs(db)) < 1e-10

    def test_mode_one_is_conserved(self, system):
        rng = np.random.default_rng(0)
        a = 0.1 * rng.standard_normal(system.k)
        b = 0.1 * rng.standard_normal(system.k)
        _, db = galerkin_rhs(a, b, system)
        assert db[0] == 0.0

    def test_chemical_coefficients_are_energy_gradient(self, system):
        # oracle: c = dE_free/db by central finite differences
        rng = np.random.default_rng(1)
        b = 0.2 * rng.standard_normal(system.k)
        c, _, _ = _chemical_coefficients(b, system)
        h = 1e-6
        for i in range(system.k):
            bp, bm = b.copy(), b.copy()
            bp[i] += h
            bm[i] -= h
            fd = (system_energy(np.zeros(system.k), bp, system)
                  - system_energy(np.zeros(system.k), bm, system)) / (2 * h)
            assert abs(c[i] - fd) <= 1e-6 * (1.0 + abs(c[i]))


class TestIntegrateAndAudit:
    def test_equilibrium_residuals_vanish(self, system):
        from nschannel.bulk_surface import pack, quadrature_weights
        from nschannel.grid import WallPair

        g = system.grid
        wq = quadrature_weights(g)
        target = pack(np.ones((g.nx, g.ny)), WallPair.full(g, 1.0 / system.alpha))
        b0 = np.array([float((wq * m.vector()) @ target)
                       for m in system.phase_modes])
        rep = integrate_and_audit(system, np.zeros(system.k), b0, 0.05, 1e-8)
        assert rep.max_energy_residual <= 1e-10
        assert rep.max_mass_residual <= 1e-12

    def test_energy_identity_and_mass(self, grid, system):
        phase = spinodal_phase(grid, 42, 0.05)
        a0, b0 = project_initial_data(system, FlowState.zeros(grid), phase)
        rep = integrate_and_audit(system, a0, b0, 0.1, 1e-8)
        assert rep.max_energy_residual <= 1e-6 * (1.0 + rep.E0)
        assert rep.max_mass_residual <= 1e-10

    def test_residual_tracks_tolerance(self, grid, system):
        phase = spinodal_phase(grid, 42, 0.05)
        a0, b0 = project_initial_data(system, FlowState.zeros(grid), phase)
        res = [integrate_and_audit(system, a0, b0, 0.1, tol).max_energy_residual
               for tol in (1e-6, 1e-8, 1e-10)]
        assert res[0] >= res[1] >= res[2]
        assert res[0] / max(res[2], 1e-16) >= 1e2

    def test_mode_cap(self, grid):
        with pytest.raises(ValueError):
            build_galerkin_system(17, 1.0, grid)


class TestChangeOfVariables:
    def test_round_trip_and_energy_invariance(self, grid):
        # psi -> Psi = psi/alpha -> back; reported energy is invariant
        alpha = math.sqrt(2.0)
        phase = spinodal_phase(grid, 3, 0.4)
        Psi = phase.psi * (1.0 / alpha)
        back = Psi * alpha
        assert np.max(np.abs((back - phase.psi).concat())) < 1e-14

        consts = ConstitutiveSet()
        sysg = build_galerkin_system(8, alpha * alpha, grid, consts)
        a0, b0 = project_initial_data(sysg, FlowState.zeros(grid), phase)
        e1 = system_energy(a0, b0, sysg)
        # reconstruct the physical fields and re-project: same coefficients
        phi_r, Psi_r = sysg.reconstruct_phase(b0)
        from nschannel.cahn_hilliard import PhasePair

        phase_r = PhasePair(phi_r, Psi_r * alpha)
        a1, b1 = project_initial_data(sysg, FlowState.zeros(grid), phase_r)
        assert np.max(np.abs(b1 - b0)) < 1e-10
        assert abs(system_energy(a1, b1, sysg) - e1) < 1e-10


class TestCrossMethodConsistency:
    def test_energy_agrees_with_time_stepper(self):
        # smooth initial data resolved by k=16 modes; tolerance is an
        # engineering judgment (see README), not a sharp identity
        grid = build_grid(1.0, 1.0, 16, 8)
        consts = ConstitutiveSet()
        beta = 1.0
        sysg = build_galerkin_system(16, beta, grid, consts)
        phase = stripe_phase(grid, 0.5, 0.6, 0.35)
        a0, b0 = project_initial_data(sysg, FlowState.zeros(grid), phase)

        t_end = 0.05
        from nschannel.cahn_hilliard import PhasePair
        from scipy.integrate import solve_ivp
        from nschannel.galerkin import _galerkin_rhs_full

        def fun(_t, y):
            da, db, _ = _galerkin_rhs_full(y[:16], y[16:], sysg)
            return np.concatenate([da, db])

        sol = solve_ivp(fun, (0, t_end), np.concatenate([a0, b0]),
                        method="RK45", rtol=1e-10, atol=1e-12)
        e_gal = system_energy(sol.y[:16, -1], sol.y[16:, -1], sysg)

        params = ModelParams(beta=beta, coupling=Coupling.dirichlet(),
                             dt=1e-4, t_end=t_end)
        # start the stepper from the projected data so both methods see the
        # same initial condition
        phi0, Psi0 = sysg.reconstruct_phase(b0)
        phase0 = PhasePair(phi0, Psi0 * sysg.alpha)
        sim = Simulation(grid, params, consts)
        state = sim.initial_state(phase0)
        for _ in range(int(round(t_end / params.dt))):
            state, _ = sim.advance(state, params.dt)
        e_fd = total_energy(state, params, consts, grid).E_total
        assert abs(e_fd - e_gal) <= 0.05 * abs(e_gal)
