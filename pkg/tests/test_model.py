"""Parameter validation and constitutive-function contracts."""

import math

import numpy as np
import pytest

from nschannel.model import (BoundedCoefficient, ConstitutiveSet, Coupling,
                             DOUBLE_WELL, ModelParams, PolyPotential,
                             check_potential_relation, eval_double_well,
                             h_of_L, validate_constitutive)


class TestDoubleWell:
    def test_minimum_at_one(self):
        f, d1, d2 = eval_double_well(1.0)
        assert f == 0.0 and d1 == 0.0 and d2 == 2.0

    def test_at_zero(self):
        f, d1, d2 = eval_double_well(0.0)
        assert f == 0.25 and d1 == 0.0 and d2 == -1.0

    def test_even_symmetry(self):
        f, d1, _ = eval_double_well(-1.0)
        assert f == 0.0 and d1 == 0.0
        s = np.linspace(-2, 2, 41)
        fp, _, _ = eval_double_well(s)
        fm, _, _ = eval_double_well(-s)
        assert np.allclose(fp, fm)

    def test_poly_matches_closed_form(self):
        s = np.linspace(-3, 3, 61)
        f, d1, d2 = eval_double_well(s)
        assert np.allclose(DOUBLE_WELL(s), f)
        assert np.allclose(DOUBLE_WELL.d1(s), d1)
        assert np.allclose(DOUBLE_WELL.d2(s), d2)


class TestCoupling:
    def test_h_of_L(self):
        assert h_of_L(Coupling.dirichlet()) == 0.0
        assert h_of_L(Coupling.robin(2.0)) == 0.5
        assert h_of_L(Coupling.neumann()) == 0.0

    @pytest.mark.parametrize("L", [0.0, -1.0, math.inf])
    def test_robin_needs_finite_positive(self, L):
        with pytest.raises(ValueError):
            Coupling.robin(L)


class TestModelParams:
    def test_defaults(self):
        p = ModelParams()
        assert p.eps == p.delta == p.kappa == p.beta == 1.0
        assert p.coupling.kind == "dirichlet"
        assert p.stabilization == 2.0

    def test_alpha(self):
        assert ModelParams(beta=4.0).alpha == 2.0

    @pytest.mark.parametrize("kw", [{"eps": 0.0}, {"delta": -1.0},
                                    {"beta": 0.0}, {"kappa": -0.1},
                                    {"dt": 0.0}, {"t_end": -1.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)


class TestDerivativeConsistency:
    def test_potential_derivatives_match_finite_differences(self):
        h = 1e-5
        s = np.linspace(-3, 3, 121)
        for pot in (DOUBLE_WELL, PolyPotential((0.1, 0.0, -0.3, 0.05, 0.2))):
            fd1 = (pot(s + h) - pot(s - h)) / (2 * h)
            fd2 = (pot.d1(s + h) - pot.d1(s - h)) / (2 * h)
            scale = 1.0 + np.abs(pot.d1(s))
            assert np.max(np.abs(pot.d1(s) - fd1) / scale) <= 1e-6
            scale = 1.0 + np.abs(pot.d2(s))
            assert np.max(np.abs(pot.d2(s) - fd2) / scale) <= 1e-6


class TestValidateConstitutive:
    def test_double_well_clean(self):
        rep = validate_constitutive(ConstitutiveSet(), rng=(-2, 2), samples=81)
        assert rep.ok

    def test_constant_viscosity_in_range(self):
        cs = ConstitutiveSet(viscosity=BoundedCoefficient.constant(1.0, 0.5, 2.0))
        assert validate_constitutive(cs).ok

    def test_linear_friction_flagged(self):
        # gamma(s) = s drops below its lower bound for s <= 0.1
        cs = ConstitutiveSet(friction=BoundedCoefficient((0.0, 1.0), lo=0.1, hi=10.0))
        rep = validate_constitutive(cs, rng=(-2, 2), samples=81)
        assert not rep.ok
        assert any(v.where == "friction" and v.s <= 0.1 for v in rep.violations)

    def test_requires_two_samples(self):
        with pytest.raises(ValueError):
            validate_constitutive(ConstitutiveSet(), samples=1)


class TestBoundedCoefficient:
    def test_clamping_counts(self):
        c = BoundedCoefficient((0.0, 1.0), lo=0.5, hi=2.0)
        out = c(np.array([0.0, 1.0, 3.0]))
        assert np.allclose(out, [0.5, 1.0, 2.0])
        assert c.clamp_count == 2

    def test_constant_flag(self):
        assert BoundedCoefficient.constant(1.0).is_constant
        assert not BoundedCoefficient((1.0, 0.1), 0.1, 10).is_constant


class TestUniquenessRelation:
    def test_scaled_well_satisfies_relation(self):
        beta = 2.0
        g = PolyPotential(tuple(c / beta for c in DOUBLE_WELL.coeffs))
        cs = ConstitutiveSet(F=DOUBLE_WELL, G=g)
        assert check_potential_relation(cs, beta)

    def test_mismatch_detected(self):
        assert not check_potential_relation(ConstitutiveSet(), beta=2.0)
