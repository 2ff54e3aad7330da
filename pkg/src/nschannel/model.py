"""Model parameters and constitutive functions with their admissibility bounds.

Potentials are polynomials given by coefficient lists (low degree first), so
their first and second derivatives are exact.  Mobilities, viscosity and
friction are polynomial-or-constant functions carrying declared positive
bounds; evaluations are clamped into the declared interval and every clamp
is counted, since uniform positivity is load-bearing for the linear solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


# ---------------------------------------------------------------------------
# coupling regimes


@dataclass(frozen=True)
class Coupling:
    """Bulk-surface chemical-potential coupling regime.

    kind is one of 'dirichlet' (L=0, instantaneous chemical equilibrium),
    'robin' (finite relaxation rate 1/L), 'neumann' (no bulk-surface mass
    transfer, L=infinity).
    """

    kind: str
    L: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dirichlet", "robin", "neumann"):
            raise ValueError(f"unknown coupling kind {self.kind!r}")
        if self.kind == "robin" and not (0.0 < self.L < math.inf):
            raise ValueError(f"robin coupling needs L in (0, inf), got {self.L}")

    @staticmethod
    def dirichlet():
        return Coupling("dirichlet", 0.0)

    @staticmethod
    def robin(L):
        return Coupling("robin", float(L))

    @staticmethod
    def neumann():
        return Coupling("neumann", math.inf)

    @property
    def is_neumann(self):
        return self.kind == "neumann"


def h_of_L(coupling: Coupling) -> float:
    """Weight of the Robin transfer dissipation: 1/L for finite positive L,
    zero in the Dirichlet and Neumann limits."""
    if coupling.kind == "robin":
        return 1.0 / coupling.L
    return 0.0


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ModelParams:
    """Physical and scheme parameters (immutable after construction)."""

    eps: float = 1.0            # bulk interface width
    delta: float = 1.0          # surface interface width
    kappa: float = 1.0          # surface-diffusion weight
    beta: float = 1.0           # bulk/surface mass-transfer weight
    coupling: Coupling = field(default_factory=Coupling.dirichlet)
    stabilization: float = 2.0  # S of the linearly stabilized scheme
    dt: float = 1e-3
    t_end: float = 0.1

    def __post_init__(self):
        if self.eps <= 0 or self.delta <= 0:
            raise ValueError("interface widths eps, delta must be positive")
        if self.beta <= 0:
            raise ValueError("mass-transfer weight beta must be positive")
        if self.kappa < 0:
            raise ValueError("surface-diffusion weight kappa must be nonnegative")
        if self.stabilization < 0:
            raise ValueError("stabilization constant must be nonnegative")
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")

    @property
    def alpha(self):
        """sqrt(beta), the change-of-variables factor of the verifier."""
        return math.sqrt(self.beta)


# ---------------------------------------------------------------------------
# polynomial potentials


@dataclass(frozen=True)
class PolyPotential:
    """Polynomial potential with exact derivatives; coeffs low degree first."""

    coeffs: tuple

    def __call__(self, s):
        return np.polyval(self.coeffs[::-1], s)

    def d1(self, s):
        c = np.polyder(np.poly1d(self.coeffs[::-1]))
        return c(s)

    def d2(self, s):
        c = np.polyder(np.poly1d(self.coeffs[::-1]), 2)
        return c(s)

    @property
    def degree(self):
        return len(self.coeffs) - 1


#: F(s) = (s^2 - 1)^2 / 4, the standard polynomial double well (p = q = 4).
DOUBLE_WELL = PolyPotential((0.25, 0.0, -0.5, 0.0, 0.25))


def eval_double_well(s):
    """Return (F, F', F'') of the double well at s."""
    return (0.25 * (s * s - 1.0) ** 2, s ** 3 - s, 3.0 * s * s - 1.0)


# ---------------------------------------------------------------------------
# bounded coefficient functions (mobilities, viscosity, friction)


@dataclass
class BoundedCoefficient:
    """Scalar coefficient function with declared positive bounds [lo, hi].

    Evaluations are clamped into the declared interval; out-of-bound samples
    are counted in ``clamp_count`` so silent constitutive violations cannot
    go unnoticed.
    """

    coeffs: tuple
    lo: float
    hi: float
    clamp_count: int = 0

    def __post_init__(self):
        if not (0.0 < self.lo <= self.hi):
            raise ValueError(f"bounds must satisfy 0 < lo <= hi, got "
                             f"[{self.lo}, {self.hi}]")

    @staticmethod
    def constant(value, lo=None, hi=None):
        v = float(value)
        return BoundedCoefficient((v,), lo=v if lo is None else lo,
                                  hi=v if hi is None else hi)

    @property
    def is_constant(self):
        return len(self.coeffs) == 1

    def raw(self, s):
        return np.polyval(self.coeffs[::-1], s)

    def __call__(self, s):
        v = self.raw(s)
        clipped = np.clip(v, self.lo, self.hi)
        n = int(np.sum(v != clipped))
        if n:
            self.clamp_count += n
        return clipped


@dataclass
class ConstitutiveSet:
    """Potentials, growth exponents and coefficient functions of one model."""

    F: PolyPotential = DOUBLE_WELL
    G: PolyPotential = DOUBLE_WELL
    p: int = 4
    q: int = 4
    mob_bulk: BoundedCoefficient = None
    mob_surf: BoundedCoefficient = None
    viscosity: BoundedCoefficient = None
    friction: BoundedCoefficient = None

    def __post_init__(self):
        if self.mob_bulk is None:
            self.mob_bulk = BoundedCoefficient.constant(1.0)
        if self.mob_surf is None:
            self.mob_surf = BoundedCoefficient.constant(1.0)
        if self.viscosity is None:
            self.viscosity = BoundedCoefficient.constant(1.0)
        if self.friction is None:
            self.friction = BoundedCoefficient.constant(1.0)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    where: str
    s: float
    value: float
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple

    @property
    def ok(self):
        return not self.violations


def validate_constitutive(consts: ConstitutiveSet, rng=(-2.0, 2.0),
                          samples=101) -> ValidationReport:
    """Sample every constitutive function on ``rng`` and report violations
    of nonnegativity, bounds and the second-derivative growth conditions.

    The report is data, not an exception: callers decide whether to abort.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    s = np.linspace(rng[0], rng[1], samples)
    bad = []

    for name, pot, expo in (("F", consts.F, consts.p), ("G", consts.G, consts.q)):
        vals = pot(s)
        for si, vi in zip(s[vals < 0], vals[vals < 0]):
            bad.append(Violation(name, float(si), float(vi),
                                 f"{name} must be nonnegative"))
        # |pot''(s)| <= c * (1 + |s|^(expo-2)) with c from the coefficients
        c_growth = float(np.sum(np.abs(pot.coeffs)) * max(1, pot.degree) ** 2)
        d2 = np.abs(pot.d2(s))
        envelope = c_growth * (1.0 + np.abs(s) ** max(0, expo - 2))
        mask = d2 > envelope + 1e-12
        for si, vi in zip(s[mask], d2[mask]):
            bad.append(Violation(name + "''", float(si), float(vi),
                                 f"growth condition with exponent {expo} violated"))

    for name, fn in (("mob_bulk", consts.mob_bulk),
                     ("mob_surf", consts.mob_surf),
                     ("viscosity", consts.viscosity),
                     ("friction", consts.friction)):
        vals = fn.raw(s)
        mask = (vals < fn.lo) | (vals > fn.hi)
        for si, vi in zip(s[mask], vals[mask]):
            bad.append(Violation(name, float(si), float(vi),
                                 f"{name} outside declared bounds "
                                 f"[{fn.lo}, {fn.hi}]"))

    return ValidationReport(tuple(bad))


def check_potential_relation(consts: ConstitutiveSet, beta,
                             rng=(-2.0, 2.0), samples=101, tol=1e-12) -> bool:
    """Check F(s) = beta*G(s) on sampled points (the uniqueness-regime
    relation); required when the uniqueness mode is requested."""
    s = np.linspace(rng[0], rng[1], samples)
    return bool(np.max(np.abs(consts.F(s) - beta * consts.G(s))) <=
                tol * (1.0 + float(np.max(np.abs(consts.F(s))))))
