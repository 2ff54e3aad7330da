"""INI-style run configuration: sections of key = value with '#' comments.

Unknown sections or keys are errors, every diagnostic carries the line
number, and a parsed configuration is fully validated (grid, model
parameters, constitutive set, initial data and output options) before a
run starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .grid import build_grid
from .model import (BoundedCoefficient, ConstitutiveSet, Coupling,
                    DOUBLE_WELL, ModelParams, PolyPotential)


class ConfigError(ValueError):
    def __init__(self, message, lineno=None, key=None):
        where = f"line {lineno}: " if lineno is not None else ""
        what = f"{key}: " if key else ""
        super().__init__(f"{where}{what}{message}")
        self.lineno = lineno
        self.key = key


_SCHEMA = {
    "grid": {"Lx": "1.0", "Ly": "1.0", "nx": None, "ny": None},
    "model": {"eps": "1.0", "delta": "1.0", "kappa": "1.0", "beta": "1.0",
              "coupling": "dirichlet", "stabilization": "2.0",
              "dt": "1e-3", "t_end": "0.1", "output_every": "1"},
    "constitutive": {"potential": "double_well", "surface_potential": None,
                     "p": "4", "q": "4",
                     "mobility": "1.0", "mobility_bounds": None,
                     "surface_mobility": "1.0", "surface_mobility_bounds": None,
                     "viscosity": "1.0", "viscosity_bounds": None,
                     "friction": "1.0", "friction_bounds": None},
    "init": {"preset": "constant:0.0", "v0": "zero"},
    "output": {"directory": "out", "formats": "csv,vtk", "snapshot_every": "0"},
    "verify": {"k": "8", "tol": "1e-8", "t_end": "0.1"},
}


@dataclass
class InitSpec:
    preset: str                 # constant | stripe | spinodal
    args: tuple = ()
    v0: str = "zero"
    v0_args: tuple = ()
    seed: int = 1


@dataclass
class OutputSpec:
    directory: str = "out"
    formats: tuple = ("csv", "vtk")
    snapshot_every: int = 0


@dataclass
class VerifySpec:
    k: int = 8
    tol: float = 1e-8
    t_end: float = 0.1


@dataclass
class RunConfig:
    grid: object
    params: ModelParams
    consts: ConstitutiveSet
    init: InitSpec
    output: OutputSpec
    verify: VerifySpec
    raw: dict = field(default_factory=dict)


def _tokenize(text):
    """Yield (lineno, section, key, value) entries."""
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("[") and body.endswith("]"):
            section = body[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in body:
            raise ConfigError("expected key = value", lineno)
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key in [{section}]", lineno, key=f"{section}.{key}")
        yield lineno, section, key, value


def _collect(text):
    values, linenos = {}, {}
    for sec, keys in _SCHEMA.items():
        for key, default in keys.items():
            values[(sec, key)] = default
            linenos[(sec, key)] = None
    for lineno, sec, key, value in _tokenize(text):
        values[(sec, key)] = value
        linenos[(sec, key)] = lineno
    return values, linenos


def _get_float(values, linenos, sec, key, check=None, message=""):
    raw = values[(sec, key)]
    ln = linenos[(sec, key)]
    if raw is None:
        raise ConfigError("required key missing", key=f"{sec}.{key}")
    try:
        x = float(raw)
    except ValueError:
        raise ConfigError(f"not a number: {raw!r}", ln, key=f"{sec}.{key}")
    if check is not None and not check(x):
        raise ConfigError(message or "constraint violated", ln, key=f"{sec}.{key}")
    return x


def _get_int(values, linenos, sec, key, check=None, message=""):
    raw = values[(sec, key)]
    ln = linenos[(sec, key)]
    if raw is None:
        raise ConfigError("required key missing", key=f"{sec}.{key}")
    try:
        x = int(raw)
    except ValueError:
        raise ConfigError(f"not an integer: {raw!r}", ln, key=f"{sec}.{key}")
    if check is not None and not check(x):
        raise ConfigError(message or "constraint violated", ln, key=f"{sec}.{key}")
    return x


def _parse_potential(raw, ln, key):
    if raw == "double_well":
        return DOUBLE_WELL
    if raw.startswith("poly:"):
        try:
            coeffs = tuple(float(c) for c in raw[5:].split(","))
        except ValueError:
            raise ConfigError(f"bad polynomial spec {raw!r}", ln, key=key)
        if not coeffs:
            raise ConfigError("empty polynomial", ln, key=key)
        return PolyPotential(coeffs)
    raise ConfigError(f"expected 'double_well' or 'poly:<coeffs>', got {raw!r}",
                      ln, key=key)


def _parse_coefficient(values, linenos, sec, key):
    raw = values[(sec, key)]
    ln = linenos[(sec, key)]
    braw = values[(sec, key + "_bounds")]
    bln = linenos[(sec, key + "_bounds")]
    bounds = None
    if braw is not None:
        try:
            lo, hi = (float(s) for s in braw.split(","))
        except ValueError:
            raise ConfigError(f"bounds must be 'lo,hi', got {braw!r}", bln,
                              key=f"{sec}.{key}_bounds")
        bounds = (lo, hi)
    if raw.startswith("poly:"):
        coeffs = _parse_potential(raw, ln, f"{sec}.{key}").coeffs
        lo, hi = bounds if bounds else (0.1, 10.0)
        return BoundedCoefficient(coeffs, lo=lo, hi=hi)
    try:
        c = float(raw)
    except ValueError:
        raise ConfigError(f"expected a constant or 'poly:<coeffs>', got {raw!r}",
                          ln, key=f"{sec}.{key}")
    if bounds:
        return BoundedCoefficient.constant(c, lo=bounds[0], hi=bounds[1])
    return BoundedCoefficient.constant(c)


def _parse_coupling(raw, ln):
    key = "model.coupling"
    if raw == "dirichlet":
        return Coupling.dirichlet()
    if raw == "neumann":
        return Coupling.neumann()
    if raw.startswith("robin:"):
        try:
            L = float(raw[6:])
        except ValueError:
            raise ConfigError(f"bad robin parameter {raw!r}", ln, key=key)
        if not (L > 0):
            raise ConfigError("robin L must be positive and finite", ln, key=key)
        return Coupling.robin(L)
    raise ConfigError(f"expected dirichlet, neumann or robin:<L>, got {raw!r}",
                      ln, key=key)


def _parse_preset(raw, ln):
    key = "init.preset"
    name, _, rest = raw.partition(":")
    if name == "constant":
        try:
            return InitSpec("constant", (float(rest or "0"),))
        except ValueError:
            raise ConfigError(f"bad constant value {rest!r}", ln, key=key)
    if name == "stripe":
        try:
            y0, width = (float(s) for s in rest.split(","))
        except ValueError:
            raise ConfigError(f"stripe needs 'y0,width', got {rest!r}", ln, key=key)
        return InitSpec("stripe", (y0, width))
    if name == "spinodal":
        try:
            seed_s, amp_s = rest.split(",")
            seed, amp = int(seed_s), float(amp_s)
        except ValueError:
            raise ConfigError(f"spinodal needs 'seed,amplitude', got {rest!r}",
                              ln, key=key)
        return InitSpec("spinodal", (amp,), seed=seed)
    raise ConfigError(f"unknown preset {raw!r}", ln, key=key)


def parse_config(text) -> RunConfig:
    values, linenos = _collect(text)

    grid = None
    try:
        grid = build_grid(
            _get_float(values, linenos, "grid", "Lx"),
            _get_float(values, linenos, "grid", "Ly"),
            _get_int(values, linenos, "grid", "nx", lambda n: n >= 4,
                     "cell count must be at least 4"),
            _get_int(values, linenos, "grid", "ny", lambda n: n >= 4,
                     "cell count must be at least 4"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), key="grid")

    coupling = _parse_coupling(values[("model", "coupling")],
                               linenos[("model", "coupling")])
    try:
        params = ModelParams(
            eps=_get_float(values, linenos, "model", "eps"),
            delta=_get_float(values, linenos, "model", "delta"),
            kappa=_get_float(values, linenos, "model", "kappa"),
            beta=_get_float(values, linenos, "model", "beta"),
            coupling=coupling,
            stabilization=_get_float(values, linenos, "model", "stabilization"),
            dt=_get_float(values, linenos, "model", "dt"),
            t_end=_get_float(values, linenos, "model", "t_end"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), key="model")

    pot_raw = values[("constitutive", "potential")]
    pot = _parse_potential(pot_raw, linenos[("constitutive", "potential")],
                           "constitutive.potential")
    spot_raw = values[("constitutive", "surface_potential")]
    spot = pot if spot_raw is None else _parse_potential(
        spot_raw, linenos[("constitutive", "surface_potential")],
        "constitutive.surface_potential")
    consts = ConstitutiveSet(
        F=pot, G=spot,
        p=_get_int(values, linenos, "constitutive", "p", lambda v: v >= 2,
                   "growth exponent must be >= 2"),
        q=_get_int(values, linenos, "constitutive", "q", lambda v: v >= 2,
                   "growth exponent must be >= 2"),
        mob_bulk=_parse_coefficient(values, linenos, "constitutive", "mobility"),
        mob_surf=_parse_coefficient(values, linenos, "constitutive",
                                    "surface_mobility"),
        viscosity=_parse_coefficient(values, linenos, "constitutive", "viscosity"),
        friction=_parse_coefficient(values, linenos, "constitutive", "friction"),
    )

    init = _parse_preset(values[("init", "preset")], linenos[("init", "preset")])
    v0_raw = values[("init", "v0")]
    if v0_raw == "zero":
        init.v0, init.v0_args = "zero", ()
    elif v0_raw.startswith("uniform:"):
        try:
            init.v0, init.v0_args = "uniform", (float(v0_raw[8:]),)
        except ValueError:
            raise ConfigError(f"bad uniform speed {v0_raw!r}",
                              linenos[("init", "v0")], key="init.v0")
    else:
        raise ConfigError(f"expected zero or uniform:<U>, got {v0_raw!r}",
                          linenos[("init", "v0")], key="init.v0")

    formats = tuple(s.strip() for s in values[("output", "formats")].split(",") if s.strip())
    for f in formats:
        if f not in ("csv", "vtk"):
            raise ConfigError(f"unknown output format {f!r}",
                              linenos[("output", "formats")], key="output.formats")
    output = OutputSpec(
        directory=values[("output", "directory")],
        formats=formats,
        snapshot_every=_get_int(values, linenos, "output", "snapshot_every",
                                lambda v: v >= 0, "must be nonnegative"),
    )

    verify = VerifySpec(
        k=_get_int(values, linenos, "verify", "k", lambda v: 1 <= v <= 16,
                   "verifier mode count must be in [1, 16]"),
        tol=_get_float(values, linenos, "verify", "tol", lambda v: v >= 0,
                       "tolerance must be nonnegative"),
        t_end=_get_float(values, linenos, "verify", "t_end", lambda v: v > 0,
                         "must be positive"),
    )

    out_every = _get_int(values, linenos, "model", "output_every",
                         lambda v: v >= 1, "must be at least 1")
    cfg = RunConfig(grid=grid, params=params, consts=consts, init=init,
                    output=output, verify=verify,
                    raw={"output_every": out_every})
    return cfg
