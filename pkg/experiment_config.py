"""Experiment configuration files.

One ``section.key = value`` binding per line, ``#`` comments, comma separated
lists, sites written as ``:``-joined coordinates and complex values as Python
literals. Lines are tokenized by python-dotenv so every error keeps its line
number.
"""
import io
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np
from dotenv.parser import parse_stream

from anharmonic import SCHEMES, AnharmonicSystem, assumption_constants, gaussian_pair_potential, gaussian_site_potential
from errors import ConfigError, DomainError, InvalidParameterError
from harmonic import HarmonicParams
from lattice import make_lattice
from observables import WeylGenerator
from phase_sampler import PhaseSampler

logger = logging.getLogger(__name__)

POTENTIAL_KINDS = ("none", "gaussian_site", "gaussian_pair")
REQUIRED_KEYS = ("lattice.nu", "lattice.L", "harmonic.omega", "harmonic.lambda")


@dataclass(frozen=True)
class LatticeSection:
    nu: int
    L: int


@dataclass(frozen=True)
class HarmonicSection:
    omega: float
    lam: tuple


@dataclass(frozen=True)
class PotentialSection:
    kind: str = "none"
    amplitude: float = 1.0
    width: float = 1.0
    weight_mu: float = 1.0


@dataclass(frozen=True)
class ObservableSection:
    """Supports of None mean the origin for f and (L, 0, ..., 0) for g"""
    f_support: Optional[tuple] = None
    f_values: tuple = (1 + 0j,)
    g_support: Optional[tuple] = None
    g_values: tuple = (1j,)


@dataclass(frozen=True)
class ScheduleSection:
    t_min: float = 0.0
    t_max: float = 2.0
    t_steps: int = 21

    def times(self):
        return np.linspace(self.t_min, self.t_max, self.t_steps)


@dataclass(frozen=True)
class RatesSection:
    mu: float = 1.0
    epsilon: float = 0.5


@dataclass(frozen=True)
class IntegratorSection:
    dt: float = 1e-3
    scheme: str = "leapfrog"


@dataclass(frozen=True)
class SamplingSection:
    count: int = 50
    amplitude: float = 5.0
    seed: int = 0


@dataclass(frozen=True)
class OutputSection:
    path: str = "lrl_output.csv"


@dataclass(frozen=True)
class CheckSection:
    abs_tol: float = 1e-9
    trajectories: int = 5


def _format_site(site):
    return ":".join(str(c) for c in site)


def _format_complex(value):
    value = complex(value)
    return repr(value.real) if value.imag == 0 else repr(value)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    lattice: LatticeSection
    harmonic: HarmonicSection
    potential: PotentialSection = field(default_factory=PotentialSection)
    observables: ObservableSection = field(default_factory=ObservableSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    rates: RatesSection = field(default_factory=RatesSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    output: OutputSection = field(default_factory=OutputSection)
    check: CheckSection = field(default_factory=CheckSection)

    def __post_init__(self):
        self._validate()

    def _validate(self):
        try:
            lat = self.torus
        except InvalidParameterError as exc:
            raise ConfigError(str(exc), field="lattice.nu" if "nu " in str(exc) else "lattice.L") from exc
        try:
            params = self.params
        except InvalidParameterError as exc:
            raise ConfigError(str(exc), field="harmonic.omega" if "omega" in str(exc) else "harmonic.lambda") from exc

        pot = self.potential
        if pot.kind not in POTENTIAL_KINDS:
            raise ConfigError(f"unknown kind {pot.kind!r}, expected one of {POTENTIAL_KINDS}", field="potential.kind")
        if not (math.isfinite(pot.amplitude)):
            raise ConfigError("amplitude must be finite", field="potential.amplitude")
        if not (math.isfinite(pot.width) and pot.width > 0):
            raise ConfigError("width must be positive", field="potential.width")
        if not (math.isfinite(pot.weight_mu) and pot.weight_mu >= 0):
            raise ConfigError("weight_mu must be nonnegative", field="potential.weight_mu")

        for name in ("f", "g"):
            self._generator(lat, name)

        sched = self.schedule
        if int(sched.t_steps) != sched.t_steps or sched.t_steps < 1:
            raise ConfigError("t_steps must be a positive integer", field="schedule.t_steps")
        if not (math.isfinite(sched.t_min) and math.isfinite(sched.t_max)):
            raise ConfigError("schedule bounds must be finite", field="schedule.t_min")
        if sched.t_max < sched.t_min or (sched.t_steps > 1 and sched.t_max == sched.t_min):
            raise ConfigError("t_max must exceed t_min", field="schedule.t_max")

        if not (math.isfinite(self.rates.mu) and self.rates.mu > 0):
            raise ConfigError("mu must be positive", field="rates.mu")
        if not (math.isfinite(self.rates.epsilon) and self.rates.epsilon > 0):
            raise ConfigError("epsilon must be positive", field="rates.epsilon")

        if not (math.isfinite(self.integrator.dt) and self.integrator.dt > 0):
            raise ConfigError("dt must be positive", field="integrator.dt")
        if self.integrator.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.integrator.scheme!r}, expected one of {SCHEMES}",
                              field="integrator.scheme")

        try:
            self.sampler()
        except InvalidParameterError as exc:
            key = next((k for k in ("count", "seed") if k in str(exc)), "amplitude")
            raise ConfigError(str(exc), field=f"sampling.{key}") from exc

        if not (math.isfinite(self.check.abs_tol) and self.check.abs_tol >= 0):
            raise ConfigError("abs_tol must be nonnegative", field="check.abs_tol")
        if int(self.check.trajectories) != self.check.trajectories or self.check.trajectories < 1:
            raise ConfigError("trajectories must be a positive integer", field="check.trajectories")
        if not str(self.output.path):
            raise ConfigError("output path is empty", field="output.path")
        logger.debug("validated config for %s with %s", lat, params)

    @cached_property
    def torus(self):
        return make_lattice(self.lattice.nu, self.lattice.L)

    @cached_property
    def params(self):
        params = HarmonicParams(omega=self.harmonic.omega, lam=self.harmonic.lam)
        params.check_lattice(self.torus)
        return params

    def site_potential(self):
        pot = self.potential
        if pot.kind == "gaussian_site":
            return gaussian_site_potential(pot.amplitude, pot.width)
        return None

    def pair_potential(self):
        pot = self.potential
        if pot.kind == "gaussian_pair":
            return gaussian_pair_potential(pot.amplitude, pot.width, pot.weight_mu)
        return None

    @cached_property
    def system(self):
        return AnharmonicSystem(
            lattice=self.torus,
            params=self.params,
            site_potential=self.site_potential(),
            pair_potential=self.pair_potential(),
        )

    @cached_property
    def constants(self):
        """Assumption constants at the configured rate"""
        return assumption_constants(self.system, mu=self.rates.mu)

    def _default_support(self, name):
        nu, L = self.lattice.nu, self.lattice.L
        if name == "f":
            return ((0,) * nu,)
        return ((L,) + (0,) * (nu - 1),)

    def _generator(self, lat, name):
        support = getattr(self.observables, f"{name}_support") or self._default_support(name)
        values = getattr(self.observables, f"{name}_values")
        try:
            return WeylGenerator(lat, support, values)
        except (DomainError, InvalidParameterError) as exc:
            raise ConfigError(str(exc), field=f"observables.{name}_support") from exc

    def f_generator(self):
        return self._generator(self.torus, "f")

    def g_generator(self):
        return self._generator(self.torus, "g")

    def sampler(self):
        s = self.sampling
        return PhaseSampler(count=s.count, seed=s.seed, amplitude=s.amplitude)

    def times(self):
        return self.schedule.times()

    def with_overrides(self, out=None, seed=None):
        """Copy with the output path and sampling seed replaced where given"""
        cfg = self
        if out is not None:
            cfg = replace(cfg, output=OutputSection(path=str(out)))
        if seed is not None:
            cfg = replace(cfg, sampling=replace(cfg.sampling, seed=int(seed)))
        return cfg

    def describe(self):
        """Every setting, defaults included, as 'section.key = value' lines"""
        f, g = self.f_generator(), self.g_generator()
        rows = [
            ("lattice.nu", self.lattice.nu),
            ("lattice.L", self.lattice.L),
            ("harmonic.omega", repr(self.params.omega)),
            ("harmonic.lambda", ", ".join(repr(v) for v in self.params.lam)),
            ("potential.kind", self.potential.kind),
            ("potential.amplitude", repr(float(self.potential.amplitude))),
            ("potential.width", repr(float(self.potential.width))),
            ("potential.weight_mu", repr(float(self.potential.weight_mu))),
            ("observables.f_support", ", ".join(_format_site(s) for s in f.support)),
            ("observables.f_values", ", ".join(_format_complex(v) for v in f.values)),
            ("observables.g_support", ", ".join(_format_site(s) for s in g.support)),
            ("observables.g_values", ", ".join(_format_complex(v) for v in g.values)),
            ("schedule.t_min", repr(float(self.schedule.t_min))),
            ("schedule.t_max", repr(float(self.schedule.t_max))),
            ("schedule.t_steps", self.schedule.t_steps),
            ("rates.mu", repr(float(self.rates.mu))),
            ("rates.epsilon", repr(float(self.rates.epsilon))),
            ("integrator.dt", repr(float(self.integrator.dt))),
            ("integrator.scheme", self.integrator.scheme),
            ("sampling.count", self.sampling.count),
            ("sampling.amplitude", repr(float(self.sampling.amplitude))),
            ("sampling.seed", self.sampling.seed),
            ("output.path", self.output.path),
            ("check.abs_tol", repr(float(self.check.abs_tol))),
            ("check.trajectories", self.check.trajectories),
        ]
        return [f"{key} = {value}" for key, value in rows]


def _split(raw):
    items = [item.strip() for item in raw.split(",")]
    if not items or any(item == "" for item in items):
        raise ValueError(f"empty entry in list {raw!r}")
    return items


def _to_int(raw):
    value = float(raw)
    if not value.is_integer():
        raise ValueError(f"{raw!r} is not an integer")
    return int(value)


def _to_float(raw):
    return float(raw)


def _to_word(raw):
    if not raw:
        raise ValueError("empty value")
    return raw


def _to_float_list(raw):
    return tuple(float(item) for item in _split(raw))


def _to_complex_list(raw):
    return tuple(complex(item.replace(" ", "")) for item in _split(raw))


def _to_site_list(raw):
    return tuple(tuple(_to_int(c) for c in item.split(":")) for item in _split(raw))


# section.key -> (section attribute, field name, converter)
KEYS = {
    "lattice.nu": ("lattice", "nu", _to_int),
    "lattice.L": ("lattice", "L", _to_int),
    "harmonic.omega": ("harmonic", "omega", _to_float),
    "harmonic.lambda": ("harmonic", "lam", _to_float_list),
    "potential.kind": ("potential", "kind", _to_word),
    "potential.amplitude": ("potential", "amplitude", _to_float),
    "potential.width": ("potential", "width", _to_float),
    "potential.weight_mu": ("potential", "weight_mu", _to_float),
    "observables.f_support": ("observables", "f_support", _to_site_list),
    "observables.f_values": ("observables", "f_values", _to_complex_list),
    "observables.g_support": ("observables", "g_support", _to_site_list),
    "observables.g_values": ("observables", "g_values", _to_complex_list),
    "schedule.t_min": ("schedule", "t_min", _to_float),
    "schedule.t_max": ("schedule", "t_max", _to_float),
    "schedule.t_steps": ("schedule", "t_steps", _to_int),
    "rates.mu": ("rates", "mu", _to_float),
    "rates.epsilon": ("rates", "epsilon", _to_float),
    "integrator.dt": ("integrator", "dt", _to_float),
    "integrator.scheme": ("integrator", "scheme", _to_word),
    "sampling.count": ("sampling", "count", _to_int),
    "sampling.amplitude": ("sampling", "amplitude", _to_float),
    "sampling.seed": ("sampling", "seed", _to_int),
    "output.path": ("output", "path", _to_word),
    "check.abs_tol": ("check", "abs_tol", _to_float),
    "check.trajectories": ("check", "trajectories", _to_int),
}

SECTIONS = {
    "potential": PotentialSection,
    "observables": ObservableSection,
    "schedule": ScheduleSection,
    "rates": RatesSection,
    "integrator": IntegratorSection,
    "sampling": SamplingSection,
    "output": OutputSection,
    "check": CheckSection,
}


def _binding_line(binding):
    # a binding's mark sits on the first blank line before it
    text = binding.original.string
    return binding.original.line + text[: len(text) - len(text.lstrip())].count("\n")


def _read_bindings(text):
    """Raw 'section.key' -> (value, line) pairs in file order"""
    raw = {}
    for binding in parse_stream(io.StringIO(text)):
        line = _binding_line(binding)
        if binding.error:
            raise ConfigError(f"cannot parse {binding.original.string.strip()!r}", line=line)
        if binding.key is None:
            continue
        if binding.value is None:
            raise ConfigError("expected 'section.key = value'", field=binding.key, line=line)
        if binding.key in raw:
            raise ConfigError(f"duplicate key (first set on line {raw[binding.key][1]})", field=binding.key, line=line)
        raw[binding.key] = (binding.value.strip(), line)
    return raw


def parse_config(text, source=None):
    """Validated ExperimentConfig from config file text"""
    raw = _read_bindings(text)
    for key in REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError("required key is missing", field=key)

    sections = {}
    for key, (value, line) in raw.items():
        if key not in KEYS:
            raise ConfigError("unknown section or key", field=key, line=line)
        section, name, convert = KEYS[key]
        try:
            sections.setdefault(section, {})[name] = convert(value)
        except ValueError as exc:
            raise ConfigError(f"bad value {value!r} ({exc})", field=key, line=line) from exc

    try:
        cfg = ExperimentConfig(
            lattice=LatticeSection(**sections.pop("lattice")),
            harmonic=HarmonicSection(**sections.pop("harmonic")),
            **{name: SECTIONS[name](**kwargs) for name, kwargs in sections.items()},
        )
    except ConfigError as exc:
        line = raw.get(exc.field, (None, None))[1]
        if line is None or exc.line is not None:
            raise
        raise ConfigError(exc.detail, field=exc.field, line=line) from exc

    logger.info("loaded config %s", source or "<text>")
    for entry in cfg.describe():
        logger.info("  %s", entry)
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_config(text, source=str(path))


# Example usage
if __name__ == "__main__":
    example = """
    lattice.nu = 1
    lattice.L = 4
    harmonic.omega = 1.0
    harmonic.lambda = 1.0
    potential.kind = gaussian_site
    """
    for entry in parse_config(example).describe():
        print(entry)
