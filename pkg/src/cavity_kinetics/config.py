"""Run configuration: a single JSON document, validated and normalised to SI.

Energies may be numbers (joules) or strings such as ``"10 eV"``,
``"1 GeV"`` or ``"3.2e-19 J"``. Temperatures are kelvin and lengths metres;
both also accept a trailing unit (``"300 K"``, ``"0.01 m"``). Unknown keys
are rejected everywhere. :func:`canonical_json` writes the normalised form,
which parses back to the same configuration.
"""
from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Annotated, Literal

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, model_validator

from .constants import ELECTRON_VOLT
from .errors import ConfigError

SCHEMA_VERSION = 1

_EV_PREFIX = {"": 1.0, "m": 1e-3, "u": 1e-6, "µ": 1e-6, "k": 1e3, "M": 1e6, "G": 1e9, "T": 1e12}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-zµ]*)\s*$")


def _split(value, what):
    if isinstance(value, bool):
        raise ValueError(f"{what} must be a number or a string with a unit")
    if isinstance(value, (int, float)):
        return float(value), ""
    if isinstance(value, str):
        m = _QUANTITY.match(value)
        if m:
            return float(m.group(1)), m.group(2)
    raise ValueError(f"cannot read {value!r} as a {what}")


def parse_energy(value) -> float:
    """Energy in joules from a number (J) or a string in J or (k/M/G/m)eV."""
    number, unit = _split(value, "energy")
    if unit in ("", "J"):
        return number
    if unit.endswith("eV") and unit[:-2] in _EV_PREFIX:
        return number * _EV_PREFIX[unit[:-2]] * ELECTRON_VOLT
    raise ValueError(f"unknown energy unit {unit!r} (use J or eV)")


def _plain(unit_name):
    def parse(value):
        number, unit = _split(value, unit_name)
        if unit not in ("", unit_name):
            raise ValueError(f"expected {unit_name}, got {unit!r}")
        return number
    return parse


Energy = Annotated[float, BeforeValidator(parse_energy)]
Temperature = Annotated[float, BeforeValidator(_plain("K")), Field(gt=0)]
Length = Annotated[float, BeforeValidator(_plain("m")), Field(gt=0)]
PositiveFloat = Annotated[float, Field(gt=0)]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConstantsConfig(_Model):
    c: PositiveFloat | None = None
    hbar: PositiveFloat | None = None
    k_B: PositiveFloat | None = None


class SpeciesConfig(_Model):
    name: str
    rest_energy: Energy = Field(ge=0)
    degeneracy: int = Field(ge=1)


class TripleConfig(_Model):
    ground: str
    boson: str = "photon"
    transition_energy: Energy = Field(gt=0)
    excited_degeneracy: int = Field(ge=1)
    excited_name: str | None = None


class CavityConfig(_Model):
    edge_lengths: tuple[Length, Length, Length]


class EnvironmentConfig(_Model):
    temperature: Temperature
    chemical_potential: Energy = 0.0


class LineConfig(_Model):
    """Lorentzian line; ``fwhm`` in rad/s defaults to ``2 / t_sp``."""

    fwhm: PositiveFloat | None = None
    grid_fraction: PositiveFloat = 1e-3
    window_widths: PositiveFloat = 400.0


class ChannelConfig(_Model):
    t_sp: PositiveFloat
    ground_kinetic_energy: Energy | None = None


class EquilibriumConfig(_Model):
    temperatures: list[Temperature] = Field(default_factory=lambda: [1.0, 10.0, 100.0, 1000.0, 10000.0])
    occupancy_energy: Energy | None = None
    occupancy_target: PositiveFloat = 1.0


class BandConfig(_Model):
    species: str
    kinetic_lo: Energy = Field(ge=0)
    kinetic_hi: Energy = Field(ge=0)
    edge_lengths: tuple[Length, Length, Length] | None = None

    @model_validator(mode="after")
    def _ordered(self):
        if self.kinetic_hi < self.kinetic_lo:
            raise ValueError("kinetic_hi must be >= kinetic_lo")
        return self


class EnumerateConfig(_Model):
    species: str
    kinetic_max: Energy = Field(gt=0)
    edge_lengths: tuple[Length, Length, Length] | None = None
    max_modes: int = Field(default=10**6, ge=1)


class ModesConfig(_Model):
    bands: list[BandConfig] = Field(default_factory=list)
    enumerate: list[EnumerateConfig] = Field(default_factory=list)


class RatesConfig(_Model):
    """``physical`` derives the common micro-rate from the channel and line."""

    kind: Literal["physical", "uniform", "explicit"] = "physical"
    value: PositiveFloat | None = None
    alpha: float | None = Field(default=None, ge=0)
    beta_abs: float | None = Field(default=None, ge=0)
    beta_em: float | None = Field(default=None, ge=0)
    gamma: float | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _complete(self):
        explicit = (self.alpha, self.beta_abs, self.beta_em, self.gamma)
        if self.kind == "uniform" and self.value is None:
            raise ValueError("uniform rates need 'value'")
        if self.kind == "explicit" and any(v is None for v in explicit):
            raise ValueError("explicit rates need alpha, beta_abs, beta_em and gamma")
        if self.kind != "uniform" and self.value is not None:
            raise ValueError("'value' only applies to uniform rates")
        if self.kind != "explicit" and any(v is not None for v in explicit):
            raise ValueError("alpha/beta/gamma only apply to explicit rates")
        return self


class ModeConfig(_Model):
    name: str
    species: str
    kinetic_energy: Energy = Field(ge=0)
    slot: int = Field(default=0, ge=0)


class RosterChannelConfig(_Model):
    excited: str
    ground: str
    boson: str
    rates: RatesConfig | None = None


class NetworkConfig(_Model):
    """Mode roster.

    ``independent``: one disjoint triplet per entry of ``boson_energies``;
    every ground mode has ``ground_kinetic_energy`` if given, otherwise the
    kinetic energy that keeps the excited energy at the line centre.
    ``runaway``: one excited mode, one boson mode and ``d_a`` degenerate
    ground modes. ``explicit``: ``modes`` and ``channels`` given by name.
    """

    kind: Literal["independent", "runaway", "explicit"]
    boson_energies: list[Energy] = Field(default_factory=list)
    ground_kinetic_energy: Energy | None = Field(default=None, gt=0)
    boson_energy: Energy | None = None
    d_a: int | None = Field(default=None, ge=1)
    modes: list[ModeConfig] = Field(default_factory=list)
    channels: list[RosterChannelConfig] = Field(default_factory=list)
    rates: RatesConfig = Field(default_factory=RatesConfig)
    energy_tolerance: PositiveFloat | None = None

    @model_validator(mode="after")
    def _shape(self):
        if self.kind == "independent" and not self.boson_energies:
            raise ValueError("independent networks need boson_energies")
        if self.kind != "independent" and self.ground_kinetic_energy is not None:
            raise ValueError("ground_kinetic_energy only applies to independent networks")
        if self.kind == "explicit" and not (self.modes and self.channels):
            raise ValueError("explicit networks need modes and channels")
        return self


class ReservoirConfig(_Model):
    """Bath exchange rate ``kappa`` in 1/s; ``None`` means 1e-2 x the largest micro-rate."""

    kappa: float | None = Field(default=None, ge=0)
    modes: list[str] | None = None


class InitialConfig(_Model):
    """``thermal`` starts at Bose-Einstein means (ODE) or geometric draws (SSA)."""

    kind: Literal["zero", "thermal", "explicit"] = "zero"
    occupations: dict[str, Annotated[float, Field(ge=0)]] = Field(default_factory=dict)


class ScenarioConfig(_Model):
    seed_mode: str
    seed_population: int = Field(ge=0)
    excited_population: int = Field(default=100, ge=0)


class SimulationConfig(_Model):
    method: Literal["ode", "ssa", "both"] = "ssa"
    t_end: PositiveFloat
    dt: PositiveFloat | None = None
    sample_dt: PositiveFloat | None = None
    seed: int = Field(default=0, ge=0)
    trajectories: int = Field(default=1, ge=1)
    batches: int | None = Field(default=None, ge=2)
    burn_in: float = Field(default=0.0, ge=0)
    scenario: ScenarioConfig | None = None

    @model_validator(mode="after")
    def _needs_dt(self):
        if self.method in ("ode", "both") and self.dt is None:
            raise ValueError("ODE runs need dt")
        return self


class OutputsConfig(_Model):
    directory: str | None = None
    prefix: str = ""


class RunConfig(_Model):
    schema_version: Literal[1]
    constants: ConstantsConfig = Field(default_factory=ConstantsConfig)
    species: list[SpeciesConfig] = Field(default_factory=list)
    triple: TripleConfig
    cavity: CavityConfig
    environment: EnvironmentConfig
    line: LineConfig = Field(default_factory=LineConfig)
    channel: ChannelConfig
    equilibrium: EquilibriumConfig = Field(default_factory=EquilibriumConfig)
    modes: ModesConfig = Field(default_factory=ModesConfig)
    network: NetworkConfig | None = None
    reservoir: ReservoirConfig | None = None
    initial: InitialConfig = Field(default_factory=InitialConfig)
    simulation: SimulationConfig | None = None
    outputs: OutputsConfig = Field(default_factory=OutputsConfig)

    @model_validator(mode="after")
    def _names(self):
        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise ValueError("species names must be unique")
        if "photon" in names:
            raise ValueError("'photon' is built in and cannot be redefined")
        return self


def parse_config(data) -> RunConfig:
    """Validate a decoded JSON object; errors carry the offending field path."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ConfigError(err["msg"], err["loc"]) from None


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from None
    return loads_config(text)


def loads_config(text) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (line {exc.lineno})") from None
    return parse_config(data)


def canonical_json(config: RunConfig) -> str:
    """Normalised SI form with sorted keys and defaults filled in."""
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()
