"""Turn a validated :class:`RunConfig` into library objects.

Physical invariants are re-checked here by the constructors themselves; a
violation becomes a :class:`ConfigError` naming the section it came from.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass, replace

import numpy as np

from .config import RatesConfig, RunConfig
from .constants import CODATA, PhysicalConstants, get_constants, using_constants
from .errors import ConfigError, DomainError
from .interaction import DecayChannel, LineShape, RateSet, micro_rate
from .kinetics import (
    Network,
    ReactionChannel,
    ReservoirCoupling,
    SimState,
    independent_channels_network,
    runaway_network,
)
from .modes import CavitySpec, Mode, Species, SpeciesTriple, photon
from .statistics import ThermalEnvironment, bose_occupation


@contextlib.contextmanager
def _section(*path):
    try:
        yield
    except ConfigError:
        raise
    except DomainError as exc:
        raise ConfigError(str(exc), path) from None


@dataclass(frozen=True)
class Assembly:
    config: RunConfig
    constants: PhysicalConstants
    species: dict
    triple: SpeciesTriple
    cavity: CavitySpec
    environment: ThermalEnvironment
    channel: DecayChannel
    network: Network | None = None

    def activate(self):
        """Context manager installing the configured constants."""
        return using_constants(self.constants)


def build_constants(config: RunConfig) -> PhysicalConstants:
    overrides = {k: v for k, v in config.constants.model_dump().items() if v is not None}
    with _section("constants"):
        return replace(CODATA, **overrides)


def assemble(config: RunConfig) -> Assembly:
    constants = build_constants(config)
    with using_constants(constants):
        return _assemble(config, constants)


def _assemble(config, constants):
    species = {"photon": photon()}
    for i, s in enumerate(config.species):
        with _section("species", i):
            species[s.name] = Species(s.name, s.rest_energy, s.degeneracy)
    tc = config.triple
    for key in ("ground", "boson"):
        if getattr(tc, key) not in species:
            raise ConfigError(f"unknown species {getattr(tc, key)!r}", ("triple", key))
    with _section("triple"):
        triple = SpeciesTriple.build(
            species[tc.ground], species[tc.boson], tc.transition_energy, tc.excited_degeneracy, tc.excited_name
        )
    if triple.excited.name in species:
        raise ConfigError(f"excited species name {triple.excited.name!r} clashes", ("triple", "excited_name"))
    species[triple.excited.name] = triple.excited
    env_cfg = config.environment
    with _section("environment"):
        env = ThermalEnvironment(env_cfg.temperature, env_cfg.chemical_potential)
        for s in species.values():
            env.check_species(s)
    with _section("cavity"):
        cavity = CavitySpec(config.cavity.edge_lengths, env.temperature)
    lc = config.line
    with _section("line"):
        center = triple.transition_energy / constants.hbar
        line = LineShape.natural(center, config.channel.t_sp, lc.grid_fraction, lc.window_widths, lc.fwhm)
    with _section("channel"):
        channel = DecayChannel(triple, config.channel.t_sp, line, cavity, config.channel.ground_kinetic_energy)
    asm = Assembly(config, constants, species, triple, cavity, env, channel)
    if config.network is not None:
        asm = replace(asm, network=_network(asm))
    elif config.reservoir is not None:
        raise ConfigError("a reservoir needs a network", ("reservoir",))
    return asm


def _rates(rc: RatesConfig, channel: DecayChannel, omega_phi, path):
    if rc.kind == "uniform":
        return RateSet.uniform(rc.value)
    if rc.kind == "explicit":
        return RateSet(rc.alpha, rc.beta_abs, rc.beta_em, rc.gamma)
    with _section(*path):
        return micro_rate(channel, omega_phi)


def _network(asm: Assembly) -> Network:
    nc = asm.config.network
    hbar = get_constants().hbar
    channel, triple = asm.channel, asm.triple
    if nc.kind == "independent":
        omegas = [e / hbar for e in nc.boson_energies]
        with _section("network", "boson_energies"):
            if nc.ground_kinetic_energy is not None:
                kin = [nc.ground_kinetic_energy] * len(omegas)
            else:
                kin = [float(channel.ground_kinetic_at(w)) for w in omegas]
            rates = [_rates(nc.rates, channel, w, ("network", "rates")) for w in omegas]
            net = independent_channels_network(triple, kin, omegas, rates)
    elif nc.kind == "runaway":
        w = channel.line.center if nc.boson_energy is None else nc.boson_energy / hbar
        with _section("network"):
            rates = _rates(nc.rates, channel, w, ("network", "rates"))
            net = runaway_network(triple, float(channel.ground_kinetic_at(w)), w, rates, nc.d_a)
    else:
        net = _explicit_network(asm)
    if nc.energy_tolerance is not None:
        with _section("network", "energy_tolerance"):
            net = Network(net.modes, net.channels, net.names, None, nc.energy_tolerance)
    rc = asm.config.reservoir
    if rc is None:
        return net
    kappa = rc.kappa
    if kappa is None:
        kappa = 1e-2 * max((c.rates.alpha for c in net.channels), default=0.0)
    idx = None
    if rc.modes is not None:
        try:
            idx = tuple(net.index(n) for n in rc.modes)
        except ValueError:
            raise ConfigError("unknown mode name", ("reservoir", "modes")) from None
    with _section("reservoir"):
        coupling = ReservoirCoupling(kappa, asm.environment, idx)
        return Network(net.modes, net.channels, net.names, coupling, net.energy_tolerance)


def _explicit_network(asm):
    nc = asm.config.network
    modes, names = [], []
    for i, m in enumerate(nc.modes):
        if m.species not in asm.species:
            raise ConfigError(f"unknown species {m.species!r}", ("network", "modes", i, "species"))
        with _section("network", "modes", i):
            modes.append(Mode.from_kinetic_energy(asm.species[m.species], m.kinetic_energy, m.slot))
        names.append(m.name)
    lookup = {n: i for i, n in enumerate(names)}
    channels = []
    for j, ch in enumerate(nc.channels):
        idx = []
        for key in ("excited", "ground", "boson"):
            name = getattr(ch, key)
            if name not in lookup:
                raise ConfigError(f"unknown mode {name!r}", ("network", "channels", j, key))
            idx.append(lookup[name])
        boson = modes[idx[2]]
        rc = ch.rates or nc.rates
        rates = _rates(rc, asm.channel, boson.omega, ("network", "channels", j, "rates"))
        channels.append(ReactionChannel(idx[0], idx[1], idx[2], rates))
        expected = {"excited": asm.triple.excited, "ground": asm.triple.ground, "boson": asm.triple.boson}
        for key, k in zip(expected, idx):
            if modes[k].species != expected[key]:
                raise ConfigError(f"mode is not a {expected[key].name}", ("network", "channels", j, key))
    with _section("network"):
        return Network(tuple(modes), tuple(channels), tuple(names), None, nc.energy_tolerance)


def initial_state(asm: Assembly, integer: bool, seed: int = 0) -> SimState:
    """Initial occupations from the ``initial`` section.

    ``thermal`` gives Bose-Einstein means, or for integer (SSA) states a
    geometric draw per mode from a stream independent of the run's own.
    """
    ic = asm.config.initial
    net = asm.network
    if ic.kind == "zero":
        n = np.zeros(net.n_modes)
    elif ic.kind == "thermal":
        with asm.activate(), _section("initial"):
            n = np.array([bose_occupation(m.omega, asm.environment) for m in net.modes], dtype=float)
        if integer:
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31,)))
            n = rng.geometric(1.0 / (1.0 + n)) - 1.0
    else:
        n = np.zeros(net.n_modes)
    for name, value in ic.occupations.items():
        if name not in net.names:
            raise ConfigError(f"unknown mode {name!r}", ("initial", "occupations", name))
        n[net.index(name)] = value
    if integer:
        if not np.all(n == np.round(n)):
            raise ConfigError("SSA occupations must be integers", ("initial", "occupations"))
        return SimState(0.0, n.astype(np.int64))
    return SimState(0.0, n)
