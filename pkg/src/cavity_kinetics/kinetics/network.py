"""Reaction network ``(excited)_m <-> (ground)_n + (boson)_k`` over explicit modes."""
from __future__ import annotations

import hashlib
import math
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from ..constants import get_constants
from ..errors import DomainError
from ..interaction import RateSet
from ..modes import Mode
from ..statistics import ThermalEnvironment, bose_occupation

# event kinds, shared with the compiled kernels
L_EVENT, R_SPONT, R_PHOTON, R_ATOM, BIRTH, DEATH = range(6)
EVENT_NAMES = ("L", "R_spont", "R_photon", "R_atom", "birth", "death")


@dataclass(frozen=True)
class ReactionChannel:
    """One channel; ``excited``, ``ground`` and ``boson`` index the network's modes."""

    excited: int
    ground: int
    boson: int
    rates: RateSet


@dataclass(frozen=True)
class ReservoirCoupling:
    """Per-mode birth-death exchange with a thermal bath.

    ``modes=None`` couples every mode. ``kappa = 0`` isolates the cavity.
    """

    kappa: float
    environment: ThermalEnvironment
    modes: tuple | None = None

    def __post_init__(self):
        if not self.kappa >= 0:
            raise DomainError("kappa must be >= 0")


@dataclass
class SimState:
    time: float
    occupations: np.ndarray

    def __post_init__(self):
        self.occupations = np.asarray(self.occupations)
        if np.any(self.occupations < 0):
            raise DomainError("occupations must be >= 0")

    def copy(self):
        return SimState(self.time, self.occupations.copy())


@dataclass(frozen=True)
class Network:
    modes: tuple
    channels: tuple
    names: tuple | None = None
    reservoir: ReservoirCoupling | None = None
    energy_tolerance: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "channels", tuple(self.channels))
        m = len(self.modes)
        names = self.names or tuple(f"mode{i}" for i in range(m))
        if len(names) != m or len(set(names)) != m:
            raise DomainError("mode names must be unique, one per mode")
        object.__setattr__(self, "names", tuple(names))
        for j, ch in enumerate(self.channels):
            for idx in (ch.excited, ch.ground, ch.boson):
                if not 0 <= idx < m:
                    raise DomainError(f"channel {j}: mode index {idx} out of range")
            if len({ch.excited, ch.ground, ch.boson}) != 3:
                raise DomainError(f"channel {j}: the three modes must be distinct")
            w_ex = self.modes[ch.excited].omega
            gap = w_ex - self.modes[ch.ground].omega - self.modes[ch.boson].omega
            tol = self.energy_tolerance if self.energy_tolerance is not None else 1e-12 * w_ex
            if abs(gap) > max(tol, 4 * np.spacing(w_ex)):
                raise DomainError(f"channel {j}: omega_excited != omega_ground + omega_boson")
        if self.reservoir is not None and self.reservoir.modes is not None:
            for idx in self.reservoir.modes:
                if not 0 <= idx < m:
                    raise DomainError(f"reservoir mode {idx} out of range")

    @property
    def n_modes(self):
        return len(self.modes)

    def index(self, name):
        return self.names.index(name)

    # packed arrays for the kernels
    def channel_arrays(self):
        ch = self.channels
        idx = np.array([[c.excited, c.ground, c.boson] for c in ch], dtype=np.int64).reshape(-1, 3)
        rates = np.array(
            [[c.rates.alpha, c.rates.beta_abs, c.rates.beta_em, c.rates.gamma] for c in ch],
            dtype=np.float64,
        ).reshape(-1, 4)
        return idx, rates

    def reservoir_arrays(self):
        if self.reservoir is None or self.reservoir.kappa == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0)
        modes = self.reservoir.modes
        idx = np.arange(self.n_modes) if modes is None else np.asarray(modes, dtype=np.int64)
        env = self.reservoir.environment
        boltz = np.array([boltzmann_factor(self.modes[i], env) for i in idx])
        return idx.astype(np.int64), np.full(len(idx), float(self.reservoir.kappa)), boltz

    def stoichiometry(self):
        """Change of each mode (rows) per net R event of each channel (columns)."""
        s = np.zeros((self.n_modes, len(self.channels)))
        for j, c in enumerate(self.channels):
            s[c.excited, j] -= 1
            s[c.ground, j] += 1
            s[c.boson, j] += 1
        return s

    def conservation_matrix(self):
        """Rows span the linear invariants of the closed (reservoir-free) network."""
        if not self.channels:
            return np.eye(self.n_modes)
        return null_space(self.stoichiometry().T).T

    def thermal_occupations(self, env: ThermalEnvironment | None = None):
        env = env or (self.reservoir.environment if self.reservoir else None)
        if env is None:
            raise DomainError("no thermal environment given")
        return np.array([bose_occupation(m.omega, env) for m in self.modes], dtype=float)

    def fingerprint(self):
        """Stable hash of the network description."""
        payload = {
            "modes": [(m.species.name, m.species.rest_energy, m.species.degeneracy, m.nu, m.degeneracy_slot)
                      for m in self.modes],
            "names": list(self.names),
            "channels": [(c.excited, c.ground, c.boson, list(c.rates.as_dict().values()))
                         for c in self.channels],
            "reservoir": None if self.reservoir is None else (
                self.reservoir.kappa, self.reservoir.environment.temperature,
                self.reservoir.environment.chemical_potential,
                None if self.reservoir.modes is None else list(self.reservoir.modes)),
        }
        text = json.dumps(payload, sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()


def boltzmann_factor(mode: Mode, env: ThermalEnvironment):
    """``exp(-(hbar*omega - mu)/kT)``; underflows to 0 for heavy quanta."""
    const = get_constants()
    x = (const.hbar * mode.omega - env.chemical_potential) / (const.k_B * env.temperature)
    if x <= 0:
        raise DomainError("hbar*omega <= mu: no stationary reservoir distribution")
    with np.errstate(under="ignore"):
        return float(np.exp(-x))


@dataclass(frozen=True)
class ChannelPropensities:
    rate_L: float
    rate_R_spont: float
    rate_R_photon: float
    rate_R_atom: float

    @property
    def rate_R(self):
        return self.rate_R_spont + self.rate_R_photon + self.rate_R_atom


def channel_propensities(channel: ReactionChannel, occupations) -> ChannelPropensities:
    """Event rates of one channel given the occupation vector.

    Rates are proportional to the number of quanta in each mode involved.
    """
    n = np.asarray(occupations, dtype=float)
    n_ex, n_a, n_phi = n[channel.excited], n[channel.ground], n[channel.boson]
    r = channel.rates
    return ChannelPropensities(
        rate_L=r.beta_abs * n_phi * n_a,
        rate_R_spont=r.alpha * n_ex,
        rate_R_photon=r.beta_em * n_phi * n_ex,
        rate_R_atom=r.gamma * n_a * n_ex,
    )


def occupation_propensities(rates: RateSet, n_excited, n_ground, n_boson) -> ChannelPropensities:
    """As :func:`channel_propensities` for bare occupation numbers."""
    return ChannelPropensities(
        rates.beta_abs * n_boson * n_ground,
        rates.alpha * n_excited,
        rates.beta_em * n_boson * n_excited,
        rates.gamma * n_ground * n_excited,
    )


def equilibrium_residual(channel: ReactionChannel, occupations):
    """Net absorption flux ``rate_L - rate_R`` in 1/s; zero at detailed balance."""
    p = channel_propensities(channel, occupations)
    return p.rate_L - p.rate_R


def thermal_balance_residual(rates: RateSet, ground_energy, boson_energy, env: ThermalEnvironment):
    """Relative residual ``(rate_L - rate_R) / rate_L`` at thermal occupations.

    ``ground_energy`` is the ground quantum's total energy and
    ``boson_energy`` the boson's, both in J, with ``mu = 0``. Both rates are
    divided by ``n_ground * n_boson`` first, so the result stays finite when
    either occupation underflows.
    """
    if env.chemical_potential != 0:
        raise DomainError("thermal balance is evaluated at mu = 0")
    kT = env.kT
    x, y = ground_energy / kT, boson_energy / kT
    if not (x > 0 and y > 0):
        raise DomainError("energies must be > 0")

    def g(z):  # log(1 - e^-z), so that log n(z) = -z - g(z)
        return math.log(-math.expm1(-z))

    # n_excited / (n_ground n_boson)
    ratio = math.exp(g(x) + g(y) - g(x + y))
    with np.errstate(under="ignore"):
        n_phi = float(np.exp(-y - g(y)))
        n_a = float(np.exp(-x - g(x)))
    per_pair_L = rates.beta_abs
    per_pair_R = ratio * (rates.alpha + rates.beta_em * n_phi + rates.gamma * n_a)
    return (per_pair_L - per_pair_R) / per_pair_L


def reservoir_propensities(mode: Mode, n, coupling: ReservoirCoupling):
    """``(birth, death)`` rates of the bath exchange for one mode holding ``n`` quanta."""
    if coupling.kappa == 0:
        return 0.0, 0.0
    b = boltzmann_factor(mode, coupling.environment)
    return coupling.kappa * b * (n + 1), coupling.kappa * n


def rate_scale(network: Network, occupations):
    """Largest per-quantum loss rate; sets the ODE stability guard."""
    n = np.asarray(occupations, dtype=float)
    scale = 0.0
    for c in network.channels:
        r = c.rates
        n_ex, n_a, n_phi = n[c.excited], n[c.ground], n[c.boson]
        # crude bound on the Jacobian row sums of this channel
        scale = max(
            scale,
            r.alpha + r.beta_em * (n_phi + n_ex) + r.gamma * (n_a + n_ex) + r.beta_abs * (n_a + n_phi),
        )
    idx, kappa, boltz = network.reservoir_arrays()
    if len(idx):
        scale = max(scale, float(np.max(kappa * (1 + boltz))))
    return scale


@dataclass
class Trajectory:
    """Sampled states of one run.

    ``samples[i]`` is the occupation vector at ``times[i]``.
    """

    times: np.ndarray
    samples: np.ndarray
    seed: int | None = None
    config_hash: str | None = None
    method: str = "ssa"
    extinct: bool = False
    final_time: float = 0.0
    event_counts: np.ndarray | None = None  # (n_channels, 4) for L, R_spont, R_photon, R_atom
    reservoir_counts: np.ndarray | None = None  # (n_modes, 2) births, deaths
    time_average: np.ndarray | None = None
    expected_causes: np.ndarray | None = None  # summed conditional cause probabilities of R events
    clamp_events: list = field(default_factory=list)
    n_events: int = 0
    event_log: dict | None = None

    @property
    def cause_counts(self):
        """Observed R-event counts by cause, summed over channels."""
        return self.event_counts[:, 1:4].sum(axis=0)
