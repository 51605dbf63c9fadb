"""Network builders and the seeded-mode (atom laser) runaway scenario."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..constants import get_constants
from ..errors import DomainError
from ..interaction import RateSet
from ..modes import Mode, SpeciesTriple
from .network import Network, ReactionChannel, ReservoirCoupling, SimState, Trajectory
from .simulate import run_ssa


def channel_modes(triple: SpeciesTriple, ground_kinetic_energy, omega_phi,
                  ground_slot=0, boson_slot=0, excited_slot=0):
    """``(excited, ground, boson)`` modes that conserve energy exactly.

    The excited kinetic energy is built from kinetic parts only so heavy
    species keep their meV-scale structure.
    """
    hbar = get_constants().hbar
    ground = Mode.from_kinetic_energy(triple.ground, ground_kinetic_energy, ground_slot)
    boson = Mode.from_omega(triple.boson, omega_phi, boson_slot)
    excited_kinetic = ground_kinetic_energy + hbar * omega_phi - triple.transition_energy
    if excited_kinetic < 0:
        raise DomainError("ground + boson energy lies below the excited rest energy")
    excited = Mode.from_kinetic_energy(triple.excited, excited_kinetic, excited_slot)
    return excited, ground, boson


def independent_channels_network(triple: SpeciesTriple, ground_kinetic_energies, omega_phis,
                                 rates, reservoir: ReservoirCoupling | None = None) -> Network:
    """One disjoint ``(excited, ground, boson)`` triplet of modes per channel.

    ``rates`` is a single :class:`RateSet` or one per channel. Distinct
    channels use distinct ``omega_phi`` so no two modes coincide.
    """
    ek = np.broadcast_to(np.asarray(ground_kinetic_energies, dtype=float), np.shape(omega_phis))
    if isinstance(rates, RateSet):
        rates = [rates] * len(ek)
    modes, names, channels = [], [], []
    for j, (e, w, r) in enumerate(zip(ek, omega_phis, rates)):
        ex, gr, bo = channel_modes(triple, float(e), float(w))
        base = len(modes)
        modes += [ex, gr, bo]
        names += [f"excited{j}", f"ground{j}", f"boson{j}"]
        channels.append(ReactionChannel(base, base + 1, base + 2, r))
    return Network(tuple(modes), tuple(channels), tuple(names), reservoir)


def runaway_network(triple: SpeciesTriple, ground_kinetic_energy, omega_phi, rates: RateSet,
                    d_a=None, reservoir: ReservoirCoupling | None = None) -> Network:
    """One excited mode decaying into ``d_a`` degenerate ground modes.

    Mode order: excited, boson, then ``ground0 .. ground{d_a-1}``, one per
    internal state of the ground species. All channels share the boson mode.
    """
    d_a = triple.ground.degeneracy if d_a is None else int(d_a)
    if not 1 <= d_a <= triple.ground.degeneracy:
        raise DomainError(f"d_a must lie in [1, {triple.ground.degeneracy}]")
    excited, _, boson = channel_modes(triple, ground_kinetic_energy, omega_phi)
    grounds = [Mode.from_kinetic_energy(triple.ground, ground_kinetic_energy, s) for s in range(d_a)]
    modes = (excited, boson, *grounds)
    names = ("excited", "boson", *(f"ground{s}" for s in range(d_a)))
    channels = tuple(ReactionChannel(0, 2 + s, 1, rates) for s in range(d_a))
    return Network(modes, channels, names, reservoir)


@dataclass(frozen=True)
class AtomLaserReport:
    """Where the excited quanta decayed to.

    ``decays`` counts R events per peer channel (same excited mode, ground
    modes of equal energy), seeded channel first.
    """

    seed_mode: int
    seed_population: int
    peer_ground_modes: tuple
    decays: tuple
    n_decays: int
    seed_fraction: float
    seed_fraction_sem: float
    uniform_baseline: float
    predicted_fraction: float
    initial_forgotten_propensity: float
    stimulation_ratio: float

    @property
    def runaway_condition(self) -> bool:
        """``gamma * n_seed > 10 (alpha + beta_em n_phi)`` at t = 0."""
        return self.stimulation_ratio > 10.0


def _peer_channels(network: Network, seed_mode: int):
    seeded = [j for j, c in enumerate(network.channels) if c.ground == seed_mode]
    if not seeded:
        raise DomainError(f"mode {seed_mode} is not the ground mode of any channel")
    ref = network.channels[seeded[0]]
    w = network.modes[seed_mode].omega
    peers = [seeded[0]]
    for j, c in enumerate(network.channels):
        if j == seeded[0] or c.excited != ref.excited:
            continue
        if abs(network.modes[c.ground].omega - w) <= 1e-12 * w:
            peers.append(j)
    return peers


def _decay_propensity(channel, n):
    r = channel.rates
    return r.alpha + r.beta_em * n[channel.boson] + r.gamma * n[channel.ground]


def atom_laser_initial_state(network: Network, seed_mode, seed_population, excited_population):
    """Seeded state: every excited mode of a seeded channel holds ``excited_population``."""
    n = np.zeros(network.n_modes, dtype=np.int64)
    for c in network.channels:
        if c.ground == seed_mode:
            n[c.excited] = excited_population
    n[seed_mode] = seed_population
    return SimState(0.0, n)


def _report(network, seed_mode, state0, counts, per_trajectory=None):
    peers = _peer_channels(network, seed_mode)
    n0 = np.asarray(state0.occupations, dtype=float)
    props = np.array([_decay_propensity(network.channels[j], n0) for j in peers])
    decays = counts[peers, 1:4].sum(axis=1)
    total = int(decays.sum())
    if per_trajectory is not None and len(per_trajectory) > 1:
        frac = float(np.mean(per_trajectory))
        sem = float(np.std(per_trajectory, ddof=1) / np.sqrt(len(per_trajectory)))
    else:
        frac = decays[0] / total if total else math.nan
        sem = math.sqrt(frac * (1 - frac) / total) if total else math.nan
    seeded = network.channels[peers[0]]
    r = seeded.rates
    n_seed = n0[seed_mode]
    unseeded = r.alpha + r.beta_em * n0[seeded.boson]
    return AtomLaserReport(
        seed_mode=seed_mode,
        seed_population=int(n_seed),
        peer_ground_modes=tuple(network.channels[j].ground for j in peers),
        decays=tuple(int(d) for d in decays),
        n_decays=total,
        seed_fraction=float(frac),
        seed_fraction_sem=sem,
        uniform_baseline=1.0 / len(peers),
        predicted_fraction=float(props[0] / props.sum()) if props.sum() > 0 else math.nan,
        initial_forgotten_propensity=float(r.gamma * n_seed * n0[seeded.excited]),
        stimulation_ratio=float(r.gamma * n_seed / unseeded) if unseeded > 0 else math.inf,
    )


def scenario_atom_laser(network: Network, seed_mode, seed_population, t_end, seed,
                        excited_population=100, state0: SimState | None = None,
                        **ssa_kwargs) -> tuple[Trajectory, AtomLaserReport]:
    """Seed one ground mode and count where the excited quanta decay to.

    The default initial state holds ``excited_population`` quanta in the
    excited mode, ``seed_population`` in ``seed_mode`` and none elsewhere.
    """
    if isinstance(seed_mode, str):
        seed_mode = network.index(seed_mode)
    if state0 is None:
        state0 = atom_laser_initial_state(network, seed_mode, seed_population, excited_population)
    else:
        occ = np.array(state0.occupations, dtype=np.int64)
        occ[seed_mode] = seed_population
        state0 = SimState(state0.time, occ)
    traj = run_ssa(network, state0, seed, t_end, **ssa_kwargs)
    return traj, _report(network, seed_mode, state0, traj.event_counts)


def atom_laser_ensemble(network: Network, seed_mode, seed_population, t_end, seed, n_trajectories,
                        excited_population=100) -> AtomLaserReport:
    """Ensemble version of :func:`scenario_atom_laser`.

    ``seed_fraction`` is the mean per-trajectory fraction; its standard
    error comes from the spread across trajectories, which stays valid when
    early decays stimulate later ones.
    """
    if isinstance(seed_mode, str):
        seed_mode = network.index(seed_mode)
    state0 = atom_laser_initial_state(network, seed_mode, seed_population, excited_population)
    rows, counts = _ensemble_shares(network, seed_mode, state0, t_end, seed, n_trajectories)
    return _report(network, seed_mode, state0, counts, rows[:, 0] if len(rows) else None)


def _ensemble_shares(network, seed_mode, state0, t_end, seed, n_trajectories):
    peers = _peer_channels(network, seed_mode)
    rows = []
    counts = np.zeros((len(network.channels), 4), dtype=np.int64)
    for child in np.random.SeedSequence(seed).spawn(n_trajectories):
        traj = run_ssa(network, state0, child, t_end)
        d = traj.event_counts[peers, 1:4].sum(axis=1)
        if d.sum():
            rows.append(d / d.sum())
        counts += traj.event_counts
    return np.array(rows), counts


def per_mode_fractions(network: Network, seed_mode, seed_population, t_end, seed, n_trajectories,
                       excited_population=100):
    """Mean and standard error of each peer channel's share of decays."""
    if isinstance(seed_mode, str):
        seed_mode = network.index(seed_mode)
    state0 = atom_laser_initial_state(network, seed_mode, seed_population, excited_population)
    rows, _ = _ensemble_shares(network, seed_mode, state0, t_end, seed, n_trajectories)
    return rows.mean(axis=0), rows.std(axis=0, ddof=1) / np.sqrt(len(rows))
