"""Reaction-network kinetics: propensities, RK4 and SSA engines, scenarios."""
from .network import (
    EVENT_NAMES,
    ChannelPropensities,
    Network,
    ReactionChannel,
    ReservoirCoupling,
    SimState,
    Trajectory,
    boltzmann_factor,
    channel_propensities,
    equilibrium_residual,
    occupation_propensities,
    rate_scale,
    reservoir_propensities,
    thermal_balance_residual,
)
from .scenarios import (
    AtomLaserReport,
    atom_laser_ensemble,
    channel_modes,
    independent_channels_network,
    per_mode_fractions,
    runaway_network,
    scenario_atom_laser,
)
from .simulate import BatchAverage, EnsembleResult, run_ode, run_ssa, run_ssa_batches, run_ssa_ensemble
