"""Generalised Einstein kinetics for the bosonic reaction ``a phi <-> a + phi``."""
__version__ = "0.1.0"

from .constants import CODATA, PhysicalConstants, get_constants, using_constants
from .errors import (
    BelowRestEnergyError,
    CavityKineticsError,
    ConfigError,
    DivergenceError,
    DomainError,
    EnergyConservationError,
    NegativeOccupationError,
    SingularityError,
    SizeGuardError,
    StabilityGuardError,
)
from .interaction import (
    DecayChannel,
    LineShape,
    RateSet,
    broadband_reconstruction,
    coefficient_C,
    einstein_A,
    einstein_A_over_B,
    einstein_B_abs,
    einstein_B_em,
    micro_rate,
    w_abs,
    w_em,
    w_forgotten,
)
from .modes import CavitySpec, Mode, Species, SpeciesTriple, photon
from .statistics import ThermalEnvironment, bose_occupation, occupancy_temperature
