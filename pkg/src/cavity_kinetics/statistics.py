"""Bose-Einstein occupations and spectral energy densities."""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .constants import get_constants
from .errors import BelowRestEnergyError, DivergenceError, DomainError, SingularityError
from .modes import Species, SpeciesTriple, _is_mp, dnu_domega, nu_of_omega

# Above this reduced energy 1/expm1(z) is replaced by the Wien asymptote.
WIEN_SWITCH = 700.0


@dataclass(frozen=True)
class ThermalEnvironment:
    temperature: float
    chemical_potential: float = 0.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError(f"temperature must be > 0, got {self.temperature!r}")

    @property
    def kT(self) -> float:
        return get_constants().k_B * self.temperature

    def check_species(self, species: Species):
        """Reject a chemical potential above the species' lowest quantum energy."""
        floor = species.rest_energy
        if self.chemical_potential > floor:
            raise DivergenceError(
                f"chemical potential {self.chemical_potential!r} J exceeds the lowest "
                f"{species.name} energy {floor!r} J"
            )


def reduced_energy(omega, env: ThermalEnvironment):
    """``(hbar*omega - mu) / k_B T``."""
    const = get_constants()
    return (const.hbar * omega - env.chemical_potential) / (const.k_B * env.temperature)


def _check_z(z):
    if np.any(np.asarray(z <= 0) if not _is_mp(z) else z <= 0):
        raise DivergenceError("hbar*omega <= mu: the Bose-Einstein occupation diverges")


def occupation_from_reduced(z):
    """``1/(e^z - 1)`` for ``z > 0``, overflow-safe; accepts arrays and ``mpf``."""
    _check_z(z)
    if _is_mp(z):
        return 1 / mpmath.expm1(z)
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", under="ignore"):
        out = np.where(z > WIEN_SWITCH, np.exp(-z), 1.0 / np.expm1(np.minimum(z, WIEN_SWITCH)))
    return float(out) if out.ndim == 0 else out


def log_occupation_from_reduced(z):
    """Natural log of ``1/(e^z - 1)``, finite for arbitrarily large ``z``."""
    _check_z(z)
    if _is_mp(z):
        return -mpmath.log(mpmath.expm1(z))
    return -_log_expm1(np.asarray(z, dtype=float))


def _log_expm1(x):
    """``log(e^x - 1)`` for x > 0 without overflow or cancellation."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        big = x + np.log1p(-np.exp(-x))
        small = np.log(np.expm1(np.minimum(x, 1.0)))
    out = np.where(x > 1.0, big, small)
    return float(out) if out.ndim == 0 else out


def bose_occupation(omega, env: ThermalEnvironment):
    """Mean number of quanta per mode, ``1/(exp((hbar*omega - mu)/kT) - 1)``."""
    return occupation_from_reduced(reduced_energy(omega, env))


def log_bose_occupation(omega, env: ThermalEnvironment):
    return log_occupation_from_reduced(reduced_energy(omega, env))


def spectral_energy_density(species: Species, omega, env: ThermalEnvironment):
    """Energy per unit volume per unit ``nu`` interval, in J s / m^3.

    For the photon this is Planck's law; for a massive species ``nu`` comes
    from the relativistic dispersion relation.
    """
    const = get_constants()
    energy = const.hbar * omega
    if species.is_massless:
        if not omega > 0:
            raise DomainError("photon frequency must be > 0")
    elif not energy > species.rest_energy:
        raise BelowRestEnergyError(f"{species.name}: hbar*omega must exceed the rest energy")
    nu = nu_of_omega(species, omega)
    pi = mpmath.pi if _is_mp(nu) else math.pi
    n_bar = bose_occupation(omega, env)
    return species.degeneracy * 4 * pi * nu**2 / const.c**3 * energy * n_bar


def angular_spectral_density(species: Species, omega, env: ThermalEnvironment):
    """Energy density per unit angular frequency, ``rho * d nu / d omega``."""
    if not species.is_massless and get_constants().hbar * omega == species.rest_energy:
        raise SingularityError(f"{species.name}: d nu/d omega diverges at the rest energy")
    rho = spectral_energy_density(species, omega, env)
    if species.is_massless:
        pi = mpmath.pi if _is_mp(omega) else math.pi
        return rho / (2 * pi)
    return rho * dnu_domega(species, omega)


@dataclass(frozen=True)
class PopulationRatio:
    """Excited-to-ground population ratio, exact and Maxwell-Boltzmann.

    ``log_*`` fields are natural logs and stay finite where the ratios
    themselves underflow. ``log_relative_gap`` is the log of
    ``|exact - mb| / mb``.
    """

    log_exact: float
    log_maxwell_boltzmann: float
    log_relative_gap: float
    log_gap_bound: float
    maxwell_boltzmann_regime: bool

    @property
    def exact(self) -> float:
        return math.exp(self.log_exact) if self.log_exact > -745 else 0.0

    @property
    def maxwell_boltzmann(self) -> float:
        return math.exp(self.log_maxwell_boltzmann) if self.log_maxwell_boltzmann > -745 else 0.0


# ground-state reduced energy above which the MB limit counts as valid
MB_REGIME_THRESHOLD = 10.0


def equilibrium_population_ratio(
    triple: SpeciesTriple, env: ThermalEnvironment, ground_kinetic_energy=0.0
) -> PopulationRatio:
    """``N_excited / N_ground`` for thermal occupations of one mode of each.

    The ground atom carries ``ground_kinetic_energy`` and the excited atom
    the same plus the transition energy.
    """
    if env.chemical_potential != 0:
        raise DomainError("the population ratio is defined for mu = 0")
    kT = env.kT
    x_a = (triple.ground.rest_energy + ground_kinetic_energy) / kT
    x_0 = triple.transition_energy / kT
    if not x_a > 0:
        raise DivergenceError("ground-state energy must be > 0")
    x_ap = x_a + x_0
    log_d = math.log(triple.excited.degeneracy / triple.ground.degeneracy)
    log_mb = log_d - x_0
    if x_a > 1.0:
        log_exact = log_mb + math.log1p(-math.exp(-x_a)) - math.log1p(-math.exp(-x_ap))
    else:
        log_exact = log_d + _log_expm1(x_a) - _log_expm1(x_ap)
    # |exact/mb - 1| = (e^-x_a - e^-x_ap) / (1 - e^-x_ap)
    log_gap = math.log(-math.expm1(-x_0)) - x_a - math.log1p(-math.exp(-x_ap))
    return PopulationRatio(
        log_exact=log_exact,
        log_maxwell_boltzmann=log_mb,
        log_relative_gap=log_gap,
        log_gap_bound=math.log(2.0) - x_a,
        maxwell_boltzmann_regime=x_a > MB_REGIME_THRESHOLD,
    )


def occupancy_temperature(omega, n_target):
    """Temperature at which a mode of frequency ``omega`` holds ``n_target`` quanta."""
    if not n_target > 0:
        raise DomainError("n_target must be > 0")
    const = get_constants()
    return const.hbar * omega / (const.k_B * math.log1p(1.0 / n_target))


def log_occupation_shift(x, y):
    """``log(n(x + y) / n(x))`` for reduced energies ``x > 0``, ``y >= 0``.

    Exact in ``y`` even when ``x`` is so large that ``x + y`` rounds to ``x``.
    """
    _check_z(x)
    if x > 1.0:
        return -y - math.log1p(-math.exp(-x - y)) + math.log1p(-math.exp(-x))
    return float(_log_expm1(x) - _log_expm1(x + y))


def log_occupation_ratio(omega_1, omega_2, env: ThermalEnvironment):
    """``log(n(omega_1) / n(omega_2))`` for two thermal modes."""
    return log_bose_occupation(omega_1, env) - log_bose_occupation(omega_2, env)
