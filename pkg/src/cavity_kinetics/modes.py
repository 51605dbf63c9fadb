"""Species, dispersion relations and cavity mode counting.

Every species is a boson characterised by its rest energy ``Mc^2`` and an
internal degeneracy ``d``. The photon is the massless case with ``d = 2``.
A mode's spatial frequency ``nu`` is defined through ``2*pi*nu = c*|k|`` for
every species, while its angular frequency follows the relativistic
dispersion relation ``hbar*omega = sqrt((Mc^2)^2 + (2*pi*hbar*nu)^2)``.

Massive species are awkward in double precision: for an atom of 1 GeV with a
kinetic energy of 1e-13 eV, ``hbar*omega`` cannot distinguish the two. The
public functions therefore accept ``mpmath.mpf`` arguments transparently, and
the ``*_kinetic_energy`` helpers work from the kinetic energy directly, which
is exact in ordinary floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .constants import get_constants
from .errors import (
    BelowRestEnergyError,
    DomainError,
    EnergyConservationError,
    SingularityError,
    SizeGuardError,
)

MAX_ENUMERATED_MODES = 10**7

_REL_TOL = 1e-12


def _is_mp(x):
    return isinstance(x, (mpmath.mpf, mpmath.mpc))


def _sqrt(x):
    if _is_mp(x):
        return mpmath.sqrt(x)
    return np.sqrt(x)


def _any(cond):
    return bool(np.any(cond))


def _pi(x):
    return mpmath.pi if _is_mp(x) else math.pi


@dataclass(frozen=True)
class Species:
    """A kind of boson.

    ``rest_energy`` is ``Mc^2`` in joules and ``degeneracy`` the number of
    internal states sharing one wave vector.
    """

    name: str
    rest_energy: float
    degeneracy: int

    def __post_init__(self):
        if not self.rest_energy >= 0:
            raise DomainError(f"{self.name}: rest_energy must be >= 0, got {self.rest_energy!r}")
        if int(self.degeneracy) != self.degeneracy or self.degeneracy < 1:
            raise DomainError(f"{self.name}: degeneracy must be an integer >= 1")
        if self.name == "photon" and (self.rest_energy != 0 or self.degeneracy != 2):
            raise DomainError("the photon species is massless with degeneracy 2")

    @property
    def is_massless(self) -> bool:
        return self.rest_energy == 0


def photon() -> Species:
    return Species("photon", 0.0, 2)


@dataclass(frozen=True)
class SpeciesTriple:
    """The three bosons of ``excited <-> ground + boson``.

    ``transition_energy`` (``hbar*omega_0``) is stored explicitly because the
    difference of two large rest energies is not accurate in floats.
    """

    ground: Species
    boson: Species
    excited: Species
    transition_energy: float

    def __post_init__(self):
        if not self.transition_energy > 0:
            raise DomainError("transition_energy must be > 0")
        expected = self.ground.rest_energy + self.transition_energy
        if abs(self.excited.rest_energy - expected) > _REL_TOL * expected:
            raise DomainError(
                "excited.rest_energy must equal ground.rest_energy + transition_energy "
                f"({self.excited.rest_energy!r} != {expected!r})"
            )

    @classmethod
    def build(cls, ground, boson, transition_energy, excited_degeneracy, excited_name=None):
        excited = Species(
            excited_name or f"{ground.name}{boson.name}",
            ground.rest_energy + transition_energy,
            excited_degeneracy,
        )
        return cls(ground, boson, excited, transition_energy)


@dataclass(frozen=True)
class CavitySpec:
    """Rectangular cavity with perfectly reflecting walls."""

    edge_lengths: tuple
    temperature: float

    def __post_init__(self):
        lengths = tuple(float(x) for x in self.edge_lengths)
        if len(lengths) != 3 or not all(x > 0 for x in lengths):
            raise DomainError("edge_lengths must be three positive lengths")
        if not self.temperature > 0:
            raise DomainError("temperature must be > 0")
        object.__setattr__(self, "edge_lengths", lengths)

    @classmethod
    def cube(cls, side, temperature):
        return cls((side, side, side), temperature)

    @property
    def volume(self) -> float:
        lx, ly, lz = self.edge_lengths
        return lx * ly * lz


@dataclass(frozen=True)
class Mode:
    species: Species
    nu: float
    omega: float
    degeneracy_slot: int = 0
    lattice_index: tuple | None = field(default=None, compare=True)

    def __post_init__(self):
        if not 0 <= self.degeneracy_slot < self.species.degeneracy:
            raise DomainError(
                f"degeneracy_slot {self.degeneracy_slot} outside [0, {self.species.degeneracy})"
            )
        expected = omega_of_nu(self.species, self.nu)
        if abs(self.omega - expected) > _REL_TOL * abs(expected):
            raise DomainError("omega is inconsistent with the dispersion relation")

    @classmethod
    def from_nu(cls, species, nu, degeneracy_slot=0, lattice_index=None):
        return cls(species, nu, float(omega_of_nu(species, nu)), degeneracy_slot, lattice_index)

    @classmethod
    def from_omega(cls, species, omega, degeneracy_slot=0):
        nu = float(nu_of_omega(species, omega))
        return cls(species, nu, float(omega_of_nu(species, nu)), degeneracy_slot)

    @classmethod
    def from_kinetic_energy(cls, species, kinetic, degeneracy_slot=0):
        return cls.from_nu(species, float(nu_of_kinetic_energy(species, kinetic)), degeneracy_slot)

    @property
    def kinetic_energy(self) -> float:
        return float(kinetic_energy_of_nu(self.species, self.nu))

    @property
    def energy(self) -> float:
        return get_constants().hbar * self.omega


# -- dispersion ------------------------------------------------------------


def omega_of_nu(species: Species, nu):
    """Angular frequency of a ``species`` quantum with spatial frequency ``nu``."""
    if _any(nu < 0):
        raise DomainError(f"nu must be >= 0, got {nu!r}")
    hbar = get_constants().hbar
    if species.is_massless:
        return 2 * _pi(nu) * nu
    p = 2 * _pi(nu) * hbar * nu
    m = mpmath.mpf(species.rest_energy) if _is_mp(p) else species.rest_energy
    return _sqrt(m * m + p * p) / hbar


def nu_of_omega(species: Species, omega):
    hbar = get_constants().hbar
    energy = hbar * omega
    if _any(energy < species.rest_energy):
        raise BelowRestEnergyError(
            f"{species.name}: hbar*omega={energy!r} J below rest energy {species.rest_energy!r} J"
        )
    if species.is_massless:
        return omega / (2 * _pi(omega))
    m = species.rest_energy
    p = _sqrt((energy - m) * (energy + m))
    return p / (2 * _pi(p) * hbar)


def kinetic_energy(species: Species, omega):
    """``hbar*omega - Mc^2``; pass an ``mpf`` when the result is tiny."""
    energy = get_constants().hbar * omega
    if energy < species.rest_energy:
        raise BelowRestEnergyError(f"{species.name}: below rest energy")
    return energy - species.rest_energy


def nu_of_kinetic_energy(species: Species, kinetic):
    """Spatial frequency from the kinetic energy, without cancellation."""
    if _any(kinetic < 0):
        raise BelowRestEnergyError("kinetic energy must be >= 0")
    hbar = get_constants().hbar
    p = _sqrt(kinetic * (kinetic + 2 * species.rest_energy))
    return p / (2 * _pi(p) * hbar)


def kinetic_energy_of_nu(species: Species, nu):
    if nu < 0:
        raise DomainError(f"nu must be >= 0, got {nu!r}")
    hbar = get_constants().hbar
    p = 2 * _pi(nu) * hbar * nu
    m = species.rest_energy
    if species.is_massless:
        return p
    return p * p / (_sqrt(m * m + p * p) + m)


def dnu_domega(species: Species, omega):
    """Jacobian ``d nu / d omega`` of the dispersion relation."""
    nu = nu_of_omega(species, omega)
    if nu == 0:
        raise SingularityError("d nu/d omega diverges at the rest energy")
    return omega / (4 * _pi(nu) ** 2 * nu)


# -- counting --------------------------------------------------------------


def _density(omega, nu, d_omega, volume):
    c = get_constants().c
    return omega * nu * d_omega * volume / (_pi(nu) * c**3)


def resonance_count_in_band(species: Species, omega_center, d_omega, volume):
    """Number of resonant ``nu`` values (per degeneracy slot) in a band ``d_omega`` wide."""
    if not d_omega > 0:
        raise DomainError("d_omega must be > 0")
    if not volume > 0:
        raise DomainError("volume must be > 0")
    hbar = get_constants().hbar
    if hbar * (omega_center - d_omega / 2) < species.rest_energy and not species.is_massless:
        raise BelowRestEnergyError(f"{species.name}: band straddles the rest energy")
    if species.is_massless and omega_center - d_omega / 2 < 0:
        raise DomainError("band extends below zero frequency")
    nu = nu_of_omega(species, omega_center)
    return float(_density(omega_center, nu, d_omega, volume))


def resonance_count_at_kinetic_energy(species: Species, kinetic, d_omega, volume):
    """As :func:`resonance_count_in_band`, with the band centre given by its kinetic energy."""
    if not d_omega > 0:
        raise DomainError("d_omega must be > 0")
    hbar = get_constants().hbar
    if kinetic - hbar * d_omega / 2 < 0:
        raise BelowRestEnergyError(f"{species.name}: band straddles the rest energy")
    omega = (species.rest_energy + kinetic) / hbar
    nu = nu_of_kinetic_energy(species, kinetic)
    return float(_density(omega, nu, d_omega, volume))


def photon_mode_count(nu, d_nu, volume):
    """Closed-form massless count ``(4 pi nu^2 / c^3) d_nu V`` per polarisation."""
    c = get_constants().c
    return 4 * math.pi * nu**2 * d_nu * volume / c**3


def pair_count_in_band(
    triple: SpeciesTriple,
    omega_phi_center,
    d_omega,
    volume,
    omega_excited=None,
    *,
    ground_kinetic_energy=None,
):
    """Number of (ground, boson) resonance pairs that conserve energy in a band.

    The excited-mode energy is given either as ``omega_excited`` or, more
    accurately for heavy atoms, through the ground atom's kinetic energy at
    the band centre. Returns ``min(dN_boson, dN_ground)``.
    """
    if d_omega == 0:
        return 0.0
    if (omega_excited is None) == (ground_kinetic_energy is None):
        raise TypeError("give exactly one of omega_excited or ground_kinetic_energy")
    hbar = get_constants().hbar
    if ground_kinetic_energy is None:
        ground_kinetic_energy = (
            hbar * omega_excited - hbar * omega_phi_center - triple.ground.rest_energy
        )
    try:
        n_ground = resonance_count_at_kinetic_energy(
            triple.ground, ground_kinetic_energy, d_omega, volume
        )
        n_boson = resonance_count_in_band(triple.boson, omega_phi_center, d_omega, volume)
    except (BelowRestEnergyError, DomainError) as exc:
        raise EnergyConservationError(f"energy conservation not solvable: {exc}") from exc
    return min(n_boson, n_ground)


def mode_count_ratio(triple: SpeciesTriple, omega_phi, ground_kinetic_energy):
    """``dN_ground / dN_boson`` for a common band width (exact, no small-band limit)."""
    hbar = get_constants().hbar
    omega_a = (triple.ground.rest_energy + ground_kinetic_energy) / hbar
    nu_a = nu_of_kinetic_energy(triple.ground, ground_kinetic_energy)
    nu_phi = nu_of_omega(triple.boson, omega_phi)
    return float(omega_a * nu_a / (omega_phi * nu_phi))


# -- lattice enumeration ---------------------------------------------------


def _lattice_bounds(cavity, nu_max):
    c = get_constants().c
    return [int(math.floor(2 * nu_max * length / c)) for length in cavity.edge_lengths]


def count_lattice_modes(species: Species, cavity: CavitySpec, nu_lo, nu_hi, include_degeneracy=True):
    """Exact count of standing-wave lattice points with ``nu_lo <= nu < nu_hi``.

    Columns along z are counted in closed form, so the cost is
    O(n_x * n_y) rather than O(n_x * n_y * n_z).
    """
    if not 0 <= nu_lo <= nu_hi:
        raise DomainError("need 0 <= nu_lo <= nu_hi")
    c = get_constants().c
    lx, ly, lz = cavity.edge_lengths
    q_lo = (2 * nu_lo / c) ** 2
    q_hi = (2 * nu_hi / c) ** 2
    nx_max, ny_max, _ = _lattice_bounds(cavity, nu_hi)
    if nx_max < 1 or ny_max < 1:
        return 0
    ny = np.arange(1, ny_max + 1, dtype=np.float64)
    sy = (ny / ly) ** 2
    total = 0
    chunk = max(1, 2_000_000 // len(ny))
    for start in range(1, nx_max + 1, chunk):
        nx = np.arange(start, min(start + chunk, nx_max + 1), dtype=np.float64)
        s = (nx[:, None] / lx) ** 2 + sy[None, :]
        floor_room = np.clip(q_lo - s, 0.0, None)
        lo = np.maximum(np.ceil(lz * np.sqrt(floor_room)), 1.0)
        # sqrt round-off can misplace the shell edge by one lattice step
        lo = np.where((lo > 1) & (((lo - 1) / lz) ** 2 >= q_lo - s), lo - 1, lo)
        lo = np.where((lo / lz) ** 2 < q_lo - s, lo + 1, lo)
        room = q_hi - s
        hi = np.floor(lz * np.sqrt(np.clip(room, 0.0, None)))
        hi = np.where((hi / lz) ** 2 >= room, hi - 1, hi)
        hi = np.where(((hi + 1) / lz) ** 2 < room, hi + 1, hi)
        total += int(np.clip(hi - lo + 1, 0, None).sum())
    return total * (species.degeneracy if include_degeneracy else 1)


def continuum_mode_count(species: Species, cavity: CavitySpec, nu_max):
    """Asymptotic count ``d (4 pi / 3) nu_max^3 V / c^3``."""
    c = get_constants().c
    return species.degeneracy * (4 * math.pi / 3) * nu_max**3 * cavity.volume / c**3


def enumerate_modes(species: Species, cavity: CavitySpec, nu_max, max_modes=MAX_ENUMERATED_MODES):
    """All standing-wave modes with ``nu <= nu_max``, sorted by frequency.

    Wave vectors are ``k = pi * (n_x/L_x, n_y/L_y, n_z/L_z)`` with
    ``n_i >= 1``; each lattice point yields ``d`` modes.
    """
    if not nu_max > 0:
        raise DomainError("nu_max must be > 0")
    count = count_lattice_modes(species, cavity, 0.0, np.nextafter(nu_max, np.inf))
    if count > max_modes:
        raise SizeGuardError(f"{count} modes exceed the enumeration guard of {max_modes}")
    if count == 0:
        return []
    c = get_constants().c
    lx, ly, lz = cavity.edge_lengths
    bx, by, bz = _lattice_bounds(cavity, nu_max)
    nx, ny, nz = np.meshgrid(
        np.arange(1, bx + 1), np.arange(1, by + 1), np.arange(1, bz + 1), indexing="ij"
    )
    nu = 0.5 * c * np.sqrt((nx / lx) ** 2 + (ny / ly) ** 2 + (nz / lz) ** 2)
    keep = nu <= nu_max
    idx = np.column_stack([nx[keep], ny[keep], nz[keep]])
    nus = nu[keep]
    order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0], nus))
    modes = []
    for i in order:
        lattice = tuple(int(v) for v in idx[i])
        for slot in range(species.degeneracy):
            modes.append(Mode.from_nu(species, float(nus[i]), slot, lattice))
    return modes
