"""Line shapes, micro-rates, transition probabilities and A/B/C coefficients.

Conventions
-----------
* ``u_k`` and ``u_n`` are per-mode energy densities in J/m^3, i.e. the
  concentration of quanta in that mode times the quantum energy.
* ``B_em``, ``B_abs`` and ``C`` multiply a spectral density per unit ``nu``
  (the Planck convention), so ``B * rho`` is a rate per excited atom.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np

from .constants import ELECTRON_VOLT, get_constants
from .errors import BelowRestEnergyError, DomainError, EnergyConservationError
from .modes import CavitySpec, Species, SpeciesTriple, nu_of_kinetic_energy, nu_of_omega, photon
from .statistics import (
    ThermalEnvironment,
    bose_occupation,
    log_bose_occupation,
    log_occupation_from_reduced,
)


def lorentzian(delta, fwhm):
    """Area-normalised Lorentzian of full width ``fwhm`` at offset ``delta``."""
    half = 0.5 * fwhm
    return (fwhm / (2 * math.pi)) / (np.square(delta) + half * half)


@dataclass(frozen=True)
class LineShape:
    """Truncated Lorentzian emission profile sampled on a uniform comb.

    The comb is ``center + l * grid_spacing`` for ``|l * grid_spacing| <=
    half_window``. By default the profile is renormalised so that its comb
    sum times ``grid_spacing`` is exactly one.
    """

    center: float
    fwhm: float
    grid_spacing: float
    half_window: float

    # narrowness thresholds: grid_spacing <= fwhm/SPACING_RATIO <= center/WIDTH_RATIO
    SPACING_RATIO = 100.0
    WIDTH_RATIO = 1e4

    def __post_init__(self):
        if not (self.center > 0 and self.fwhm > 0 and self.grid_spacing > 0):
            raise DomainError("center, fwhm and grid_spacing must be > 0")
        if self.grid_spacing > self.fwhm / self.SPACING_RATIO * (1 + 1e-12):
            raise DomainError(
                f"grid_spacing must be <= fwhm/{self.SPACING_RATIO:g} "
                f"({self.grid_spacing!r} > {self.fwhm / self.SPACING_RATIO!r})"
            )
        if self.fwhm / self.SPACING_RATIO > self.center / self.WIDTH_RATIO * (1 + 1e-12):
            raise DomainError(f"line too broad: fwhm/{self.SPACING_RATIO:g} > center/{self.WIDTH_RATIO:g}")
        if self.half_window < self.fwhm:
            raise DomainError("half_window must be at least one fwhm")

    @classmethod
    def natural(cls, center, t_sp, grid_fraction=1e-3, window_widths=400.0, fwhm=None):
        """Line with default width ``2/t_sp`` unless ``fwhm`` is given."""
        width = 2.0 / t_sp if fwhm is None else fwhm
        return cls(center, width, width * grid_fraction, width * window_widths)

    def with_spacing(self, grid_spacing):
        return replace(self, grid_spacing=grid_spacing)

    @cached_property
    def n_side(self) -> int:
        return int(math.floor(self.half_window / self.grid_spacing * (1 + 1e-12)))

    @cached_property
    def offsets(self) -> np.ndarray:
        k = self.n_side
        return np.arange(-k, k + 1, dtype=np.float64) * self.grid_spacing

    @cached_property
    def grid_norm(self) -> float:
        return float(lorentzian(self.offsets, self.fwhm).sum() * self.grid_spacing)

    @cached_property
    def continuum_norm(self) -> float:
        """Integral of the raw Lorentzian across the sampled window."""
        edge = self.n_side * self.grid_spacing
        return 2.0 / math.pi * math.atan(2.0 * edge / self.fwhm)

    def value(self, omega_phi, normalization="grid"):
        return line_value(self, omega_phi, normalization)


def line_value(line: LineShape, omega_phi, normalization="grid"):
    """Line profile ``f(omega_phi - center)`` in s/rad; zero outside the window.

    ``normalization="grid"`` makes the comb sum exactly one;
    ``"continuum"`` makes the integral over the window one instead.
    """
    delta = np.asarray(omega_phi, dtype=float) - line.center
    if normalization == "grid":
        norm = line.grid_norm
    elif normalization == "continuum":
        norm = line.continuum_norm
    elif normalization == "none":
        norm = 1.0
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    edge = line.n_side * line.grid_spacing
    inside = np.abs(delta) <= edge * (1 + 1e-12)
    out = np.where(inside, lorentzian(delta, line.fwhm) / norm, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RateSet:
    """Micro-rates of one ``(m, n, k)`` channel, in 1/s."""

    alpha: float
    beta_abs: float
    beta_em: float
    gamma: float

    @classmethod
    def uniform(cls, rate):
        return cls(rate, rate, rate, rate)

    @property
    def balanced(self) -> bool:
        vals = (self.alpha, self.beta_abs, self.beta_em, self.gamma)
        ref = max(abs(v) for v in vals)
        return all(abs(v - vals[0]) <= 1e-12 * ref for v in vals)

    def scaled(self, **factors):
        return replace(self, **{k: getattr(self, k) * v for k, v in factors.items()})

    def as_dict(self):
        return {"alpha": self.alpha, "beta_abs": self.beta_abs, "beta_em": self.beta_em, "gamma": self.gamma}


@dataclass(frozen=True)
class DecayChannel:
    """One decay ``excited -> ground + boson`` in a cavity.

    ``ground_kinetic_energy`` is the ground atom's kinetic energy when the
    boson sits at the line centre; it defaults to ``1.5 k_B T``. For any
    other boson frequency energy conservation shifts it by
    ``-hbar*(omega_phi - center)``.
    """

    triple: SpeciesTriple
    t_sp: float
    line: LineShape
    cavity: CavitySpec
    ground_kinetic_energy: float | None = field(default=None)

    def __post_init__(self):
        if not self.t_sp > 0:
            raise DomainError("t_sp must be > 0")
        const = get_constants()
        omega_0 = self.triple.transition_energy / const.hbar
        if abs(self.line.center - omega_0) > self.line.fwhm * (1 + 1e-12) + 1e-15 * omega_0:
            raise DomainError("line centre inconsistent with the transition energy (beyond one fwhm)")
        if self.ground_kinetic_energy is None:
            object.__setattr__(
                self, "ground_kinetic_energy", 1.5 * const.k_B * self.cavity.temperature
            )
        if not self.ground_kinetic_energy > 0:
            raise EnergyConservationError("ground kinetic energy at line centre must be > 0")

    @property
    def volume(self):
        return self.cavity.volume

    @property
    def omega_phi0(self):
        return self.line.center

    @property
    def nu_phi0(self):
        return float(nu_of_omega(self.triple.boson, self.line.center))

    @property
    def omega_a0(self):
        return (self.triple.ground.rest_energy + self.ground_kinetic_energy) / get_constants().hbar

    @property
    def nu_a0(self):
        return float(nu_of_kinetic_energy(self.triple.ground, self.ground_kinetic_energy))

    def ground_kinetic_at(self, omega_phi):
        return self.ground_kinetic_energy - get_constants().hbar * (np.asarray(omega_phi) - self.line.center)

    def omega_a_at(self, omega_phi):
        kin = self.ground_kinetic_at(omega_phi)
        return (self.triple.ground.rest_energy + kin) / get_constants().hbar

    def omega_phi_of_omega_a(self, omega_a):
        """Boson frequency that conserves energy with a ground frequency ``omega_a``.

        Floats lose the kinetic part of a heavy atom's frequency; pass an
        ``mpf`` for ``omega_a`` in that regime.
        """
        const = get_constants()
        kin = const.hbar * omega_a - self.triple.ground.rest_energy
        return float(self.line.center + (self.ground_kinetic_energy - kin) / const.hbar)


def _check_energy(channel: DecayChannel, omega_phi):
    if np.any(channel.ground_kinetic_at(omega_phi) <= 0):
        raise EnergyConservationError("ground quantum would fall to or below its rest energy")


def _check_window(channel: DecayChannel, omega_phi):
    edge = channel.line.n_side * channel.line.grid_spacing
    if np.any(np.abs(np.asarray(omega_phi) - channel.line.center) > edge * (1 + 1e-12)):
        raise DomainError("omega_phi outside the line window")


def _rate_core(channel: DecayChannel, omega_phi, normalization="grid"):
    """``pi c^3 f / (omega_phi nu_phi t_sp)``: the factor shared by all rates."""
    const = get_constants()
    omega_phi = np.asarray(omega_phi, dtype=float)
    try:
        nu_phi = nu_of_omega(channel.triple.boson, omega_phi)
    except BelowRestEnergyError as exc:
        raise EnergyConservationError(str(exc)) from exc
    f = line_value(channel.line, omega_phi, normalization)
    return math.pi * const.c**3 * f / (omega_phi * nu_phi * channel.t_sp)


def micro_rate(channel: DecayChannel, omega_phi) -> RateSet:
    """The common value of alpha, beta_abs, beta_em and gamma at ``omega_phi``."""
    _check_window(channel, omega_phi)
    _check_energy(channel, omega_phi)
    t = channel.triple
    rate = float(_rate_core(channel, omega_phi)) / (t.boson.degeneracy * t.ground.degeneracy * channel.volume)
    return RateSet.uniform(rate)


def _check_density(u):
    if np.any(np.asarray(u) < 0):
        raise DomainError("energy density must be >= 0")


def w_em(channel: DecayChannel, u_k, omega_phi):
    """Stimulated-emission probability per unit time into boson mode k (any ground mode)."""
    _check_density(u_k)
    _check_window(channel, omega_phi)
    _check_energy(channel, omega_phi)
    hbar = get_constants().hbar
    core = _rate_core(channel, omega_phi)
    return core / channel.triple.boson.degeneracy * np.asarray(u_k) / (hbar * np.asarray(omega_phi))


def w_abs(channel: DecayChannel, u_k, omega_phi):
    """Absorption probability per unit time from boson mode k (any excited mode)."""
    t = channel.triple
    return t.excited.degeneracy / t.ground.degeneracy * w_em(channel, u_k, omega_phi)


def w_forgotten(channel: DecayChannel, u_n, omega_a=None, *, omega_phi=None):
    """Decay probability per unit time stimulated by ground-mode population ``u_n``.

    Give the ground-mode frequency ``omega_a`` or, equivalently and without
    cancellation, the matching boson frequency ``omega_phi``.
    """
    _check_density(u_n)
    if (omega_a is None) == (omega_phi is None):
        raise TypeError("give exactly one of omega_a or omega_phi")
    if omega_phi is None:
        omega_phi = channel.omega_phi_of_omega_a(omega_a)
    _check_window(channel, omega_phi)
    _check_energy(channel, omega_phi)
    hbar = get_constants().hbar
    core = _rate_core(channel, omega_phi)
    return core / channel.triple.ground.degeneracy * np.asarray(u_n) / (hbar * channel.omega_a_at(omega_phi))


def energy_density(occupation, omega, volume):
    """Per-mode energy density ``n * hbar * omega / V``."""
    return np.asarray(occupation) * get_constants().hbar * np.asarray(omega) / volume


def einstein_A(channel: DecayChannel):
    return 1.0 / channel.t_sp


def _b_like(degeneracy, omega, nu, t_sp):
    const = get_constants()
    return const.c**3 / (4 * math.pi * degeneracy * const.hbar * omega * nu**2 * t_sp)


def einstein_B_em(channel: DecayChannel):
    return _b_like(channel.triple.boson.degeneracy, channel.omega_phi0, channel.nu_phi0, channel.t_sp)


def einstein_B_abs(channel: DecayChannel):
    t = channel.triple
    return t.excited.degeneracy / t.ground.degeneracy * einstein_B_em(channel)


def coefficient_C(channel: DecayChannel):
    """Coefficient of decay stimulated by the ground-state matter wave."""
    return _b_like(channel.triple.ground.degeneracy, channel.omega_a0, channel.nu_a0, channel.t_sp)


def einstein_A_over_B(channel: DecayChannel):
    """Closed form ``4 pi d hbar omega nu^2 / c^3`` (``8 pi nu^2 hbar omega / c^3`` for photons)."""
    const = get_constants()
    d = channel.triple.boson.degeneracy
    return 4 * math.pi * d * const.hbar * channel.omega_phi0 * channel.nu_phi0**2 / const.c**3


def log_forgotten_to_stimulated_ratio(channel: DecayChannel, env: ThermalEnvironment, omega_phi=None):
    """``ln(W_f / W_em)`` with both modes at thermal occupation.

    Computed in log space, since heavy-atom occupations underflow.
    """
    omega_phi = channel.line.center if omega_phi is None else omega_phi
    t = channel.triple
    kT = env.kT
    x_a = (t.ground.rest_energy + float(channel.ground_kinetic_at(omega_phi))) / kT
    log_na = log_occupation_from_reduced(x_a - env.chemical_potential / kT)
    log_nphi = log_bose_occupation(omega_phi, env)
    return math.log(t.boson.degeneracy / t.ground.degeneracy) + log_na - log_nphi


# -- broad-band reconstruction -------------------------------------------


@dataclass(frozen=True)
class BroadbandResult:
    B_em: float
    B_abs: float
    C: float
    B_em_closed: float
    B_abs_closed: float
    C_closed: float
    grid_spacing: float
    comb_volume: float
    n_lines: int

    def signed_errors(self):
        """Signed relative errors ``(B_em, B_abs, C)``."""
        return (
            self.B_em / self.B_em_closed - 1,
            self.B_abs / self.B_abs_closed - 1,
            self.C / self.C_closed - 1,
        )

    @property
    def rel_err_B_em(self):
        return abs(self.signed_errors()[0])

    @property
    def rel_err_B_abs(self):
        return abs(self.signed_errors()[1])

    @property
    def rel_err_C(self):
        return abs(self.signed_errors()[2])

    @property
    def max_rel_err(self):
        return max(self.rel_err_B_em, self.rel_err_B_abs, self.rel_err_C)


def broadband_reconstruction(
    channel: DecayChannel,
    boson_occupation: Callable | None = None,
    ground_occupation: Callable | None = None,
    normalization="continuum",
) -> BroadbandResult:
    """Rebuild B_em, B_abs and C by summing W's over a comb of boson lines.

    The comb spacing is the line's ``grid_spacing``, and the comb is read as
    the boson modes of a cavity whose volume puts exactly one resonance in
    each spacing. ``boson_occupation(omega)`` gives the occupation per boson
    mode (default: thermal at the cavity temperature) and
    ``ground_occupation(kinetic_energy)`` the occupation per ground mode
    (default: ``exp(-E_k / k_B T)``, a dilute thermal gas).
    """
    const = get_constants()
    t = channel.triple
    env = ThermalEnvironment(channel.cavity.temperature)
    kT = env.kT
    if boson_occupation is None:
        boson_occupation = lambda w: bose_occupation(w, env)  # noqa: E731
    if ground_occupation is None:
        ground_occupation = lambda e: np.exp(-np.asarray(e) / kT)  # noqa: E731

    line = channel.line
    dw = line.grid_spacing
    omega_l = line.center + line.offsets
    _check_energy(channel, omega_l)
    comb_volume = math.pi * const.c**3 / (channel.omega_phi0 * channel.nu_phi0 * dw)

    n_phi = boson_occupation(omega_l)
    kin_l = channel.ground_kinetic_at(omega_l)
    omega_a_l = channel.omega_a_at(omega_l)
    n_a = ground_occupation(kin_l)

    core = _rate_core(channel, omega_l, normalization)
    d_phi, d_a = t.boson.degeneracy, t.ground.degeneracy
    u_k = energy_density(n_phi, omega_l, comb_volume)
    u_n = energy_density(n_a, omega_a_l, comb_volume)
    w_em_l = core / d_phi * u_k / (const.hbar * omega_l)
    w_abs_l = t.excited.degeneracy / d_a * w_em_l
    w_f_l = core / d_a * u_n / (const.hbar * omega_a_l)

    rho_phi0 = (
        d_phi * 4 * math.pi * channel.nu_phi0**2 / const.c**3
        * const.hbar * channel.omega_phi0 * float(boson_occupation(np.array(channel.omega_phi0)))
    )
    rho_a0 = (
        d_a * 4 * math.pi * channel.nu_a0**2 / const.c**3
        * const.hbar * channel.omega_a0 * float(ground_occupation(np.array(channel.ground_kinetic_energy)))
    )
    return BroadbandResult(
        B_em=float(np.sum(d_phi * w_em_l)) / rho_phi0,
        B_abs=float(np.sum(d_phi * w_abs_l)) / rho_phi0,
        C=float(np.sum(d_a * w_f_l)) / rho_a0,
        B_em_closed=einstein_B_em(channel),
        B_abs_closed=einstein_B_abs(channel),
        C_closed=coefficient_C(channel),
        grid_spacing=dw,
        comb_volume=comb_volume,
        n_lines=len(omega_l),
    )


def convergence_order(errors, ratio=2.0):
    """Observed order of the step-dependent part of an error sequence.

    ``errors`` are signed errors at steps ``h, h/ratio, h/ratio^2``. A
    step-independent bias cancels in the successive differences.
    """
    e1, e2, e3 = errors
    d1, d2 = e1 - e2, e2 - e3
    if d2 == 0:
        return math.inf
    return math.log(abs(d1 / d2)) / math.log(ratio)


# grid over which the forgotten process is checked against stimulated emission
FORGOTTEN_CHECK_GRID = {
    "ground_rest_energy_ev": (1e6, 1e9, 1e11),
    "transition_energy_ev": (1.0, 10.0, 100.0),
    "temperature_k": (1.0, 300.0, 6000.0, 1e4),
}


def forgotten_ratio_scan(grid=None, t_sp=1e-8, side=0.01, degeneracy=2):
    """``log10(W_f / W_em)`` at thermal occupations over a parameter grid.

    Returns a structured array with one row per (rest energy, transition
    energy, temperature) point, line centred, ground kinetic energy
    ``1.5 k_B T``.
    """
    grid = FORGOTTEN_CHECK_GRID if grid is None else grid
    ev = ELECTRON_VOLT
    rows = []
    for m_ev in grid["ground_rest_energy_ev"]:
        ground = Species("ground", m_ev * ev, degeneracy)
        for e_ev in grid["transition_energy_ev"]:
            triple = SpeciesTriple.build(ground, photon(), e_ev * ev, degeneracy)
            center = triple.transition_energy / get_constants().hbar
            for temp in grid["temperature_k"]:
                line = LineShape.natural(center, t_sp)
                channel = DecayChannel(triple, t_sp, line, CavitySpec.cube(side, temp))
                log_r = log_forgotten_to_stimulated_ratio(channel, ThermalEnvironment(temp))
                rows.append((m_ev, e_ev, temp, log_r / math.log(10)))
    dtype = [("ground_rest_energy_ev", float), ("transition_energy_ev", float),
             ("temperature_k", float), ("log10_ratio", float)]
    return np.array(rows, dtype=dtype)
