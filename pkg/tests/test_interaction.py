import math

import mpmath
import numpy as np
import pytest
from conftest import make_channel
from hypothesis import given, settings
from hypothesis import strategies as st

from cavity_kinetics import (
    DomainError,
    EnergyConservationError,
    Species,
    SpeciesTriple,
    get_constants,
    photon,
)
from cavity_kinetics.constants import ev_to_joule
from cavity_kinetics.interaction import (
    LineShape,
    broadband_reconstruction,
    coefficient_C,
    convergence_order,
    einstein_A,
    einstein_A_over_B,
    einstein_B_abs,
    einstein_B_em,
    energy_density,
    forgotten_ratio_scan,
    line_value,
    micro_rate,
    w_abs,
    w_em,
    w_forgotten,
)
from cavity_kinetics.modes import resonance_count_in_band


TOY_TRIPLE = SpeciesTriple.build(Species("g", ev_to_joule(1e6), 2), photon(), ev_to_joule(2.0), 3)
HEAVY_TRIPLE = SpeciesTriple.build(Species("atom", ev_to_joule(1e9), 2), photon(), ev_to_joule(10.0), 2)


@pytest.fixture
def toy_triple():
    return TOY_TRIPLE


class TestLineShape:
    def make(self, window=20.0):
        return LineShape(1e15, 1e9, 1e6, window * 1e9)

    def test_peak_value(self):
        line = self.make(400.0)
        raw = line_value(line, line.center, normalization="none")
        assert raw == pytest.approx(2 / (math.pi * line.fwhm), rel=1e-14)
        assert abs(line_value(line, line.center) / raw - 1) < 1e-3

    def test_renormalization_shift_is_the_lost_tail(self):
        # a 20-width window drops about 1.6% of the Lorentzian, so the peak moves by that much
        line = self.make(20.0)
        raw = line_value(line, line.center, normalization="none")
        shift = line_value(line, line.center) / raw - 1
        assert shift == pytest.approx(1 / line.continuum_norm - 1, rel=1e-3)
        assert 0.015 < shift < 0.017

    def test_half_maximum(self):
        line = self.make()
        f0 = line_value(line, line.center)
        for s in (-1, 1):
            assert line_value(line, line.center + s * line.fwhm / 2) == pytest.approx(f0 / 2, rel=1e-12)

    @pytest.mark.parametrize("window", [20.0, 400.0])
    def test_grid_sum(self, window):
        line = self.make(window)
        total = line_value(line, line.center + line.offsets).sum() * line.grid_spacing
        assert abs(total - 1) <= 1e-4

    def test_outside_window_is_zero(self):
        line = self.make()
        assert line_value(line, line.center + 1.01 * line.half_window) == 0.0

    def test_narrowness_guards(self):
        with pytest.raises(DomainError):
            LineShape(1e15, 1e9, 1e8, 20e9)
        with pytest.raises(DomainError):
            LineShape(5e10, 1e9, 1e6, 20e9)
        with pytest.raises(DomainError):
            LineShape(1e15, 1e9, 1e6, 0.5e9)

    def test_natural_width(self):
        line = LineShape.natural(1e16, 1e-8)
        assert line.fwhm == pytest.approx(2e8)
        assert line.grid_spacing == pytest.approx(2e5)


class TestMicroRate:
    def test_volume_scaling(self, heavy_triple):
        a = micro_rate(make_channel(heavy_triple, side=0.01), heavy_triple.transition_energy / get_constants().hbar)
        b = micro_rate(make_channel(heavy_triple, side=0.01 * 2 ** (1 / 3)),
                       heavy_triple.transition_energy / get_constants().hbar)
        assert b.alpha == pytest.approx(a.alpha / 2, rel=1e-12)

    def test_all_equal(self, heavy_channel):
        r = micro_rate(heavy_channel, heavy_channel.omega_phi0)
        assert r.alpha == r.beta_abs == r.beta_em == r.gamma
        assert r.balanced

    def test_peak_closed_form(self, heavy_channel):
        ch = heavy_channel
        c = get_constants().c
        f0 = line_value(ch.line, ch.omega_phi0)
        d = ch.triple.boson.degeneracy * ch.triple.ground.degeneracy
        expected = math.pi * c**3 * f0 / (d * ch.omega_phi0 * ch.nu_phi0 * ch.t_sp * ch.volume)
        assert micro_rate(ch, ch.omega_phi0).alpha == pytest.approx(expected, rel=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(-20000, 20000))
    def test_probability_elimination(self, ell):
        # alpha d_phi d_a dN_phi(per grid step) = f * d_omega / t_sp
        ch = make_channel(HEAVY_TRIPLE)
        line = ch.line
        w = line.center + ell * line.grid_spacing
        alpha = micro_rate(ch, w).alpha
        dn = resonance_count_in_band(ch.triple.boson, w, line.grid_spacing, ch.volume)
        lhs = alpha * ch.triple.boson.degeneracy * ch.triple.ground.degeneracy * dn
        rhs = line_value(line, w) * line.grid_spacing / ch.t_sp
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_energy_conservation_failure(self, heavy_triple):
        ch = make_channel(heavy_triple, ground_kinetic_energy=ev_to_joule(1e-13))
        with pytest.raises(EnergyConservationError):
            micro_rate(ch, ch.omega_phi0 + 5 * ch.line.fwhm)

    def test_outside_window(self, heavy_channel):
        with pytest.raises(DomainError):
            micro_rate(heavy_channel, heavy_channel.omega_phi0 + 2 * heavy_channel.line.half_window)


class TestTransitionProbabilities:
    def test_zero_density(self, heavy_channel):
        w = heavy_channel.omega_phi0
        assert w_em(heavy_channel, 0.0, w) == 0.0
        assert w_abs(heavy_channel, 0.0, w) == 0.0
        assert w_forgotten(heavy_channel, 0.0, omega_phi=w) == 0.0

    def test_linearity(self, heavy_channel):
        w = heavy_channel.omega_phi0
        assert w_em(heavy_channel, 2e-3, w) == pytest.approx(2 * w_em(heavy_channel, 1e-3, w), rel=1e-15)
        assert w_forgotten(heavy_channel, 2e-3, omega_phi=w) == pytest.approx(
            2 * w_forgotten(heavy_channel, 1e-3, omega_phi=w), rel=1e-15)

    def test_negative_density(self, heavy_channel):
        with pytest.raises(DomainError):
            w_em(heavy_channel, -1.0, heavy_channel.omega_phi0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.0, 1e6), st.floats(0.0, 1e6), st.integers(-1000, 1000))
    def test_micro_rate_identities(self, n_phi, n_a, ell):
        ch = make_channel(TOY_TRIPLE, temperature=300.0)
        w = ch.omega_phi0 + ell * 10 * ch.line.grid_spacing
        r = micro_rate(ch, w)
        t = ch.triple
        u_k = energy_density(n_phi, w, ch.volume)
        u_n = energy_density(n_a, ch.omega_a_at(w), ch.volume)
        assert w_em(ch, u_k, w) == pytest.approx(t.ground.degeneracy * r.beta_em * n_phi, rel=1e-12)
        assert w_abs(ch, u_k, w) == pytest.approx(t.excited.degeneracy * r.beta_abs * n_phi, rel=1e-12)
        assert w_forgotten(ch, u_n, omega_phi=w) == pytest.approx(t.boson.degeneracy * r.gamma * n_a, rel=1e-12)

    def test_abs_over_em_ratio(self, toy_triple):
        ch = make_channel(toy_triple, temperature=300.0)
        w = ch.omega_phi0
        assert w_abs(ch, 1.0, w) / w_em(ch, 1.0, w) == pytest.approx(3 / 2, rel=1e-15)

    def test_forgotten_by_ground_frequency(self, toy_triple):
        ch = make_channel(toy_triple, temperature=300.0)
        w = ch.omega_phi0 + 7 * ch.line.grid_spacing
        a = w_forgotten(ch, 1.0, omega_phi=w)
        # a float omega_a would lose the kinetic part of a 1 MeV atom
        with mpmath.workdps(40):
            kin = mpmath.mpf(float(ch.ground_kinetic_at(w)))
            omega_a = (mpmath.mpf(ch.triple.ground.rest_energy) + kin) / mpmath.mpf(get_constants().hbar)
            b = w_forgotten(ch, 1.0, omega_a)
        assert b == pytest.approx(a, rel=1e-9)
        with pytest.raises(TypeError):
            w_forgotten(ch, 1.0)

    def test_forgotten_negligible_on_grid(self):
        scan = forgotten_ratio_scan()
        assert len(scan) == 36
        assert np.all(scan["log10_ratio"] < -3)


class TestCoefficients:
    def test_A(self, heavy_triple):
        assert einstein_A(make_channel(heavy_triple, t_sp=1.0, fwhm_fraction=1e-6)) == 1.0
        assert einstein_A(make_channel(heavy_triple, t_sp=16e-9)) == pytest.approx(6.25e7, rel=1e-15)

    def test_einstein_relation(self, toy_triple):
        ch = make_channel(toy_triple)
        const = get_constants()
        nu0 = ch.nu_phi0
        closed = 8 * math.pi * nu0**2 * const.hbar * ch.omega_phi0 / const.c**3
        assert einstein_A(ch) / einstein_B_em(ch) == pytest.approx(closed, rel=1e-12)
        assert einstein_A_over_B(ch) == pytest.approx(closed, rel=1e-12)
        assert einstein_B_abs(ch) * 2 == pytest.approx(einstein_B_em(ch) * 3, rel=1e-12)

    def test_equal_degeneracies(self, heavy_channel):
        assert einstein_B_abs(heavy_channel) == pytest.approx(einstein_B_em(heavy_channel), rel=1e-15)

    def test_t_sp_scaling(self, toy_triple):
        a = make_channel(toy_triple, t_sp=1e-8)
        b = make_channel(toy_triple, t_sp=2e-8)
        for fn in (einstein_A, einstein_B_em, einstein_B_abs, coefficient_C):
            assert fn(b) == pytest.approx(fn(a) / 2, rel=1e-12)
            assert fn(a) > 0

    def test_C_over_B_em(self, toy_triple):
        ch = make_channel(toy_triple)
        t = ch.triple
        expected = (t.boson.degeneracy * ch.omega_phi0 * ch.nu_phi0**2) / (
            t.ground.degeneracy * ch.omega_a0 * ch.nu_a0**2)
        assert coefficient_C(ch) / einstein_B_em(ch) == pytest.approx(expected, rel=1e-12)

    def test_C_massless_ground_reduces_to_B_form(self):
        const = get_constants()
        g = Species("a", 0.0, 2)
        triple = SpeciesTriple.build(g, photon(), ev_to_joule(5.0), 2)
        ch = make_channel(triple, ground_kinetic_energy=ev_to_joule(3.0))
        w = ch.omega_a0
        nu = w / (2 * math.pi)
        b_form = const.c**3 / (4 * math.pi * 2 * const.hbar * w * nu**2 * ch.t_sp)
        assert coefficient_C(ch) == pytest.approx(b_form, rel=1e-12)


class TestBroadband:
    def test_reconstruction_within_tolerance(self, heavy_triple):
        r = broadband_reconstruction(make_channel(heavy_triple))
        assert r.max_rel_err <= 1e-3

    def test_error_halves_with_spacing(self, heavy_triple):
        errs = []
        for g in (1e-3, 5e-4, 2.5e-4):
            r = broadband_reconstruction(make_channel(heavy_triple, grid_fraction=g))
            errs.append(r.signed_errors())
        for i in range(3):
            seq = [e[i] for e in errs]
            assert abs(seq[0]) / abs(seq[1]) > 1.98
            assert convergence_order(seq) == pytest.approx(1.0, abs=0.01)

    def test_grid_normalization_variant(self, heavy_triple):
        r = broadband_reconstruction(make_channel(heavy_triple), normalization="grid")
        assert r.max_rel_err <= 1e-3
