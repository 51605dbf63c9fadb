import sys

import numpy as np
import pytest

from cavity_kinetics import CavitySpec, DecayChannel, LineShape, Species, SpeciesTriple, get_constants, photon
from cavity_kinetics.constants import ev_to_joule


@pytest.fixture
def gev_atom():
    return Species("atom", ev_to_joule(1e9), 2)


@pytest.fixture
def heavy_triple(gev_atom):
    return SpeciesTriple.build(gev_atom, photon(), ev_to_joule(10.0), 2)


def make_channel(triple, t_sp=1e-8, temperature=6000.0, side=0.01, fwhm_fraction=1e-6,
                 grid_fraction=1e-3, window_widths=20.0, ground_kinetic_energy=None):
    """Channel with the line width set as a fraction of the transition frequency."""
    w0 = triple.transition_energy / get_constants().hbar
    fwhm = fwhm_fraction * w0
    line = LineShape(w0, fwhm, grid_fraction * fwhm, window_widths * fwhm)
    return DecayChannel(triple, t_sp, line, CavitySpec.cube(side, temperature), ground_kinetic_energy)


@pytest.fixture
def heavy_channel(heavy_triple):
    return make_channel(heavy_triple)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
