"""Physical constants and unit conversions.

The active constant set lives in a context variable so that an override
(e.g. from a run configuration) reaches every formula without being
threaded through each call::

    with using_constants(PhysicalConstants(c=1.0, hbar=1.0, k_B=1.0)):
        ...
"""
from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass

from scipy import constants as _codata

from .errors import DomainError

ELECTRON_VOLT = _codata.electron_volt  # J per eV


@dataclass(frozen=True)
class PhysicalConstants:
    c: float = _codata.c
    hbar: float = _codata.hbar
    k_B: float = _codata.k

    def __post_init__(self):
        for name in ("c", "hbar", "k_B"):
            value = getattr(self, name)
            if not value > 0:
                raise DomainError(f"physical constant {name} must be > 0, got {value!r}")


CODATA = PhysicalConstants()

_active: contextvars.ContextVar[PhysicalConstants] = contextvars.ContextVar(
    "cavity_kinetics_constants", default=CODATA
)


def get_constants() -> PhysicalConstants:
    return _active.get()


@contextlib.contextmanager
def using_constants(constants: PhysicalConstants):
    token = _active.set(constants)
    try:
        yield constants
    finally:
        _active.reset(token)


def ev_to_joule(value_ev):
    return value_ev * ELECTRON_VOLT


def joule_to_ev(value_j):
    return value_j / ELECTRON_VOLT
