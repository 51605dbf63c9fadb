"""Exception hierarchy shared by all layers."""


class CavityKineticsError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CavityKineticsError, ValueError):
    """An argument lies outside the domain of a physical formula."""


class BelowRestEnergyError(DomainError):
    """A quantum energy is smaller than the species' rest energy."""


class SingularityError(DomainError):
    """A formula is evaluated exactly at a singular point."""


class DivergenceError(DomainError):
    """A Bose-Einstein occupation would diverge (hbar*omega <= mu)."""


class EnergyConservationError(DomainError):
    """No mode pair conserves energy for the requested channel."""


class SizeGuardError(CavityKineticsError):
    """A computation would exceed its configured memory/size guard."""


class StabilityGuardError(CavityKineticsError):
    """The requested integrator step violates the stability guard."""


class NegativeOccupationError(CavityKineticsError):
    """An occupation went negative beyond the tolerated round-off."""


class ConfigError(CavityKineticsError, ValueError):
    """A run configuration is invalid. ``path`` names the offending field."""

    def __init__(self, message, path=()):
        self.path = tuple(path)
        where = ".".join(str(p) for p in self.path)
        super().__init__(f"{where}: {message}" if where else message)
