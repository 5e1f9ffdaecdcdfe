"""Exception hierarchy shared by all modules."""


class VlasovLabError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(VlasovLabError, ValueError):
    """Invalid grid sizes, unknown model kinds, bad scenario values."""


class ResolutionError(VlasovLabError, ValueError):
    """A norm or derivative was requested beyond what the grid can resolve."""


class DecayError(VlasovLabError):
    """The field does not decay at the velocity cut-off."""


class DomainError(VlasovLabError, ValueError):
    """Argument outside the domain of a map (e.g. |w| >= c for a relativistic inverse)."""


class NumericalHorizonError(VlasovLabError):
    """Base for failures that signal the integration time is too long."""


class TruncationEscapeError(NumericalHorizonError):
    """Characteristics moved far enough to leave the certified velocity box."""


class NotADiffeomorphismError(NumericalHorizonError):
    """A sampled map that should be monotone is not."""


class ShockError(NotADiffeomorphismError):
    """Burgers x-characteristics crossed."""


class HorizonError(NumericalHorizonError):
    """Re-gridding of a transported quantity failed."""


class NonConvergenceError(NumericalHorizonError):
    """Picard iteration did not reach its tolerance.

    ``ratios`` holds the contraction ratio of every completed sweep.
    """

    def __init__(self, message, ratios=(), distances=()):
        super().__init__(message)
        self.ratios = list(ratios)
        self.distances = list(distances)


class OutOfValidityError(VlasovLabError, ValueError):
    """Closed-form counterexample evaluated outside its range of validity."""


class ConstructionError(VlasovLabError, ValueError):
    """Initial data violates the support geometry a construction relies on."""


class MissingKeyError(ConfigurationError):
    """A required scenario key is absent."""


class UnknownKeyError(ConfigurationError):
    """A scenario section or key is not part of the format."""


class RangeViolationError(ConfigurationError):
    """A scenario value is malformed or outside its allowed range."""
