"""Exception types raised across the registration toolkit."""


class RegistrationError(Exception):
    """Base class for all toolkit errors."""


class DivergedIncrement(RegistrationError):
    """A pose increment whose rotation magnitude reached pi or is non-finite."""


class ParseError(RegistrationError):
    """Malformed point-cloud file."""


class EmptyCloud(RegistrationError):
    """An operation received a cloud with zero points."""


class TooFewPoints(RegistrationError):
    """Cloud smaller than the requested neighbourhood size."""


class NoCorrespondences(RegistrationError):
    """No source point found a valid target neighbour within the search radius."""


class NotSymmetric(RegistrationError):
    """Matrix expected to be symmetric is not."""


class AllZeroSpectrum(RegistrationError):
    """Every eigenvalue is non-positive, so the subspace carries no information."""


class NumericalCollapse(RegistrationError):
    """Gram-Schmidt produced a vanishing vector."""


class SingularSystem(RegistrationError):
    """Linear system is numerically singular."""


class InvalidSpec(RegistrationError):
    """Scene or solver configuration with invalid parameters."""
