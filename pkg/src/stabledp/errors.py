"""Exception and warning types shared across the package."""


class StableDpError(Exception):
    """Base class for all errors raised by this package."""


class CycleDetected(StableDpError):
    """The input edge relation contains a directed cycle."""


class BadIndex(StableDpError):
    """A vertex or element index is out of range."""


class VertexNotInUniverse(StableDpError):
    """The queried vertex does not belong to the given sub-universe."""


class EmptySupport(StableDpError):
    """A sampling operation was given an empty score table."""


class MalformedInterval(StableDpError):
    """An interval with l >= r was supplied where a nonempty one is required."""


class InstanceTooLarge(StableDpError):
    """The instance exceeds the configured desk-scale size cap."""


class SupportTooLarge(StableDpError):
    """A distribution support exceeds the exact-transport size cap."""


class DuplicateIndex(StableDpError):
    """A pair set reuses a sequence index."""


class IncomparableTriples(StableDpError):
    """Two triple lists differ first at a pair of order-incomparable triples."""


class InfeasibleChain(StableDpError):
    """A chain decoded to an infeasible folding (indicates a construction bug)."""


class UnknownFamily(StableDpError):
    """The instance generator family name is not recognized."""


class ParseError(StableDpError):
    """An instance or report file failed to parse or validate."""


class CentralVertexViolation(StableDpError):
    """A recursion step saw max r(v) over the pivot pool differ from opt(U)."""


class DegenerateDeletion(UserWarning):
    """Deleting a potentially-missing set emptied the whole vertex set."""
