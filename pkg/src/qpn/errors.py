"""Exception hierarchy for the qpn package.

Every error raised on purpose by the library derives from QpnError, so
callers (and the CLI) can distinguish domain failures from genuine bugs.
"""


class QpnError(Exception):
    """Base class for all qpn errors."""


# ---------------------------------------------------------------- linear algebra


class DimensionMismatch(QpnError):
    """Operands have incompatible dimensions."""


class DimensionCapExceeded(QpnError):
    """A tensor space would exceed the configured dimension cap."""


class NotHermitian(QpnError):
    """A matrix expected to be Hermitian is not, beyond tolerance."""


class NotCompletelyPositive(QpnError):
    """A Choi matrix loaded from the outside fails the positivity gate."""


class UnknownFactor(QpnError):
    """A factor id is not present in the given layout."""


class LayoutMismatch(QpnError):
    """Two factor layouts are not permutations of each other."""


# ---------------------------------------------------------------- nets


class UnknownNode(QpnError):
    """A node id does not belong to the net."""


class NotEnabled(QpnError):
    """The transition is not enabled at the given marking."""


class SafetyViolation(QpnError):
    """Firing would put a second token into an already marked place."""


class NotReachable(QpnError):
    """The target marking is not reachable from the source marking."""


class InvalidOccurrenceNet(QpnError):
    """The skeleton violates one of the occurrence-net axioms."""

    def __init__(self, report):
        self.report = report
        super().__init__(str(report))


class InvalidConfiguration(QpnError):
    """The event set is not downward closed or not conflict free."""


class EnumerationCapExceeded(QpnError):
    """A state-space or subset enumeration hit its configured cap."""


# ---------------------------------------------------------------- annotations


class IllTypedAnnotation(QpnError):
    """A local annotation does not match the net's signatures."""


class NotAClique(QpnError):
    """The clique-only fast path was called on a non-clique cluster."""


# ---------------------------------------------------------------- composition


class JoinError(QpnError):
    """A join request violates its structural preconditions."""


class NotCertified(QpnError):
    """An operation requires certified inputs and one of them is not."""


# ---------------------------------------------------------------- documents / CLI


class DocumentError(QpnError):
    """A net or spec document cannot be parsed or fails schema checks."""
