"""Domain errors raised by the library.

Every error carries a stable ``kind`` string (the class name) which the CLI
prints as ``error: <kind>: <message>`` on stderr before exiting with code 1.
Foreign-language wrappers key their exception mapping off that name.
"""


class XtokError(Exception):
    """Base class for all library errors."""

    @property
    def kind(self) -> str:
        return type(self).__name__


# vocab
class MergeOrderViolation(XtokError):
    """A merge pair references a not-yet-defined token or EOS."""


class DuplicateToken(XtokError):
    """Two token ids decode to identical byte sequences."""


class BoundOutOfRange(XtokError):
    """Requested vocabulary bound lies outside [0, M]."""


class ParseError(XtokError):
    """Malformed vocab, backend, replay, or soft-label file."""


# codec
class LevelMismatch(XtokError):
    """An encoding's level does not match the operation's expected level."""


class UnknownSymbol(XtokError):
    """Input bytes contain a position matching no alphabet symbol."""


class InvalidEncoding(XtokError):
    """Token ids are malformed for the given vocabulary view (out of range)."""


# lm
class BackendUnavailable(XtokError):
    """The external logits stream is closed or has no answer for a prefix."""


class PrefixContainsEos(XtokError):
    """next_dist was queried with a prefix containing EOS."""


# cover / convert-down
class InvalidBasis(XtokError):
    """Cover search requires a valid (canonical) basis encoding."""


class DeadEnd(XtokError):
    """All next-sub-token mass is zero; cannot continue sampling."""


class ZeroProbabilityChoice(XtokError):
    """advance() was given a sub-token with zero probability."""


# convert-up
class BudgetExceeded(XtokError):
    """The conversion recursion exceeded its node-count cap."""


class NegativeResult(XtokError):
    """A probability subtraction went negative beyond tolerance."""


class MaxRejections(XtokError):
    """Rejection sampling hit its attempt cap without an accept."""


# losses
class ShapeMismatch(XtokError):
    """Teacher/student arrays disagree in shape."""


class ComplementUnderflow(XtokError):
    """Student probability mass over the queried bins reaches 1."""


# oracle
class BudgetIntractable(XtokError):
    """The enumeration budget is too large to run."""
