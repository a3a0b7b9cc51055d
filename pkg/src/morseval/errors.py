"""Exception hierarchy shared by every module.

Each error carries a ``stage`` label and an optional ``witness`` (a point or
small mapping) so the command line can report where a check failed.
"""


class MorsevalError(Exception):
    """Base class. ``stage`` names the step that failed."""

    stage = "morseval"

    def __init__(self, message, *, stage=None, witness=None):
        super().__init__(message)
        self.message = message
        if stage is not None:
            self.stage = stage
        self.witness = witness

    def to_dict(self):
        return {"error": self.message, "stage": self.stage, "witness": self.witness}


class ParseError(MorsevalError):
    """Malformed expression. ``offset`` is a byte offset into the UTF-8 source."""

    stage = "parse"

    def __init__(self, message, offset, **kw):
        super().__init__(f"{message} at offset {offset}", **kw)
        self.offset = offset
        if self.witness is None:
            self.witness = {"offset": offset}


class UnknownIdentifierError(ParseError):
    pass


class ArityError(ParseError):
    pass


class DomainError(MorsevalError):
    """Evaluation left the natural domain (log of x <= 0, sqrt of x < 0, 1/0)."""

    stage = "eval"


class PreconditionError(MorsevalError):
    """An input violates a hypothesis of the requested construction."""

    stage = "precondition"


class CertificationError(MorsevalError):
    """A numerical verification did not meet its tolerance."""

    stage = "certify"
