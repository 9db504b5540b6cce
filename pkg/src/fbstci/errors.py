"""Exception hierarchy shared by all modules."""


class FbstCiError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(FbstCiError):
    """Input file or document does not have the expected structure."""


class ParseError(FbstCiError):
    """A record inside an otherwise well-formed input could not be parsed."""


class DomainError(FbstCiError):
    """Arguments are outside the domain an operation is defined on."""
