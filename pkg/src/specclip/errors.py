"""Exception hierarchy.

Errors split into two families so the CLI can map them onto exit codes:
``DataError`` (bad shapes, bad files, too little data) and ``NumericalError``
(solver breakdowns, divergence, broken conjugate symmetry).
"""


class SpecClipError(Exception):
    """Base class for all package errors."""

    code = "SpecClipError"

    def __init__(self, message=""):
        super().__init__(message)
        self.code = type(self).__name__


class DataError(SpecClipError):
    pass


class NumericalError(SpecClipError):
    pass


class DimensionMismatch(DataError):
    pass


class EmptyData(DataError):
    pass


class RankTooLarge(DataError):
    pass


class TooShort(DataError):
    pass


class ParseError(DataError):
    """Malformed trajectory or model file.

    ``line`` and ``field`` locate the problem when known.
    """

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field


class VersionMismatch(DataError):
    pass


class EigFailure(NumericalError):
    pass


class NonRealResult(NumericalError):
    pass


class PerturbationFailed(NumericalError):
    pass


class NumericalOverflow(NumericalError):
    pass


class NonConjugateSubset(NumericalError):
    pass


class RiccatiNoConverge(NumericalError):
    pass
