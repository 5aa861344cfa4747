"""Exception hierarchy shared by every module of the package."""


class CitationImpactError(Exception):
    """Base class for all errors raised by this package."""


class FitError(CitationImpactError):
    """A history could not be fitted."""


class InsufficientData(FitError):
    """Fewer observation times than free parameters."""


class Degenerate(FitError):
    """The history carries no signal (e.g. all counts are zero)."""


class NonConvergence(FitError):
    """No optimizer start converged.

    The best-effort result is attached as ``result`` so callers can still
    inspect it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class UndefinedSigma(CitationImpactError):
    """A z-score was requested where the predictive spread is zero."""


class TooFewPapers(CitationImpactError):
    """A journal cohort is too small to aggregate."""


class EmptySelection(CitationImpactError):
    """A cohort selector matched too few papers."""


class DegenerateSpan(CitationImpactError):
    """A goodness-of-fit statistic needs more than one observation time."""


class ParseError(CitationImpactError):
    """Malformed input file; ``line`` carries the 1-based line number."""

    def __init__(self, message, line=None, path=None):
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.line = line
        self.path = path


class ValidationError(CitationImpactError):
    """Well-formed input that breaks a data invariant."""

    def __init__(self, message, line=None, path=None):
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.line = line
        self.path = path
