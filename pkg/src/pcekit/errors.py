"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 configuration, 3 undersampling, 4 ensemble failure, 5 fit failure.
"""


class PCEError(Exception):
    """Base class for all pcekit errors."""

    exit_code = 1


class ConfigError(PCEError):
    exit_code = 2


class StageOrderError(ConfigError):
    """A pipeline stage was invoked before its predecessor produced its artifacts."""

    def __init__(self, missing):
        self.missing = str(missing)
        super().__init__(f"missing artifact {self.missing!r}; run the preceding stage first")


class SchemaValidationError(ConfigError):
    """A JSON document does not match its schema."""

    def __init__(self, source, path, message):
        self.source = str(source)
        self.path = path
        super().__init__(f"{self.source}: invalid at '{path}': {message}")


# polynomials / basis

class DegreeOverflowError(PCEError, ValueError):
    pass


class BasisTooLargeError(PCEError, ValueError):
    def __init__(self, count, cap):
        self.count = count
        self.cap = cap
        super().__init__(f"basis would have {count} terms, cap is {cap}")


class DimensionMismatchError(PCEError, ValueError):
    pass


class ForeignIndexError(PCEError, KeyError):
    pass


# sampling

class SupportError(PCEError, ValueError):
    """A physical value lies outside the support of its distribution."""


# regression

class FitError(PCEError):
    exit_code = 5


class UndersamplingError(FitError, ValueError):
    """Fewer samples than basis terms."""

    exit_code = 3

    def __init__(self, m, terms):
        self.m = m
        self.terms = terms
        super().__init__(
            f"undersampled design: m={m} samples for P+1={terms} basis terms (need m >= {terms})"
        )


class IllConditionedDesignError(FitError):
    def __init__(self, condition, limit):
        self.condition = condition
        self.limit = limit
        super().__init__(f"design matrix condition estimate {condition:.3e} exceeds {limit:.1e}")


class BadResponseError(FitError, ValueError):
    def __init__(self, rows, what="non-finite response"):
        self.rows = list(rows)
        super().__init__(f"{what} in rows {self.rows}")


class UnknownChannelError(PCEError, KeyError):
    def __str__(self):
        return f"unknown channel {self.args[0]!r}"


# analysis

class DegenerateVarianceError(PCEError, ValueError):
    """Sensitivity indices are undefined for a zero-variance channel."""


# harness

class TemplateError(ConfigError):
    pass


class HarnessError(PCEError):
    """Infrastructure failure: the harness itself could not do its job."""

    exit_code = 4


class EnsembleFailedError(HarnessError):
    pass


class AlignmentError(FitError):
    def __init__(self, channel, rows):
        self.channel = channel
        self.rows = list(rows)
        super().__init__(f"channel {channel!r}: time grid mismatch in rows {self.rows}")


class ExclusionError(FitError):
    def __init__(self, rows):
        self.rows = list(rows)
        super().__init__(f"records not ok, exclude them before extraction: rows {self.rows}")
