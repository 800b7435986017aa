"""Exception hierarchy shared by all labelmarket modules."""


class LabelMarketError(Exception):
    """Base class for every error raised by this package."""


# regression / linear algebra
class EmptyDesign(LabelMarketError):
    pass


class DimensionMismatch(LabelMarketError, ValueError):
    pass


class SingularDesign(LabelMarketError):
    """Information matrix is not invertible even after the ridge fallback."""


# selection
class EmptyPool(LabelMarketError):
    pass


class DegenerateCommittee(LabelMarketError):
    """No bootstrap committee member could be trained."""


# market
class ConfigError(LabelMarketError, ValueError):
    pass


class ConfigConflict(ConfigError):
    pass


class UntrainableInitialSet(LabelMarketError):
    pass


class PropertyViolation(LabelMarketError):
    def __init__(self, prop, step=None, detail=""):
        self.prop = prop
        self.step = step
        where = f" at step {step}" if step is not None else ""
        self.detail = detail
        super().__init__(f"{prop} violated{where}: {detail}".rstrip(": "))

    def __reduce__(self):
        return (type(self), (self.prop, self.step, self.detail))


# data
class DataError(LabelMarketError):
    pass


class SchemaMismatch(DataError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__("missing columns: " + ", ".join(self.missing))

    def __reduce__(self):
        return (type(self), (self.missing,))


class ParseError(DataError):
    def __init__(self, message, row=None):
        self.row = row
        self.message = message
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(prefix + message)

    def __reduce__(self):
        return (type(self), (self.message, self.row))


class SeriesTooShort(DataError):
    pass


class SizeConflict(DataError):
    pass


class DegenerateRange(DataError):
    pass


# statistics
class EmptyInput(LabelMarketError, ValueError):
    pass


class LengthMismatch(LabelMarketError, ValueError):
    pass


class ReplicationError(LabelMarketError):
    """Wraps a failure inside one Monte Carlo replication."""

    def __init__(self, replication, cause):
        self.replication = replication
        self.cause = cause
        super().__init__(f"replication {replication}: {cause!r}")

    def __reduce__(self):
        return (type(self), (self.replication, self.cause))
