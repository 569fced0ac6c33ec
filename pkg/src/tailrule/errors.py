"""Exception types shared across the package."""


class SchemaError(ValueError):
    """A config or CSV header does not match the declared schema."""


class ParseError(ValueError):
    """A cell or field could not be parsed; the message names row and column."""


class ValidationError(ValueError):
    """Parsed data violates a semantic requirement (overlap, finiteness, coding)."""


class DegenerateMatchError(ValueError):
    """No observation's action matches the proposed rule, so importance
    weights are all zero and the requested statistic is undefined."""


class UnsupportedMetricError(ValueError):
    """The requested metric is not defined for this scenario."""
