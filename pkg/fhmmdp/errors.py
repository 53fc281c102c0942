r"""Exception hierarchy. Every error raised deliberately by the package is a
`FhmmDpError`, which is itself a `ValueError` so that callers catching the
usual bad-input exception keep working."""


class FhmmDpError(ValueError):
    pass


class ParseError(FhmmDpError):
    def __init__(self, message, line=None):
        if line is not None:
            message = "line {}: {}".format(line, message)
        super().__init__(message)
        self.line = line


class EmptySeriesError(FhmmDpError):
    pass


class ValidationError(FhmmDpError):
    pass


class DegenerateClusterError(FhmmDpError):
    pass


class TrainingError(FhmmDpError):
    def __init__(self, message, appliance=None, state=None):
        super().__init__(message)
        self.appliance = appliance
        self.state = state


class CapacityError(FhmmDpError):
    pass


class AlignmentError(FhmmDpError):
    pass


class ReaggregationError(FhmmDpError):
    def __init__(self, message, appliance=None, state=None):
        super().__init__(message)
        self.appliance = appliance
        self.state = state


class ConfigError(FhmmDpError):
    pass


class SweepCellError(FhmmDpError):
    def __init__(self, cell, cause):
        mechanism, epsilon, seed = cell
        super().__init__("Sweep cell (mechanism={}, epsilon={}, seed={}) failed: {}".format(
            mechanism, epsilon, seed, cause))
        self.cell = cell
