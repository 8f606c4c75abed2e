"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(ToolkitError):
    """Operand shapes do not conform for the requested operation."""


class NumericDomainError(ToolkitError):
    """An input lies outside the mathematical domain of an operation."""


class ContractError(ToolkitError):
    """A caller violated a documented precondition."""


class LabelError(ToolkitError):
    """A class label is out of range or missing where required."""


class ConfigError(ToolkitError):
    """A configuration value or file is invalid."""


class EstimationError(ToolkitError):
    """An estimator has no usable data to work with."""


class TrainingError(ToolkitError):
    """Training hit a non-recoverable numeric failure.

    Carries the metric records emitted before the abort so callers can
    persist a truncated log.
    """

    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = list(records) if records is not None else []


class DataFormatError(ToolkitError):
    """A dataset file failed to parse; message names the offending line."""


class ValidationError(ToolkitError):
    """Parsed data violates a semantic constraint."""
