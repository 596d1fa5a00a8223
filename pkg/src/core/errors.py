"""
Lab Exceptions
==============

Exception hierarchy shared by the numerical modules, the orchestrator
and the command line.
"""

from typing import List, Optional, Sequence


class LabError(Exception):
    """Base class for every error raised by the lab"""


class InvalidFieldError(LabError):
    """Field samples are not finite"""


class ShapeError(LabError):
    """Fields or trajectories live on incompatible grids or meshes"""


class DomainError(LabError):
    """Argument outside the domain of an operation (e.g. t <= 0)"""


class ParameterError(LabError):
    """Model parameters violate one or more admissibility conditions"""

    def __init__(self, violations: Sequence[str]):
        self.violations: List[str] = list(violations)
        super().__init__("; ".join(self.violations))


class UnsupportedLevelError(LabError):
    """Approximation level outside the implemented range"""


class DivergenceError(LabError):
    """A time integration blew up"""


class InterpolationError(LabError):
    """Requested time lies outside the stored mesh"""


class StabilityError(LabError):
    """Step rejected repeatedly by the L2 drift guard"""


class ContractionError(LabError):
    """Fixed point iteration failed to contract"""

    def __init__(self, message: str, ratio_history: Sequence[float]):
        self.ratio_history: List[float] = list(ratio_history)
        super().__init__(f"{message} (ratios: {', '.join(f'{r:.3g}' for r in self.ratio_history)})")


class FitError(LabError):
    """Log-log fit cannot be performed on the given series"""


class RangeError(LabError):
    """Time outside the range an operation is valid for"""


class HypothesisError(LabError):
    """Exponent parameters violate the hypotheses of an inequality"""

    def __init__(self, condition: str):
        self.condition = condition
        super().__init__(f"hypothesis violated: {condition}")


class ConfigError(LabError):
    """Configuration cannot be used"""


class ConfigParseError(ConfigError):
    """Configuration file is not valid YAML/JSON"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ConfigValidationError(ConfigError):
    """Configuration parsed but violates model preconditions"""

    def __init__(self, violations: Sequence[str]):
        self.violations: List[str] = list(violations)
        super().__init__("invalid configuration: " + "; ".join(self.violations))


class StageError(LabError):
    """A pipeline stage failed"""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


class MissingArtifactsError(LabError):
    """A run directory lacks required artifacts"""

    def __init__(self, missing: Sequence[str]):
        self.missing: List[str] = list(missing)
        super().__init__("missing artifacts: " + ", ".join(self.missing))


__all__ = [
    'LabError', 'InvalidFieldError', 'ShapeError', 'DomainError', 'ParameterError',
    'UnsupportedLevelError', 'DivergenceError', 'InterpolationError', 'StabilityError',
    'ContractionError', 'FitError', 'RangeError', 'HypothesisError', 'ConfigError',
    'ConfigParseError', 'ConfigValidationError', 'StageError', 'MissingArtifactsError',
]
