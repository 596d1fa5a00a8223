# Core lab components
# The application orchestrator is imported from .application directly;
# it depends on every numerical module.
from .config import ExperimentConfig, build_config, load_config
from .errors import LabError, StageError
from .logger import setup_logging

__all__ = [
    'ExperimentConfig',
    'build_config',
    'load_config',
    'setup_logging',
    'LabError',
    'StageError',
]
