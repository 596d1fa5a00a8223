"""
Configuration Management
========================

Experiment configuration with environment variables, file-based
settings and keyword overrides, validated against the model's
admissibility conditions before any compute.
"""

import os
import json
import yaml
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from dotenv import load_dotenv

from .errors import ConfigError, ConfigParseError, ConfigValidationError, ParameterError


class ModelSection(BaseModel):
    """Hartree model parameters"""
    model_config = ConfigDict(extra="forbid")

    gamma: float = Field(default=0.45)
    kappa: float = Field(default=1.0)
    rho: float = Field(default=0.95)
    n: int = Field(default=2)
    plus_epsilon: float = Field(default=0.05)
    kernel: str = Field(default="free_space")
    allow_unvalidated_gamma: bool = Field(default=False)
    level: int = Field(default=1)


class GridSection(BaseModel):
    """Periodic grid"""
    model_config = ConfigDict(extra="forbid")

    points_per_dim: int = Field(default=128)
    box_length: float = Field(default=20.0)


class MeshSection(BaseModel):
    """Graded time mesh of the asymptotic profile (T = 1)"""
    model_config = ConfigDict(extra="forbid")

    K: int = Field(default=512)
    power: Optional[float] = Field(default=None)
    power_cap: float = Field(default=6.0)


class SolverSection(BaseModel):
    """Linearized and fixed point solver settings"""
    model_config = ConfigDict(extra="forbid")

    T: Optional[float] = Field(default=None)
    smallness_constant: Optional[float] = Field(default=None)
    contraction_target: float = Field(default=0.25)
    fixed_point_tol: float = Field(default=1e-8)
    max_iterations: int = Field(default=10)
    rho_prime: Optional[float] = Field(default=None)
    drift_tol: float = Field(default=1e-5)
    max_step_halvings: int = Field(default=4)
    implicit_tol: float = Field(default=1e-13)
    implicit_max_iter: int = Field(default=60)

    @field_validator("T")
    @classmethod
    def _final_time(cls, value):
        if value is not None and not (0.0 < value <= 1.0):
            raise ValueError(f"must satisfy 0 < T <= 1 (got {value})")
        return value

    @field_validator("contraction_target")
    @classmethod
    def _contraction_target(cls, value):
        if not 0.0 < value < 0.5:
            raise ValueError(f"must satisfy 0 < contraction_target < 1/2 (got {value})")
        return value


class InitialDataSection(BaseModel):
    """Asymptotic state v_0"""
    model_config = ConfigDict(extra="forbid")

    family: str = Field(default="gaussian")
    a0: float = Field(default=0.5)
    width: float = Field(default=1.0)
    center: Optional[List[float]] = Field(default=None)
    momentum: Optional[List[float]] = Field(default_factory=lambda: [0.5, 0.0])
    seed: int = Field(default=0)
    k_band: float = Field(default=2.0)
    envelope_width: float = Field(default=2.0)
    path: Optional[str] = Field(default=None)

    @field_validator("family")
    @classmethod
    def _family(cls, value):
        if value not in ("gaussian", "band_limited_random", "file"):
            raise ValueError(f"must be gaussian, band_limited_random or file (got {value!r})")
        return value


class ChecksSection(BaseModel):
    """Bound checks and their criteria"""
    model_config = ConfigDict(extra="forbid")

    enabled: List[str] = Field(default_factory=list)
    band_limit: float = Field(default=10.0)
    slope_tol: float = Field(default=0.05)
    fit_window: Tuple[float, float] = Field(default=(1e-3, 1e-1))
    anchored_fit_window: Tuple[float, float] = Field(default=(1e-4, 1e-2))
    sigma_prime: float = Field(default=0.5)
    calibration_slack: float = Field(default=2.0)
    inequality_trials: int = Field(default=100)
    inequality_points: List[int] = Field(default_factory=lambda: [32, 64, 128])

    @field_validator("fit_window", "anchored_fit_window")
    @classmethod
    def _window(cls, value):
        lo, hi = value
        if not (0.0 < lo < hi):
            raise ValueError(f"must satisfy 0 < lo < hi (got {value})")
        return value


class CalibrationSection(BaseModel):
    """Calibrated constants with provenance"""
    model_config = ConfigDict(extra="forbid")

    constants: Dict[str, float] = Field(default_factory=dict)
    provenance: Dict[str, str] = Field(default_factory=dict)


class ExperimentConfig(BaseModel):
    """Complete experiment configuration"""
    model_config = ConfigDict(extra="forbid")

    model: ModelSection = Field(default_factory=ModelSection)
    grid: GridSection = Field(default_factory=GridSection)
    mesh: MeshSection = Field(default_factory=MeshSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    initial_data: InitialDataSection = Field(default_factory=InitialDataSection)
    checks: ChecksSection = Field(default_factory=ChecksSection)
    calibration: CalibrationSection = Field(default_factory=CalibrationSection)
    output_dir: str = Field(default="runs")
    threads: int = Field(default=1)
    debug: bool = Field(default=False)

    def __init__(self, config_path: Optional[str] = None, **kwargs):
        # Load environment variables
        load_dotenv()

        # Load from file if provided
        config_data: Dict[str, Any] = {}
        if config_path:
            config_data = self._load_config_file(config_path)

        # Override with environment variables
        config_data.update(self._load_from_env())

        # Override with kwargs
        config_data.update(kwargs)

        super().__init__(**config_data)

    @staticmethod
    def _load_config_file(config_path: str) -> Dict[str, Any]:
        """Load configuration from file"""
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")

        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() == '.json':
            try:
                data = json.loads(text) if text.strip() else {}
            except json.JSONDecodeError as e:
                raise ConfigParseError(e.msg, e.lineno) from e
        elif path.suffix.lower() in ['.yml', '.yaml']:
            try:
                data = yaml.safe_load(text) or {}
            except yaml.MarkedYAMLError as e:
                line = e.problem_mark.line + 1 if e.problem_mark is not None else None
                raise ConfigParseError(str(e.problem or e), line) from e
        else:
            raise ConfigParseError(f"Unsupported config file format: {path.suffix}")

        if not isinstance(data, dict):
            raise ConfigParseError("top level of the config must be a mapping")
        return data

    @staticmethod
    def _load_from_env() -> Dict[str, Any]:
        """Load configuration from environment variables"""
        env_config: Dict[str, Any] = {}

        if os.getenv('HARTREE_LAB_OUTPUT_DIR'):
            env_config['output_dir'] = os.getenv('HARTREE_LAB_OUTPUT_DIR')
        if os.getenv('HARTREE_LAB_THREADS'):
            env_config['threads'] = int(os.getenv('HARTREE_LAB_THREADS'))
        if os.getenv('HARTREE_LAB_DEBUG'):
            env_config['debug'] = os.getenv('HARTREE_LAB_DEBUG').lower() in ['true', '1', 'yes']

        return env_config

    @model_validator(mode="after")
    def _check_model(self):
        from ..modules.grid_spectral import GridSpec

        violations = []
        try:
            self.to_model_params()
        except ParameterError as e:
            violations.extend(e.violations)
        try:
            GridSpec(self.model.n, self.grid.points_per_dim, self.grid.box_length)
        except ParameterError as e:
            violations.extend(e.violations)
        if self.model.level not in (0, 1):
            violations.append(f"model.level must be 0 or 1 (got {self.model.level})")
        if self.model.allow_unvalidated_gamma and self.model.level != 0:
            violations.append("allow_unvalidated_gamma requires model.level = 0")
        rho_prime = self.solver.rho_prime
        if rho_prime is not None and not (0.5 < rho_prime < self.model.n / 2.0):
            violations.append(f"rho_prime must satisfy 1/2 < ρ′ < n/2 = {self.model.n / 2.0:g} (got {rho_prime:g})")
        if self.threads < 1:
            violations.append(f"threads must be at least 1 (got {self.threads})")
        if violations:
            raise ValueError("; ".join(violations))
        return self

    def to_model_params(self):
        from ..modules.hartree_core import ModelParams
        section = self.model
        return ModelParams(
            gamma=section.gamma, kappa=section.kappa, rho=section.rho, n=section.n,
            plus_epsilon=section.plus_epsilon, kernel=section.kernel,
            allow_unvalidated_gamma=section.allow_unvalidated_gamma,
        )

    def to_grid(self):
        from ..modules.grid_spectral import GridSpec
        return GridSpec(self.model.n, self.grid.points_per_dim, self.grid.box_length)

    def to_mesh(self):
        from ..modules.time_mesh import GradedMesh
        power = self.mesh.power
        if power is None:
            power = GradedMesh.default_power(self.to_model_params().exponents.lambda_(1), self.mesh.power_cap)
        return GradedMesh(1.0, self.mesh.K, power)

    @property
    def rho_prime(self) -> float:
        return self.solver.rho_prime if self.solver.rho_prime is not None else self.model.rho

    def with_overrides(self, overrides: Dict[str, Any]) -> "ExperimentConfig":
        """Copy with dotted-key overrides, e.g. {"initial_data.a0": 0.25}"""
        data = self.model_dump(mode="json")
        for dotted, value in overrides.items():
            target = data
            *parents, leaf = dotted.split(".")
            for key in parents:
                if key not in target or not isinstance(target[key], dict):
                    raise ConfigValidationError([f"unknown config key: {dotted}"])
                target = target[key]
            target[leaf] = value
        return build_config(data)

    def save_to_file(self, config_path: str):
        """Save configuration to file"""
        path = Path(config_path)
        config_dict = self.model_dump(mode="json")

        if path.suffix.lower() == '.json':
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(config_dict, f, indent=2)
        elif path.suffix.lower() in ['.yml', '.yaml']:
            with open(path, 'w', encoding='utf-8') as f:
                yaml.safe_dump(config_dict, f, default_flow_style=False, sort_keys=False)
        else:
            raise ConfigError(f"Unsupported config file format: {path.suffix}")


def _violations(error: ValidationError) -> List[str]:
    messages = []
    for item in error.errors():
        message = item.get("msg", "")
        if message.startswith("Value error, "):
            message = message[len("Value error, "):]
        location = ".".join(str(part) for part in item.get("loc", ()))
        if location:
            messages.append(f"{location}: {message}")
        else:
            messages.extend(message.split("; "))
    return messages


def build_config(data: Optional[Dict[str, Any]] = None, config_path: Optional[str] = None) -> ExperimentConfig:
    """Construct a config, converting validation failures into ConfigValidationError"""
    try:
        return ExperimentConfig(config_path, **(data or {}))
    except ValidationError as e:
        raise ConfigValidationError(_violations(e)) from e


def load_config(path: str, **overrides: Any) -> ExperimentConfig:
    """Load and validate an experiment config from YAML or JSON"""
    return build_config(overrides, config_path=str(path))


__all__ = [
    'ModelSection', 'GridSection', 'MeshSection', 'SolverSection', 'InitialDataSection',
    'ChecksSection', 'CalibrationSection', 'ExperimentConfig', 'build_config', 'load_config',
]
