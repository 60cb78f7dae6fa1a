"""
Run configuration.

A run config is a single JSON document (YAML is accepted as well, since the
loader is yaml.safe_load). Every section is strict: unknown keys are
validation errors listing the offending dotted keys.
"""

import logging
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator

from .domain import PeriodicGrid, TimeGrid
from .errors import ConfigValidationError
from .hamiltonian import HamiltonianModel, Profile, create_hamiltonian, parse_profile

logger = logging.getLogger(__name__)


def _check_expression(value: str | float) -> str | float:
    if isinstance(value, str) and value.strip().startswith("table:"):
        return value
    parse_profile(value)
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Section):
    kind: Literal["quadratic_family", "custom_convex"] = "quadratic_family"
    kinetic_coefficient: float = Field(1.0, gt=0)
    u_coupling: float = 0.0
    potential: str | float = "0"
    shift: float = 0.0
    p_max: float = Field(20.0, gt=0)

    @field_validator("potential")
    @classmethod
    def _check_potential(cls, value):
        return _check_expression(value)


class GridSection(_Section):
    n: int = Field(200, ge=2)
    length: float = Field(1.0, gt=0)


class TimeSection(_Section):
    dt: float = Field(1e-3, gt=0)
    T: float = Field(1.0, ge=0)


class PicardSection(_Section):
    tol: float = Field(1e-10, gt=0)
    max_iter: int = Field(60, ge=1)
    init_offset: float = 0.0


class SchemeSection(_Section):
    window_radius: int | None = Field(None, ge=0)
    u_rule: Literal["explicit", "midpoint"] = "explicit"
    picard: PicardSection = Field(default_factory=PicardSection)


class InitialDataSection(_Section):
    phi: str | float = "0"

    @field_validator("phi")
    @classmethod
    def _check_phi(cls, value):
        return _check_expression(value)


class FundamentalSection(_Section):
    x0: int = Field(0, ge=0)
    u0: float = 0.0


class CharacteristicsSection(_Section):
    x0: float = 0.0
    u0: float = 0.0
    p0: float = 0.0
    t: float = Field(1.0, gt=0)
    n_steps: int = Field(1000, ge=1)


class ShootSection(_Section):
    p_max: float = Field(10.0, gt=0)
    n_samples: int = Field(512, ge=64)
    refine_iters: int = Field(60, ge=0)
    eps_hit: float = Field(1e-10, gt=0)
    m_max: int = Field(3, ge=0)
    dt_ode_max: float = Field(1e-2, gt=0)
    targets: list[int] = Field(default_factory=lambda: [0])


class CriticalSection(_Section):
    c_lo: float = 0.0
    c_hi: float = 2.0
    c_values: list[float] = Field(default_factory=list)
    horizon: float = Field(50.0, gt=0)
    dt: float | None = Field(None, gt=0)
    max_bisect: int = Field(12, ge=0)
    drift_tol: float = Field(1e-3, gt=0)
    k_guard: float = Field(1e6, gt=0)
    probe_levels: list[float] = Field(default_factory=list)


class LongtimeSection(_Section):
    horizon: float = Field(50.0, gt=0)
    window: float = Field(10.0, gt=0)
    dt: float | None = Field(None, gt=0)
    stationary_tol: float = Field(1e-6, gt=0)
    max_steps: int = Field(200_000, ge=1)
    aubry_tol: float = Field(1e-2, gt=0)
    x_node: int = Field(0, ge=0)
    u_value: float = 0.0
    drift_gate: float = Field(1e-2, gt=0)


class OracleSection(_Section):
    n_coarse: int = Field(8, ge=2, le=12)
    k_steps: int = Field(4, ge=1, le=6)
    dt: float = Field(1e-2, gt=0)
    n_fine_factor: int = Field(10, ge=10)
    hopf_lax_t: float = Field(0.5, gt=0)


class OutputSection(_Section):
    directory: str = "out"
    formats: list[Literal["csv", "json"]] = Field(default_factory=lambda: ["csv", "json"])
    slice_stride: int = Field(1, ge=1)


class RunConfig(_Section):
    """Full run configuration; see config/config.md for every key."""

    model: ModelSection = Field(default_factory=ModelSection)
    grid: GridSection = Field(default_factory=GridSection)
    time: TimeSection = Field(default_factory=TimeSection)
    scheme: SchemeSection = Field(default_factory=SchemeSection)
    initial_data: InitialDataSection = Field(default_factory=InitialDataSection)
    fundamental: FundamentalSection = Field(default_factory=FundamentalSection)
    characteristics: CharacteristicsSection = Field(default_factory=CharacteristicsSection)
    shoot: ShootSection = Field(default_factory=ShootSection)
    critical: CriticalSection = Field(default_factory=CriticalSection)
    longtime: LongtimeSection = Field(default_factory=LongtimeSection)
    oracle: OracleSection = Field(default_factory=OracleSection)
    output: OutputSection = Field(default_factory=OutputSection)

    _base_dir: Path | None = PrivateAttr(default=None)

    def profile(self, expr: str | float) -> Profile:
        return parse_profile(expr, self.grid.length, self._base_dir)

    def build_model(self, shift: float | None = None) -> HamiltonianModel:
        m = self.model
        return create_hamiltonian(
            m.kind,
            kinetic_coefficient=m.kinetic_coefficient,
            u_coupling=m.u_coupling,
            potential=self.profile(m.potential),
            shift=m.shift if shift is None else shift,
            **({"p_max": m.p_max} if m.kind == "custom_convex" else {}),
        )

    def build_grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.grid.n, self.grid.length)

    def build_tgrid(self, horizon: float | None = None, dt: float | None = None) -> TimeGrid:
        return TimeGrid.from_horizon(self.time.T if horizon is None else horizon, dt or self.time.dt)

    def build_phi(self, expr: str | float | None = None):
        from .propagator import ValueField

        grid = self.build_grid()
        return ValueField.from_function(grid, self.profile(self.initial_data.phi if expr is None else expr))

    def dt_for(self, section: str) -> float:
        """Section-level dt override (critical, longtime) or the global one."""
        override = getattr(getattr(self, section), "dt", None)
        return override or self.time.dt


def _semantic_errors(config: RunConfig) -> list[tuple[str, str]]:
    errors = []
    n = config.grid.n
    r = config.scheme.window_radius
    if r is not None and 2 * r > n:
        errors.append(("scheme.window_radius", f"window_radius {r} exceeds n/2 = {n / 2:g}"))
    if config.fundamental.x0 >= n:
        errors.append(("fundamental.x0", f"node index {config.fundamental.x0} outside [0, {n})"))
    if config.longtime.x_node >= n:
        errors.append(("longtime.x_node", f"node index {config.longtime.x_node} outside [0, {n})"))
    if config.longtime.horizon < 2 * config.longtime.window:
        errors.append(("longtime.window", "longtime horizon must be at least twice the window"))
    if any(not 0 <= k < n for k in config.shoot.targets):
        errors.append(("shoot.targets", f"target nodes must lie in [0, {n})"))
    try:
        lam = config.build_model().lipschitz_constant()
    except (OSError, ValueError) as e:
        errors.append(("model.potential", str(e)))
        return errors
    for key, dt in (("time.dt", config.time.dt), ("critical.dt", config.dt_for("critical")),
                    ("longtime.dt", config.dt_for("longtime"))):
        if lam * dt > 0.5:
            errors.append((key, f"lambda*dt = {lam * dt:g} exceeds 0.5 (lambda={lam:g})"))
    return errors


def validate_config(data: dict[str, Any] | None, base_dir: Path | None = None) -> RunConfig:
    """
    Validate a parsed config document.

    Raises:
        ConfigValidationError: Listing every offending dotted key
    """
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigValidationError([], "config document must be a mapping")
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        keys = [".".join(str(p) for p in err["loc"]) for err in e.errors()]
        messages = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigValidationError(sorted(set(keys)), messages) from e
    config._base_dir = base_dir
    errors = _semantic_errors(config)
    if errors:
        raise ConfigValidationError([k for k, _ in errors], "; ".join(m for _, m in errors))
    return config


def load_config(path: str | Path) -> RunConfig:
    """
    Load and validate a run config file.

    Raises:
        ConfigValidationError: If the file is unreadable, malformed or invalid
    """
    path = Path(path)
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigValidationError([], f"cannot read {path}: {e}") from e
    logger.debug("loaded config %s", path)
    return validate_config(data, path.parent)
