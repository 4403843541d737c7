"""Strict JSON configuration for the command line front end."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .grid import Ball, Grid, GridFn, Interval, make_ball_grid, make_interval_grid

__all__ = [
    "Config",
    "ConfigParseError",
    "ConfigSchemaError",
    "ConfigRangeError",
    "parse_config",
    "parse_config_text",
    "serialize_config",
    "config_hash",
    "provenance_json",
    "build_grid",
    "resolve_field",
]


class ConfigParseError(ConfigError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"{msg} (line {line}, column {column})")
        self.line = line
        self.column = column


class ConfigSchemaError(ConfigError):
    def __init__(self, msg: str, key: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


class ConfigRangeError(ConfigSchemaError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class IntervalSpec(_Strict):
    kind: Literal["interval"]
    a: float
    b: float

    @model_validator(mode="after")
    def _ordered(self):
        if not self.a < self.b:
            raise ValueError("interval needs a < b")
        return self


class BallSpec(_Strict):
    kind: Literal["ball"]
    radius: float = Field(gt=0)
    center: tuple[float, float] = (0.0, 0.0)


DomainSpec = Annotated[Union[IntervalSpec, BallSpec], Field(discriminator="kind")]


class JumpingSpec(_Strict):
    family: Literal["jumping"]
    mu_minus: float
    mu_plus: float


class PowerSpec(_Strict):
    family: Literal["power_ap"]
    a0: float = Field(default=1.0, gt=0)
    p: float = Field(gt=1)
    slope_neg: float = 0.0


NonlinearitySpec = Annotated[Union[JumpingSpec, PowerSpec], Field(discriminator="family")]


class TableField(_Strict):
    """Node values read from a CSV written by this tool (last column = value)."""

    table: str


class Phi1Field(_Strict):
    """c times the principal eigenfunction (sup-normalised)."""

    phi1: float


FieldSpec = Union[float, TableField, Phi1Field]


class MCSpec(_Strict):
    paths: int = Field(default=10_000, ge=1)
    dt: float = Field(default=1e-3, gt=0)
    tmax: float = Field(default=20.0, gt=0)
    seed: Optional[int] = Field(default=None, ge=0)
    estimator: Literal["exit_time", "eigenvalue", "duhamel"] = "exit_time"
    probes: list[list[float]] = Field(default_factory=lambda: [[0.0]])
    t_window: tuple[float, float] = (0.5, 2.5)
    workers: int = Field(default=1, ge=1)


class TolSpec(_Strict):
    eigen: float = Field(default=1e-10, gt=0)
    iteration: float = Field(default=1e-10, gt=0)
    newton: float = Field(default=1e-9, gt=0)
    rho: float = Field(default=1e-2, gt=0)


class Config(_Strict):
    domain: DomainSpec
    s: float
    n: int
    nonlinearity: Optional[NonlinearitySpec] = None
    V: FieldSpec = 0.0
    V1: Optional[FieldSpec] = None
    V2: Optional[FieldSpec] = None
    C_ap: Optional[float] = None
    h: FieldSpec = 0.0
    g: FieldSpec = 1.0
    rho: Optional[float] = None
    rho_list: Optional[list[float]] = None
    bracket: Optional[tuple[float, float]] = None
    mc: Optional[MCSpec] = None
    seed: int = Field(default=0, ge=0)
    tol: TolSpec = TolSpec()
    output: str = "out"

    @field_validator("s")
    @classmethod
    def _s_range(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError("s must lie in (0, 1)")
        return v

    @field_validator("n")
    @classmethod
    def _n_range(cls, v):
        if v < 3:
            raise ValueError("n must be at least 3")
        return v


_RANGE_KEYS = {"s", "n"}


def parse_config_text(text: str, base_dir: Path | None = None) -> Config:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(raw, dict):
        raise ConfigSchemaError("top level must be a JSON object", "<root>")
    try:
        cfg = Config.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        key = ".".join(str(p) for p in err["loc"]) or "<root>"
        cls = ConfigRangeError if key in _RANGE_KEYS else ConfigSchemaError
        raise cls(err["msg"], key) from exc
    if base_dir is not None:
        for name in ("V", "V1", "V2", "h", "g"):
            spec = getattr(cfg, name)
            if isinstance(spec, TableField):
                path = Path(spec.table)
                if not path.is_absolute():
                    path = base_dir / path
                if not path.exists():
                    raise ConfigSchemaError(f"table file {path} does not exist", name)
                cfg = cfg.model_copy(update={name: TableField(table=str(path))})
    return cfg


def parse_config(path) -> Config:
    path = Path(path)
    if not path.exists():
        raise ConfigSchemaError(f"config file {path} does not exist", "<path>")
    return parse_config_text(path.read_text(), path.parent)


def serialize_config(cfg: Config) -> str:
    """Canonical JSON (sorted keys); parse_config_text inverts it."""
    return json.dumps(cfg.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def provenance_json(cfg: Config) -> str:
    """Canonical JSON of everything that affects results (the output location does not)."""
    return json.dumps(cfg.model_dump(mode="json", exclude={"output"}), sort_keys=True, indent=2) + "\n"


def config_hash(cfg: Config) -> str:
    return hashlib.sha256(provenance_json(cfg).encode()).hexdigest()


def build_grid(cfg: Config) -> Grid:
    d = cfg.domain
    if isinstance(d, IntervalSpec):
        return make_interval_grid(d.a, d.b, cfg.n)
    return make_ball_grid(d.radius, cfg.n, d.center)


def domain_of(cfg: Config):
    d = cfg.domain
    return Interval(d.a, d.b) if isinstance(d, IntervalSpec) else Ball(d.radius, d.center)


def resolve_field(spec, grid: Grid, phi1: GridFn | None = None) -> np.ndarray:
    if spec is None:
        return None
    if isinstance(spec, (int, float)):
        return np.full(grid.n, float(spec))
    if isinstance(spec, Phi1Field):
        if phi1 is None:
            raise ConfigError("phi1 fields need the principal eigenfunction")
        return spec.phi1 * phi1.values
    u = GridFn.from_csv(grid, spec.table)
    return np.array(u.values)
