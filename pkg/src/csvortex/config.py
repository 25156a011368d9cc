"""Run configuration: JSON in, validated pydantic model out."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .grid import Grid
from .metric import ConformalFactor, metric_from_dict
from .solver import SolveSettings
from .vortices import Vortex, VortexConfiguration


class ConfigError(ValueError):
    """Schema violation; the message lists one ``path: problem`` line per error."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FlatSpec(_Strict):
    family: Literal["flat"] = "flat"


class GaussianBumpSpec(_Strict):
    family: Literal["gaussian_bump"]
    amplitude: float = Field(1.0, ge=0.0)
    sigma: float = Field(1.0, gt=0.0)
    center: tuple[float, float] = (0.0, 0.0)


class PowerGrowthSpec(_Strict):
    family: Literal["power_growth"]
    exponent: float = Field(0.5, ge=0.0, lt=1.0)


class RadialTableSpec(_Strict):
    family: Literal["radial_table"]
    radii: list[float] = Field(min_length=2)
    values: list[float] = Field(min_length=2)


MetricSpec = Annotated[
    Union[FlatSpec, GaussianBumpSpec, PowerGrowthSpec, RadialTableSpec],
    Field(discriminator="family"),
]


class VortexSpec(_Strict):
    x: float
    y: float
    n: int = Field(1, ge=1)


class GridSpec(_Strict):
    half_width: float = Field(16.0, gt=0.0)
    nodes: int = Field(513, ge=33)

    @model_validator(mode="after")
    def _odd(self) -> GridSpec:
        if self.nodes % 2 == 0:
            raise ValueError("nodes must be odd")
        return self


class SolverSpec(_Strict):
    method: Literal["both", "newton", "minimize"] = "both"
    residual_tol: float = Field(1e-10, gt=0.0)
    max_iterations: int = Field(200, ge=1)
    max_gradient_steps: int = Field(50_000, ge=1)
    continuation: list[int] | None = None
    agreement_tol: float = Field(1e-6, gt=0.0)


class OutputSpec(_Strict):
    report: str = "report.json"
    dump_fields: bool = False
    heatmap: bool = False
    decay_window: tuple[float, float] | None = None
    oracle: bool | None = None  # None: compare whenever the problem is radial


class RunConfiguration(_Strict):
    metric: MetricSpec = Field(default_factory=FlatSpec)
    vortices: list[VortexSpec] = Field(default_factory=list)
    mu: float = Field(1.0, gt=0.0)
    grid: GridSpec = Field(default_factory=GridSpec)
    solver: SolverSpec = Field(default_factory=SolverSpec)
    outputs: OutputSpec = Field(default_factory=OutputSpec)

    @model_validator(mode="after")
    def _inside(self) -> RunConfiguration:
        L = self.grid.half_width
        for k, v in enumerate(self.vortices):
            if not (abs(v.x) < L and abs(v.y) < L):
                raise ValueError(
                    f"vortex outside domain: vortices[{k}] at ({v.x}, {v.y}) is not inside [-{L}, {L}]^2"
                )
        return self

    # -- conversions to the numerical objects ------------------------------

    def build_metric(self) -> ConformalFactor:
        return metric_from_dict(self.metric.model_dump())

    def build_vortices(self, mu: float | None = None) -> VortexConfiguration:
        return VortexConfiguration(
            tuple(Vortex(v.x, v.y, v.n) for v in self.vortices), self.mu if mu is None else mu
        )

    def build_grid(self) -> Grid:
        return Grid(self.grid.half_width, self.grid.nodes)

    def build_settings(self) -> SolveSettings:
        s = self.solver
        return SolveSettings(
            method=s.method,
            residual_tol=s.residual_tol,
            max_iterations=s.max_iterations,
            max_gradient_steps=s.max_gradient_steps,
            continuation=tuple(s.continuation) if s.continuation else None,
            agreement_tol=s.agreement_tol,
        )

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _format(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = err["msg"].removeprefix("Value error, ")
        lines.append(f"{path}: {msg}")
    return "\n".join(lines)


def parse_config(text: str) -> RunConfiguration:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>: configuration must be a JSON object")
    try:
        return RunConfiguration.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format(exc)) from None


def load_config(path: str | Path) -> RunConfiguration:
    return parse_config(Path(path).read_text(encoding="utf-8"))
