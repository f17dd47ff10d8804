from __future__ import annotations
import json, os, pathlib
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from sparsechoice.exprlib import has_slot, parse_expr

Scenario = Literal["binary_logit", "complex_fractional"]

# covariates are uniform on these intervals unless overridden
DEFAULT_RANGES: dict[str, tuple[float, float]] = {
    "binary_logit": (-1.0, 1.0),
    "complex_fractional": (0.0, 100.0),
}


class GeneratorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: Scenario = Field("binary_logit", description="binary_logit or complex_fractional")
    rows: int = Field(200, ge=1, description="Observation groups J")
    replicates: int = Field(1000, ge=1, description="Simulated choices per row R")
    seed: int = Field(0, ge=0, le=2**64 - 1, description="Unsigned 64-bit seed")
    low: float | None = Field(None, description="Lower covariate bound; scenario default when unset")
    high: float | None = Field(None, description="Upper covariate bound; scenario default when unset")

    @model_validator(mode="after")
    def _check_range(self) -> GeneratorConfig:
        low, high = self.covariate_range()
        if not low < high:
            raise ValueError(f"covariate range must satisfy low < high, got [{low}, {high}]")
        return self

    def covariate_range(self) -> tuple[float, float]:
        low, high = DEFAULT_RANGES[self.scenario]
        return (
            low if self.low is None else self.low,
            high if self.high is None else self.high,
        )


class SolverSettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    pi: float = Field(0.001, ge=0, description="Residual-ball radius (probability units)")
    max_iterations: int = Field(20000, ge=1)
    eps_abs: float = Field(1e-8, gt=0, description="Absolute primal/dual tolerance")
    eps_rel: float = Field(1e-8, gt=0, description="Relative primal/dual tolerance")
    rho: float = Field(1.0, gt=0, description="Initial ADMM penalty")
    rho_min: float = Field(1e-4, gt=0)
    rho_max: float = Field(1e4, gt=0)
    adaptive_rho: bool = Field(True, description="Balance primal and dual residuals by rescaling rho")
    method: Literal["ball_constrained", "lasso_path", "conic"] = "ball_constrained"
    over_relaxation: float = Field(1.6, gt=0, lt=2, description="ADMM relaxation factor; 1 disables it")
    fallback: Literal["conic", "none"] = Field(
        "conic", description="Interior-point re-solve when ADMM stops at max_iterations uncertified"
    )
    conic_solver: str | None = Field(None, description="cvxpy solver name; None lets cvxpy choose")
    norm: Literal["l2"] = Field("l2", description="Residual norm; only the Euclidean ball is supported")
    scaling: Literal["none", "unit_l2"] = Field("none", description="Library column scaling")
    on_infeasible: Literal["error", "relax"] = Field(
        "error", description="error: raise when pi is below the minimal feasible radius; relax: widen pi"
    )
    relax_margin: float = Field(0.05, ge=0, description="Relative headroom added to the minimal radius")
    polish: bool = Field(True, description="Refine the ADMM point on its detected support")
    activity_threshold: float = Field(1e-8, gt=0, description="Relative threshold for the active set")

    # lasso_path knobs
    path_length: int = Field(100, ge=2)
    path_min_ratio: float = Field(1e-6, gt=0, lt=1)
    bisection_tol: float = Field(0.01, gt=0, lt=1)
    cd_tolerance: float = Field(1e-10, gt=0)
    cd_max_sweeps: int = Field(10000, ge=1)

    @model_validator(mode="after")
    def _check_rho(self) -> SolverSettings:
        if not self.rho_min <= self.rho <= self.rho_max:
            raise ValueError(f"rho={self.rho} must lie in [rho_min, rho_max]=[{self.rho_min}, {self.rho_max}]")
        return self


class TargetRange(BaseModel):
    """Half-open index range ``[start, stop)`` minus ``exclude``."""

    model_config = ConfigDict(extra="forbid")

    start: int = Field(0, ge=0)
    stop: int = Field(..., ge=0)
    exclude: list[int] = Field(default_factory=list)

    def indices(self) -> list[int]:
        skip = set(self.exclude)
        return [i for i in range(self.start, self.stop) if i not in skip]


class LibraryEntryConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    expr: str = Field(..., description="Template with one free slot 'x'")
    targets: list[int] | TargetRange = Field(..., description="Column indices or {start, stop, exclude}")
    space: Literal["covariate", "library"] = "covariate"

    @field_validator("expr")
    @classmethod
    def _parse_template(cls, v: str) -> str:
        if not has_slot(parse_expr(v)):
            raise ValueError(f"template {v!r} has no free slot 'x'")
        return v

    @field_validator("targets")
    @classmethod
    def _non_negative(cls, v: list[int] | TargetRange) -> list[int] | TargetRange:
        if isinstance(v, list) and any(i < 0 for i in v):
            raise ValueError("target indices must be non-negative")
        return v

    def indices(self) -> list[int]:
        return list(self.targets) if isinstance(self.targets, list) else self.targets.indices()


class LibraryConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name_offset: int = Field(0, ge=0, description="Columns are named f{name_offset + j}")
    entries: list[LibraryEntryConfig] = Field(default_factory=list)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: Scenario = "binary_logit"
    rows: int = Field(200, ge=1)
    replicates: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0, le=2**64 - 1, description="Master seed")
    n_runs: int = Field(10, ge=1, description="Repeated end-to-end runs")
    redraw: Literal["full", "choices_only"] = Field(
        "full", description="full: new covariates per run; choices_only: covariates from the master seed"
    )
    alternatives: list[int] | None = Field(None, description="Alternatives to analyse; None means all")
    library: LibraryConfig
    solver: SolverSettings = Field(default_factory=SolverSettings)
    alpha: float = Field(0.05, gt=0, lt=1, description="Significance level for pruning")
    near_zero: float = Field(1e-6, ge=0, description="Surviving terms with |mean| at or below this are negligible")
    output_dir: str = "out"
    dump_library: bool = Field(False, description="Write library.csv (large for compositional libraries)")
    jobs: int = Field(1, ge=1, description="Concurrent runs")

    @field_validator("alternatives")
    @classmethod
    def _check_alternatives(cls, v: list[int] | None) -> list[int] | None:
        if v is not None and (not v or any(a < 0 for a in v)):
            raise ValueError("alternatives must be a non-empty list of non-negative indices")
        return v

    def generator(self, seed: int | None = None) -> GeneratorConfig:
        return GeneratorConfig(
            scenario=self.scenario,
            rows=self.rows,
            replicates=self.replicates,
            seed=self.seed if seed is None else seed,
        )


def _read_document(path: pathlib.Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        if path.suffix.lower() == ".json":
            return json.load(f)
        if path.suffix.lower() in (".yaml", ".yml"):
            return yaml.safe_load(f)
    raise ValueError(f"unsupported config format: {path.name} (expected .json, .yaml or .yml)")


def load_library(path: str | os.PathLike) -> LibraryConfig:
    return LibraryConfig(**_read_document(pathlib.Path(path)))


def load_config(path: str | os.PathLike = "config/exp1.json") -> ExperimentConfig:
    path = pathlib.Path(path)
    data = _read_document(path)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    library = data.get("library")
    if isinstance(library, str):
        # library files are resolved next to the config that names them
        data["library"] = load_library(path.parent / library)
    return ExperimentConfig(**data)
