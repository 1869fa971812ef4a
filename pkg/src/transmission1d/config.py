"""Experiment configuration: TOML file validated by pydantic (unknown keys rejected)."""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .domain import DecomposedInterval, validate

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

# a number, an expression in x, or a list of ascending coefficients; either
# shared by every subdomain or given once per subdomain
PolySpec = Union[float, str, list[Union[float, str, list[float]]]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DomainCfg(_Strict):
    a: float = 0.0
    b: float = 1.0
    gamma: list[float] = Field(default_factory=list)
    bc_left: Literal["dirichlet", "neumann"] = "dirichlet"
    bc_right: Literal["dirichlet", "neumann"] = "dirichlet"
    orientation: Literal[1, -1] = 1

    @model_validator(mode="after")
    def _check(self):
        problems = validate(self.build())
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def build(self) -> DecomposedInterval:
        return DecomposedInterval(self.a, self.b, tuple(self.gamma), self.bc_left, self.bc_right, self.orientation)


class CoefCfg(_Strict):
    a00: PolySpec = 0.0
    a01: PolySpec = 0.0
    a10: PolySpec = 0.0
    a11: PolySpec = 0.0


class DataCfg(_Strict):
    f: PolySpec = 0.0
    g_tilde: dict[Literal["left", "right"], float] = Field(default_factory=dict)
    g: dict[Literal["left", "right"], float] = Field(default_factory=dict)
    h_tilde: list[float] = Field(default_factory=list)
    h: list[float] = Field(default_factory=list)
    exact: Optional[PolySpec] = None  # closed-form solution, when known


class MeshCfg(_Strict):
    n: list[int] = Field(default_factory=lambda: [8])  # elements per subdomain, one entry per mesh
    degree: Literal[1, 2] = 1
    ref_factor: int = 8

    @field_validator("n")
    @classmethod
    def _positive(cls, v):
        if not v or any(x < 1 for x in v):
            raise ValueError("mesh.n must be a nonempty list of positive integers")
        return v


class ModelCfg(_Strict):
    bases: list[CoefCfg]
    sigma: list[list[float]]
    gamma_floor: float = 1.0
    variant: Literal["full", "strong"] = "full"


class ExperimentCfg(_Strict):
    k: int = 0
    ks: list[int] = Field(default_factory=lambda: [0])
    p: float = 2.0
    r: float = 0.0
    s: float = 0.0
    moments: Optional[list[tuple[float, float, float]]] = None  # (p, r, s) tuples
    n: int = 1000
    level: Optional[Literal[0, 1]] = None
    projection: Literal["h1", "energy", "both"] = "h1"
    bound: Literal["apriori", "lifted", "envelope"] = "apriori"
    n_cases: int = 20
    t: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 10.0])
    contrasts: list[list[float]] = Field(default_factory=lambda: [[1.0, -2.0]])
    eps: list[float] = Field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])

    @field_validator("n", "n_cases")
    @classmethod
    def _nonneg(cls, v):
        if v < 0:
            raise ValueError("must be >= 0")
        return v


class OutputCfg(_Strict):
    dir: str = "out"


class ExperimentConfig(_Strict):
    seed: int = 0
    domain: DomainCfg = Field(default_factory=DomainCfg)
    coefficients: Optional[CoefCfg] = None
    data: DataCfg = Field(default_factory=DataCfg)
    mesh: MeshCfg = Field(default_factory=MeshCfg)
    model: Optional[ModelCfg] = None
    experiment: ExperimentCfg = Field(default_factory=ExperimentCfg)
    output: OutputCfg = Field(default_factory=OutputCfg)

    @field_validator("seed")
    @classmethod
    def _u64(cls, v):
        if not 0 <= v < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        return v


def load_config(path: str | Path) -> tuple[ExperimentConfig, dict]:
    """Parse and validate; returns the model and the raw mapping."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return ExperimentConfig.model_validate(raw), raw


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
