"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

import hashlib
import json
from typing import Literal

from pydantic import BaseModel, Field, model_validator

from ..config import RunConfig


class ProfileSpec(BaseModel):
    kind: Literal["linear", "exponential", "tabulated"]
    params: list[float] | None = None
    table: list[tuple[float, float]] | None = None

    @model_validator(mode="after")
    def _check_payload(self):
        if self.kind == "tabulated":
            if not self.table:
                raise ValueError("tabulated profile requires `table`")
        elif not self.params or len(self.params) != 2:
            raise ValueError(f"{self.kind} profile requires two `params`")
        return self


class PhysicsSpec(BaseModel):
    g: float = Field(gt=0)
    mu: float = Field(gt=0)
    sigma: float = Field(ge=0)
    L: float = Field(gt=0)


class NumericsSpec(BaseModel):
    n_elements: int = Field(default=128, ge=2)
    quad_points: int = Field(default=4, ge=2)
    fixed_point_tol: float = Field(default=1e-10, gt=0)
    j_max: int = Field(default=4, ge=1)
    k_max: float | None = Field(default=None, gt=0)
    mode_samples: int = Field(default=201, ge=2)


class BaseRequest(BaseModel):
    profile: ProfileSpec
    physics: PhysicsSpec
    numerics: NumericsSpec = NumericsSpec()

    def to_config(self) -> RunConfig:
        cfg = RunConfig(
            profile_kind=self.profile.kind,
            profile_params=self.profile.params or [],
            profile_table=[tuple(p) for p in self.profile.table] if self.profile.table else None,
            g=self.physics.g, mu=self.physics.mu,
            sigma=self.physics.sigma, L=self.physics.L,
            n_elements=self.numerics.n_elements,
            quad_points=self.numerics.quad_points,
            fixed_point_tol=self.numerics.fixed_point_tol,
            j_max=self.numerics.j_max,
            k_max=self.numerics.k_max,
            mode_samples=self.numerics.mode_samples,
        )
        self._apply_extras(cfg)
        payload = self.model_dump_json(exclude_none=True)
        cfg.config_hash = hashlib.sha256(payload.encode()).hexdigest()[:16]
        cfg.validate()
        return cfg

    def _apply_extras(self, cfg: RunConfig) -> None:
        pass


class SigmaCriticalRequest(BaseRequest):
    pass


class GammaSpectrumRequest(BaseRequest):
    k: float = Field(gt=0)
    lam: float = Field(default=0.0, ge=0, alias="lambda")
    count: int | None = Field(default=None, ge=1)

    model_config = {"populate_by_name": True}


class DispersionRequest(BaseRequest):
    threads: int = Field(default=1, ge=1, le=32)
    include_rows: bool = True


class ModesRequest(BaseRequest):
    k: float | None = Field(default=None, gt=0)
    j: int | None = Field(default=None, ge=1)


class EvolveRequest(BaseRequest):
    k: float | None = Field(default=None, gt=0)
    init: Literal["eigen", "random"] = "eigen"
    seed: int = 0
    dt: float | None = Field(default=None, gt=0)
    t_end: float | None = Field(default=None, gt=0)
    include_trajectory: bool = False

    def _apply_extras(self, cfg: RunConfig) -> None:
        cfg.dt = self.dt
        cfg.t_end = self.t_end


class InstabilityPlanRequest(BaseRequest):
    coefficients: list[float] = Field(default_factory=lambda: [1.0], min_length=1)
    delta: float = Field(default=0.01, gt=0, lt=1)
    epsilon0: float = Field(default=0.1, gt=0)
    c3: float = Field(default=1.0, gt=0)
    c4: float = Field(default=1.0, gt=0)
    delta0: float = Field(default=0.1, gt=0)
    mode_documents: list[dict] | None = None

    def _apply_extras(self, cfg: RunConfig) -> None:
        cfg.coefficients = list(self.coefficients)
        cfg.delta = self.delta
        cfg.epsilon0 = self.epsilon0
        cfg.c3 = self.c3
        cfg.c4 = self.c4
        cfg.delta0 = self.delta0


class CheckRequest(BaseRequest):
    pass


class SigmaCriticalResponse(BaseModel):
    sigma_c: float
    sigma: float
    subcritical: bool
    table: list[dict]
    config_hash: str
    version: str


class GammaSpectrumResponse(BaseModel):
    k: float
    lam: float = Field(alias="lambda")
    sigma: float
    gammas: list[float]
    n_positive: int
    ties: list[int]
    config_hash: str
    version: str

    model_config = {"populate_by_name": True}


class DispersionResponse(BaseModel):
    sigma: float
    sigma_c: float
    stable: bool
    Lambda: float | None
    lambda_bound: float
    S: list[list[float]]
    S_Lambda: list[list[float]]
    lambda1: list[float]
    truncated: bool
    warnings: list[str]
    rows: list[dict] | None = None
    note: str | None = None
    config_hash: str
    version: str


class ModesResponse(BaseModel):
    documents: list[dict]
    names: list[str]
    lambdas: list[float]
    warnings: list[str]
    config_hash: str
    version: str


class EvolveResponse(BaseModel):
    k: float
    k1: float
    k2: float
    dt: float
    t_end: float
    init: str
    lambda1: float | None
    lambda_est: float
    r_squared: float
    window: list[float]
    energy_drift: float
    Lambda: float | None = None
    sharp_rate_ok: bool | None = None
    sharp_rate_max_ratio: float | None = None
    trajectory: list[tuple[float, float, float]] | None = None
    config_hash: str
    version: str


class CheckEntry(BaseModel):
    name: str
    passed: bool
    detail: str


class CheckResponse(BaseModel):
    results: list[CheckEntry]
    all_passed: bool
    config_hash: str
    version: str


class HealthResponse(BaseModel):
    status: str
    version: str
