"""Request and response models for the estimation service.

Infinities do not survive strict JSON, so log quantities that can be -inf
travel as ``None`` and are restored by clients that need them.
"""

import base64
import binascii
import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..bayes_error import BayesErrorEstimate
from ..hdr import HdrConfig, HdrEstimate


class HdrOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_per_level: int = 512
    rho: float = 0.5
    repeats: int = 8
    max_levels: int = 200
    thin: int | None = None
    burnin: int | None = None

    def to_config(self, seed: int) -> HdrConfig:
        return HdrConfig(
            n_per_level=self.n_per_level,
            rho=self.rho,
            repeats=self.repeats,
            max_levels=self.max_levels,
            seed=seed,
            thin=self.thin,
            burnin=self.burnin,
        )


class ModelPayload(BaseModel):
    """Exactly one of: base64 GCM file bytes, or the inline JSON twin."""

    model_config = ConfigDict(extra="forbid")

    gcm_base64: str | None = None
    inline: dict | None = None

    @model_validator(mode="after")
    def _exactly_one(self) -> "ModelPayload":
        if (self.gcm_base64 is None) == (self.inline is None):
            raise ValueError("provide exactly one of gcm_base64 or inline")
        return self

    def raw(self) -> bytes | dict:
        if self.inline is not None:
            return self.inline
        try:
            return base64.b64decode(self.gcm_base64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise ValueError(f"invalid base64 model payload: {exc}") from exc


class FlowPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    inline: dict | None = None
    random_seed: int | None = None
    random_layers: int = 6
    affine: bool = True

    @model_validator(mode="after")
    def _exactly_one(self) -> "FlowPayload":
        if (self.inline is None) == (self.random_seed is None):
            raise ValueError("provide exactly one of inline or random_seed")
        return self


def _finite_or_none(x: float) -> float | None:
    return x if math.isfinite(x) else None


class ClassEstimate(BaseModel):
    p: float
    log_p: float | None
    stderr: float
    stderr_log: float | None
    levels: list[int]
    degenerate_steps: int

    @classmethod
    def from_estimate(cls, est: HdrEstimate) -> "ClassEstimate":
        return cls(
            p=est.p,
            log_p=_finite_or_none(est.log_p),
            stderr=est.stderr,
            stderr_log=_finite_or_none(est.stderr_log),
            levels=list(est.levels),
            degenerate_steps=est.degenerate_steps,
        )


class ComputeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelPayload
    tau: float = Field(default=1.0, gt=0)
    hdr: HdrOptions = HdrOptions()
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)


class ComputeResponse(BaseModel):
    tau: float
    error: float
    stderr: float
    method: str
    per_class: list[ClassEstimate]
    levels_total: int
    closed_form: float | None = None
    discrepancy: float | None = None

    @classmethod
    def from_estimate(cls, est: BayesErrorEstimate) -> "ComputeResponse":
        return cls(
            tau=est.tau,
            error=est.error,
            stderr=est.stderr,
            method=est.method,
            per_class=[ClassEstimate.from_estimate(e) for e in est.per_class],
            levels_total=est.levels_total,
            closed_form=est.closed_form,
            discrepancy=est.discrepancy,
        )


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelPayload
    tau_min: float = Field(gt=0)
    tau_max: float = Field(gt=0)
    steps: int = Field(ge=2)
    grid: str = "geometric"  # or "linear"
    hdr: HdrOptions = HdrOptions()
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)


class SweepRow(BaseModel):
    tau: float
    bayes_error: float
    stderr: float
    method: str
    levels_total: int


class SweepResponse(BaseModel):
    rows: list[SweepRow]
    warnings: list[str]


class InvertRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelPayload
    target: float = Field(ge=0, lt=1)
    tau_lo: float = Field(gt=0)
    tau_hi: float = Field(gt=0)
    tol: float = Field(default=0.01, gt=0)
    tol_eps: float = Field(default=0.0, ge=0)
    hdr: HdrOptions = HdrOptions()
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)


class InvertResponse(BaseModel):
    tau_star: float
    estimate: ComputeResponse
    evaluations: int
    warnings: list[str]


class OneVsAllRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelPayload
    class_index: int = Field(ge=0)
    tau: float = Field(default=1.0, gt=0)
    samples: int = Field(default=1_000_000, ge=1)
    weight_mode: str = "balanced"
    seed: int = Field(default=0, ge=0)


class OneVsAllResponse(BaseModel):
    class_index: int
    tau: float
    error: float
    stderr: float
    samples: int
    weight_mode: str


class ValidateFig1Request(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dim: int = Field(default=784, ge=2)
    taus: list[float]
    hdr: HdrOptions = HdrOptions()
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)
    rel_tol: float = Field(default=0.05, gt=0)


class ValidateFig1Row(BaseModel):
    tau: float
    exact: float
    hdr: float
    stderr: float
    rel_err: float
    log_exact: float
    log_hdr: float | None


class ValidateFig1Response(BaseModel):
    rows: list[ValidateFig1Row]
    passed: bool


class FlowInvarianceRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelPayload
    flow: FlowPayload
    tau: float = Field(default=1.0, gt=0)
    samples: int = Field(default=1_000_000, ge=10_000)
    hdr: HdrOptions = HdrOptions()
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)


class FlowInvarianceResponse(BaseModel):
    error_x_space: float
    stderr_x_space: float
    error_base: float
    stderr_base: float
    difference: float
    combined_stderr: float
    tau: float
    samples: int
    passed: bool


class GenSyntheticRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    classes: int = Field(ge=1)
    dim: int = Field(ge=1)
    mean_scheme: str = "unit-sphere"
    seed: int = Field(default=0, ge=0)
    cov_scale: float = Field(default=1.0, gt=0)


class GenSyntheticResponse(BaseModel):
    gcm_base64: str
    model: dict
