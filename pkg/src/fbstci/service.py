"""HTTP service exposing the CI test, dataset generation and the log-normal
convolution demo.

Stateless wrappers over the core package; every endpoint takes an explicit
seed where randomness is involved, so responses are reproducible.
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .convolution import condense_horizontal, condense_vertical, convolve, lognormal_reference
from .errors import FbstCiError
from .fbst import CiTestSpec, ci_test, ci_test_from_tables
from .tables import ContingencyTable, CptModel, Dataset, sample_dataset
from .truthfn import AXIS_HORIZONTAL

AxisMode = Literal["horizontal", "vertical", "both"]


class CptModelBody(BaseModel):
    k: int = Field(ge=1)
    r: int = Field(ge=1)
    c: int = Field(ge=1)
    px: list[float]
    py_given_x: list[list[float]]
    mode: Literal["z_given_x", "z_given_xy"]
    pz: list

    def build(self) -> CptModel:
        model = CptModel(px=self.px, py_given_x=self.py_given_x, mode=self.mode, pz=self.pz)
        if (model.k, model.r, model.c) != (self.k, self.r, self.c):
            raise FbstCiError(
                f"declared dimensions {(self.k, self.r, self.c)} do not match the tables "
                f"{(model.k, model.r, model.c)}"
            )
        return model


class GenerateRequest(BaseModel):
    model: CptModelBody
    n: int = Field(ge=0)
    seed: int = Field(ge=0)


class GenerateResponse(BaseModel):
    records: list[tuple[int, int, int]]
    cardinalities: tuple[int, int, int]


class TestParams(BaseModel):
    seed: int = Field(ge=0)
    alpha: float = Field(default=1.0, gt=0)
    n_samples: int = Field(default=1_000_000, ge=2)
    n_bins: int = Field(default=100, ge=2)
    axis_mode: AxisMode = "both"

    def spec(self, **columns) -> CiTestSpec:
        return CiTestSpec(seed=self.seed, alpha=self.alpha, n_samples=self.n_samples,
                          n_bins=self.n_bins, axis_mode=self.axis_mode, **columns)


class RecordsTestRequest(TestParams):
    records: list[tuple[int, int, int]]
    cardinalities: Optional[tuple[int, int, int]] = None


class TablesTestRequest(TestParams):
    tables: list[list[list[int]]]


class SliceEvalues(BaseModel):
    horizontal: Optional[tuple[float, float]] = None
    vertical: Optional[float] = None


class SliceOut(BaseModel):
    x: int
    n: int
    log_f_star: float
    degenerate: bool
    evalue: SliceEvalues


class SpecOut(BaseModel):
    seed: int
    alpha: float | list
    n_samples: int
    n_bins: int
    axis_mode: AxisMode
    y_column: str
    z_column: str
    x_column: str


class ReportOut(BaseModel):
    schema_version: str
    software_version: str
    spec: SpecOut
    slices: list[SliceOut]
    composite: SliceEvalues
    category_maps: Optional[dict] = None


class LognormalDemoRequest(BaseModel):
    mu1: float
    sigma1: float = Field(gt=0)
    mu2: float
    sigma2: float = Field(gt=0)
    n_bins: int = Field(default=100, ge=2)
    axis_mode: Literal["horizontal", "vertical"] = "horizontal"


class LognormalDemoResponse(BaseModel):
    log_f_left: list[float]
    log_f_right: list[float]
    mass: list[float]
    cdf_lower: list[float]
    cdf_upper: list[float]
    analytic_cdf_left: list[float]
    analytic_cdf_right: list[float]


class HealthResponse(BaseModel):
    status: str
    version: str


app = FastAPI(
    title="fbstci",
    description="Full Bayesian Significance Test for conditional independence "
                "of discrete variables.",
    version=__version__,
)


def _bad_request(exc: FbstCiError) -> HTTPException:
    return HTTPException(status_code=422, detail=str(exc))


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/generate", response_model=GenerateResponse)
def generate(body: GenerateRequest) -> GenerateResponse:
    try:
        dataset = sample_dataset(body.model.build(), body.n, body.seed)
    except FbstCiError as exc:
        raise _bad_request(exc) from exc
    return GenerateResponse(
        records=[tuple(int(v) for v in rec) for rec in dataset.records],
        cardinalities=dataset.cardinalities,
    )


@app.post("/ci-test", response_model=ReportOut)
def ci_test_records(body: RecordsTestRequest) -> ReportOut:
    try:
        records = np.asarray(body.records, dtype=np.int64).reshape(-1, 3)
        cards = body.cardinalities
        if cards is None:
            if records.size == 0:
                raise FbstCiError("need records or explicit cardinalities")
            cards = tuple(int(v) for v in records.max(axis=0))
        dataset = Dataset(records, cards)
        report = ci_test(dataset, body.spec())
    except FbstCiError as exc:
        raise _bad_request(exc) from exc
    return ReportOut(**report.to_dict())


@app.post("/ci-test-tables", response_model=ReportOut)
def ci_test_tables(body: TablesTestRequest) -> ReportOut:
    try:
        tables = [ContingencyTable(np.asarray(grid, dtype=np.int64), slice_label=i + 1)
                  for i, grid in enumerate(body.tables)]
        report = ci_test_from_tables(tables, body.spec())
    except FbstCiError as exc:
        raise _bad_request(exc) from exc
    return ReportOut(**report.to_dict())


@app.post("/lognormal-demo", response_model=LognormalDemoResponse)
def lognormal_demo(body: LognormalDemoRequest) -> LognormalDemoResponse:
    from scipy.stats import norm

    try:
        wa = lognormal_reference(body.mu1, body.sigma1, body.n_bins, body.axis_mode)
        wb = lognormal_reference(body.mu2, body.sigma2, body.n_bins, body.axis_mode)
        raw = convolve(wa, wb)
        condense = condense_horizontal if body.axis_mode == AXIS_HORIZONTAL else condense_vertical
        tf = condense(raw, body.n_bins)
    except FbstCiError as exc:
        raise _bad_request(exc) from exc
    mu = body.mu1 + body.mu2
    sigma = float(np.hypot(body.sigma1, body.sigma2))
    return LognormalDemoResponse(
        log_f_left=tf.log_f_left.tolist(),
        log_f_right=tf.log_f_right.tolist(),
        mass=tf.mass.tolist(),
        cdf_lower=tf.cdf_lower.tolist(),
        cdf_upper=tf.cdf_upper.tolist(),
        analytic_cdf_left=norm.cdf((tf.log_f_left - mu) / sigma).tolist(),
        analytic_cdf_right=norm.cdf((tf.log_f_right - mu) / sigma).tolist(),
    )
