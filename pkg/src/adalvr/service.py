"""HTTP surface over the library: sweeps, single runs, reference solves and
the verification suite, with pydantic request/response models."""

from __future__ import annotations

from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .bench import GridSpec, prepare_problem, rows_to_csv, run_grid
from .optimizer import ConvergenceError, reference_solution
from .verify import run_verification_suite


class ProblemSpec(BaseModel):
    problem: Literal["logistic", "ls"] = "logistic"
    dataset: str = "synthetic"
    has_header: bool = False
    n_samples: int = Field(2000, ge=2)
    n_features: int = Field(20, ge=1)
    n_classes: int = Field(5, ge=2)
    label_noise: float = Field(0.1, ge=0.0, le=1.0)
    data_seed: int = 0
    batch: int = Field(10, ge=1)
    minmax: bool = True
    train_fraction: float = Field(0.8, gt=0.0, lt=1.0)
    split_seed: int = 0
    subsample: int | None = Field(None, ge=2)


class GridRequest(BaseModel):
    problem: ProblemSpec = ProblemSpec()
    algorithms: list[str] = ["adasaga_diag", "saga"]
    ltilde: list[float] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0]
    epochs: float = Field(10.0, gt=0)
    seeds: list[int] = [0]
    p: float | None = Field(None, gt=0.0, lt=1.0)
    projection: bool = False
    box_halfwidth: float | None = Field(None, gt=0.0)
    checkpoint_grads: int | None = Field(None, ge=1)
    gamma: float = Field(0.9, gt=0.0, lt=1.0)
    beta1: float = Field(0.9, gt=0.0, lt=1.0)
    beta2: float = Field(0.999, gt=0.0, lt=1.0)
    workers: int = Field(1, ge=1)


class GridResponse(BaseModel):
    csv: str
    n_rows: int


class SolveRequest(BaseModel):
    problem: ProblemSpec = ProblemSpec()
    algorithm: str = "adasaga_diag"
    ltilde: float = Field(1.0, gt=0)
    epochs: float = Field(10.0, gt=0)
    seed: int = 0
    p: float | None = Field(None, gt=0.0, lt=1.0)
    projection: bool = False
    box_halfwidth: float | None = Field(None, gt=0.0)
    checkpoint_grads: int | None = Field(None, ge=1)
    gamma: float = Field(0.9, gt=0.0, lt=1.0)
    beta1: float = Field(0.9, gt=0.0, lt=1.0)
    beta2: float = Field(0.999, gt=0.0, lt=1.0)


class SolveResponse(BaseModel):
    csv: str
    final_objective: float
    final_balanced_accuracy: float | None
    gradients: int
    diverged: bool


class ReferenceRequest(BaseModel):
    problem: ProblemSpec = ProblemSpec()
    tol: float = Field(1e-9, gt=0)
    max_iter: int = Field(5000, ge=1)


class ReferenceResponse(BaseModel):
    x: list[float]
    f: float
    grad_norm: float


class VerifyRequest(BaseModel):
    seed: int = 0
    runs: int = Field(48, ge=1)
    t_max: int = Field(200, ge=8)


class LemmaReportModel(BaseModel):
    lemma: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    context: str


class VerifyResponse(BaseModel):
    reports: list[LemmaReportModel]
    all_passed: bool


app = FastAPI(title="adalvr", description="Adaptive variance-reduced finite-sum optimization")


def _problem(spec: ProblemSpec):
    try:
        return prepare_problem(**spec.model_dump())
    except (ValueError, OSError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/grid", response_model=GridResponse)
def grid(req: GridRequest) -> GridResponse:
    problem, test = _problem(req.problem)
    try:
        spec = GridSpec(
            algorithms=req.algorithms,
            ltilde_grid=req.ltilde,
            epochs=req.epochs,
            seeds=req.seeds,
            p=req.p,
            projection=req.projection,
            box_halfwidth=req.box_halfwidth,
            checkpoint_grads=req.checkpoint_grads,
            gamma=req.gamma,
            beta1=req.beta1,
            beta2=req.beta2,
            workers=req.workers,
        )
        rows = run_grid(spec, problem, test)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return GridResponse(csv=rows_to_csv(rows), n_rows=len(rows))


@app.post("/solve", response_model=SolveResponse)
def solve(req: SolveRequest) -> SolveResponse:
    problem, test = _problem(req.problem)
    try:
        spec = GridSpec(
            algorithms=[req.algorithm],
            ltilde_grid=[req.ltilde],
            epochs=req.epochs,
            seeds=[req.seed],
            p=req.p,
            projection=req.projection,
            box_halfwidth=req.box_halfwidth,
            checkpoint_grads=req.checkpoint_grads,
            gamma=req.gamma,
            beta1=req.beta1,
            beta2=req.beta2,
        )
        rows = run_grid(spec, problem, test)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    diverged = any(r.diverged for r in rows)
    last = rows[-1]
    return SolveResponse(
        csv=rows_to_csv(rows),
        final_objective=last.train_objective,
        final_balanced_accuracy=last.balanced_accuracy,
        gradients=last.gradients,
        diverged=diverged,
    )


@app.post("/reference", response_model=ReferenceResponse)
def reference(req: ReferenceRequest) -> ReferenceResponse:
    problem, _ = _problem(req.problem)
    try:
        x_star, f_star = reference_solution(problem, tol=req.tol, max_iter=req.max_iter)
    except ConvergenceError as exc:
        raise HTTPException(status_code=409, detail=str(exc)) from exc
    grad_norm = float(np.linalg.norm(problem.full_grad(x_star)))
    return ReferenceResponse(x=[float(v) for v in x_star], f=f_star, grad_norm=grad_norm)


@app.post("/verify", response_model=VerifyResponse)
def verify(req: VerifyRequest) -> VerifyResponse:
    reports = run_verification_suite(seed=req.seed, n_runs=req.runs, t_max=req.t_max)
    models = [
        LemmaReportModel(
            lemma=r.lemma,
            lhs=r.lhs,
            rhs=r.rhs,
            slack=r.slack,
            passed=r.passed,
            context=r.context,
        )
        for r in reports
    ]
    return VerifyResponse(reports=models, all_passed=all(r.passed for r in reports))
