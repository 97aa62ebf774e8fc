"""FastAPI service exposing the engine as request/response compute endpoints.

Run with ``uvicorn spincm.service:app``.  The CLI drives the same
orchestration layer in-process, so files produced either way are identical.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import __version__, runs, verify
from .config import RunConfig, VerifyConfig
from .errors import SpincmError, ValidationError

app = FastAPI(
    title="spincm",
    version=__version__,
    description=(
        "Hyperbolic spin Calogero-Moser systems and spin Toda lattices: "
        "RK4 simulation, exact factorization solvers, exact-vs-numeric "
        "comparison, and randomized verification suites."
    ),
)


class TrajectoryResponse(BaseModel):
    config: dict
    system: str
    method: str
    columns: list[str]
    rows: list[list[float]]
    status: str
    horizon: Optional[float] = None
    failure: Optional[str] = None
    diagnostics: dict = {}


class CompareResponse(BaseModel):
    config: dict
    system: str
    per_field: dict[str, float]
    max_deviation: float
    tolerance: float
    passed: bool
    n_compared: int
    common_t_max: float
    status_exact: str
    status_rk4: str
    warnings: list[str]
    exact_diagnostics: dict


class VerifyResponse(BaseModel):
    suite: str
    passed: bool
    report: dict


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


def _guarded(fn, *args):
    try:
        return fn(*args)
    except ValidationError as err:
        raise HTTPException(status_code=422, detail=str(err))
    except SpincmError as err:
        raise HTTPException(status_code=409, detail=f"{type(err).__name__}: {err}")


def _traj_response(result: runs.TrajectoryResult) -> TrajectoryResponse:
    return TrajectoryResponse(**runs.result_to_json(result))


@app.post("/simulate", response_model=TrajectoryResponse)
def simulate(cfg: RunConfig) -> TrajectoryResponse:
    return _traj_response(_guarded(runs.run_simulate, cfg))


@app.post("/solve-exact", response_model=TrajectoryResponse)
def solve_exact(cfg: RunConfig) -> TrajectoryResponse:
    return _traj_response(_guarded(runs.run_solve_exact, cfg))


@app.post("/compare", response_model=CompareResponse)
def compare(cfg: RunConfig) -> CompareResponse:
    report = _guarded(runs.run_compare, cfg)
    report["passed"] = report.pop("pass")
    return CompareResponse(**report)


@app.post("/verify", response_model=VerifyResponse)
def run_verify_suite(vcfg: VerifyConfig) -> VerifyResponse:
    report = _guarded(verify.run_verify, vcfg)
    return VerifyResponse(suite=vcfg.suite, passed=report["pass"], report=report)
