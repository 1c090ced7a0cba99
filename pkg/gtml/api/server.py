import math
from typing import List, Literal, Optional

from fastapi import Depends, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field, ValidationError

from gtml.auction.gsp import BidProfile, gsp_revenue, shown_count, signal_label
from gtml.bounds.formulas import (
    MixingParameters,
    PdimCoveringProvider,
    behavior_bound_nonparametric,
    behavior_bound_parametric,
    total_bound,
)
from gtml.config.settings import Settings
from gtml.core.errors import DomainError, InputError
from gtml.data.database import RunRegistry
from gtml.markov.engine import ErgodicityCertificate

app = FastAPI(title="GTML API", version="1.0.0")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def get_registry() -> RunRegistry:
    return RunRegistry(Settings().db_path)


class RevenueRequest(BaseModel):
    reserve: float = Field(ge=0)
    bids: List[float] = Field(min_length=1)
    clicks: List[Literal[0, 1]] = Field(min_length=2, max_length=2)


class BehaviorBoundRequest(BaseModel):
    method: Literal["parametric", "nonparametric"] = "nonparametric"
    T1: int = Field(gt=0)
    eps: float = Field(gt=0)
    n_behaviors: int = Field(ge=2)
    n_signals: int = Field(ge=1)
    N0: int = Field(1, ge=1)
    delta0: float = Field(gt=0, le=1)
    C1: float = Field(1.0, gt=0)
    C2: float = Field(1.0, gt=0)


class TotalBoundRequest(BehaviorBoundRequest):
    T2: int = Field(gt=0)
    delta: float = Field(gt=0)
    cover_size: int = Field(1, ge=1)
    pdim: int = Field(1, ge=1)
    beta0: float = Field(1.0, ge=0)
    gamma: float = Field(2.0, ge=0)
    s: float = Field(0.5, gt=0)
    alpha: float = Field(0.0, ge=0)
    K: float = Field(gt=0)
    C_M: float = Field(1.0, ge=0)
    split: float = Field(0.5, gt=0, lt=1)


def _bound_error(e: Exception) -> HTTPException:
    detail = {"error": getattr(e, "kind", "invalid_input"), "detail": str(e)}
    if isinstance(e, DomainError):
        detail["threshold"] = e.threshold
    return HTTPException(status_code=422, detail=detail)


def _finite(x: float) -> Optional[float]:
    return x if math.isfinite(x) else None


def _params(request) -> MixingParameters:
    fields = {k: getattr(request, k) for k in ("beta0", "gamma", "s", "alpha", "K") if hasattr(request, k)}
    return MixingParameters(C1=request.C1, C2=request.C2, **fields)


@app.get("/")
async def root():
    return {"message": "GTML API", "status": "running"}


@app.get("/stats")
async def get_stats(registry: RunRegistry = Depends(get_registry)):
    return registry.get_stats()


@app.get("/runs")
async def list_runs(command: Optional[str] = None, registry: RunRegistry = Depends(get_registry)):
    runs = registry.get_all_runs()
    if command:
        runs = [r for r in runs if r.get("command") == command]
    return {"runs": runs, "count": len(runs)}


@app.get("/runs/{run_id}")
async def get_run(run_id: int, registry: RunRegistry = Depends(get_registry)):
    run = registry.get_run(run_id)
    if not run:
        raise HTTPException(status_code=404, detail="Run not found")
    return run


@app.post("/gsp/revenue")
async def revenue(request: RevenueRequest):
    profile = BidProfile(tuple(request.bids))
    try:
        value = gsp_revenue(request.reserve, profile, request.clicks)
    except InputError as e:
        raise _bound_error(e)
    shown = shown_count(request.reserve, profile)
    return {
        "revenue": value,
        "loss": -value,
        "top3": list(profile.top3),
        "shown": shown,
        "signal": signal_label(shown, sum(request.clicks[:shown])),
    }


@app.post("/bounds/behavior")
async def behavior_bound(request: BehaviorBoundRequest):
    evaluator = behavior_bound_parametric if request.method == "parametric" else behavior_bound_nonparametric
    cert = ErgodicityCertificate(request.N0, request.delta0, "augmented", 0)
    try:
        bv = evaluator(request.T1, request.eps, _params(request), request.n_behaviors, request.n_signals, cert)
    except (DomainError, InputError, ValidationError) as e:
        raise _bound_error(e)
    return {"value": bv.value, "raw": _finite(bv.raw), "log_raw": _finite(bv.log_raw)}


@app.post("/bounds/total")
async def total(request: TotalBoundRequest):
    cert = ErgodicityCertificate(request.N0, request.delta0, "augmented", 0)
    try:
        params = _params(request)
        tb = total_bound(
            request.T1, request.T2, request.eps, params, request.n_behaviors, request.n_signals, cert,
            request.delta, request.cover_size, PdimCoveringProvider(request.K, request.n_behaviors, request.pdim),
            C_M=request.C_M, split=request.split, method=request.method,
        )
    except (DomainError, InputError, ValidationError) as e:
        raise _bound_error(e)
    return {
        "value": tb.value,
        "behavior": {"value": tb.behavior.value, "log_raw": _finite(tb.behavior.log_raw)},
        "mechanism": {"value": tb.mechanism.value, "log_raw": _finite(tb.mechanism.log_raw)},
        "eps1": _finite(tb.eps1),
        "eps2": tb.eps2,
    }


if __name__ == "__main__":
    import uvicorn
    uvicorn.run("gtml.api.server:app", host="0.0.0.0", port=8000, reload=True)
