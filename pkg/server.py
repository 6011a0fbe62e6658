import logging
from typing import List, Optional

import uvicorn
from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from config import ConfigError, DrfParams, FsmOptParams, ModelDocument, get_settings
from core_model import derive_seed, model_from_document
from empirical import block_empirical, dms_block_distribution, join_with_channel
from errors import BudgetExceeded, CapExceeded, TableTooLarge, WzToolkitError
from experiment_manager import SEED_DRF, curve_rows
from fsm_search import SearchGrid, operational_optimum
from growth_experiments import HeaderBudget, maxent_distribution, theta_sweep
from wz_solver import default_lambda_grid, drf_curve

logger = logging.getLogger(__name__)

app = FastAPI(title="Side-information coding toolkit")

# Enable CORS for local development
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

settings = get_settings()


# --- Error mapping ---

@app.exception_handler(WzToolkitError)
async def toolkit_error_handler(request: Request, exc: WzToolkitError):
    if isinstance(exc, ConfigError):
        code = 422
    elif isinstance(exc, (BudgetExceeded, CapExceeded, TableTooLarge)):
        code = 413
    else:
        code = 400
    logger.warning("%s on %s: %s", type(exc).__name__, request.url.path, exc)
    return JSONResponse(status_code=code, content={"detail": str(exc), "error": type(exc).__name__})


# --- Models ---

class DrfRequest(BaseModel):
    model: ModelDocument
    params: DrfParams = Field(default_factory=DrfParams)
    seed: int = 0


class FsmOptRequest(BaseModel):
    model: ModelDocument
    params: FsmOptParams = Field(default_factory=FsmOptParams)
    budget: Optional[int] = None


class SweepRequest(BaseModel):
    theta: float = Field(gt=0.0)
    ns: List[int]
    alpha: int = Field(default=2, ge=1)
    beta: int = Field(default=2, ge=1)
    gamma: int = Field(default=2, ge=1)


class MaxEntRequest(BaseModel):
    rho0: List[float]
    delta: float


# --- Endpoints ---

@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/drf")
def post_drf(req: DrfRequest):
    ch, rho, x = model_from_document(req.model)
    params = req.params
    if params.dms:
        block = dms_block_distribution(params.dms, params.block)
    elif x is not None:
        block = block_empirical(x, params.block)
    else:
        raise HTTPException(status_code=400, detail="drf needs 'model.sequence' or 'params.dms'")
    joint = join_with_channel(block, ch, settings.table_cap)
    curve = drf_curve(joint, params.lambdas or default_lambda_grid(params.lambda_count),
                      params.usize or block.size + 1, derive_seed(req.seed, SEED_DRF), params.restarts, rho)
    return {"points": curve_rows(curve), "hull": [[p.rate, p.distortion] for p in curve.hull]}


@app.post("/fsm-opt")
def post_fsm_opt(req: FsmOptRequest):
    ch, rho, x = model_from_document(req.model)
    if x is None:
        raise HTTPException(status_code=400, detail="fsm-opt needs 'model.sequence'")
    doc, params = req.model, req.params
    grid = SearchGrid(params.states, params.delay, params.lmax, doc.alphabet_x, doc.alphabet_y, doc.alphabet_xhat,
                      req.budget or settings.budget)
    return operational_optimum(x, params.rate, grid, ch, rho).to_dict()


@app.get("/growth/bits")
def get_header_bits(states: int, alpha: int = 2, beta: int = 2, gamma: int = 2, max_delay: int = 0):
    if min(states, alpha, beta, gamma) < 1 or max_delay < 0:
        raise HTTPException(status_code=400, detail="states and alphabet sizes must be >= 1")
    budget = HeaderBudget(states, alpha, beta, gamma, max_delay)
    return {"tree_bits": budget.tree_bits, "output_bits": budget.output_bits,
            "transition_bits": budget.transition_bits, "delay_bits": budget.delay_bits, "total": budget.total}


@app.post("/growth/sweep")
def post_sweep(req: SweepRequest):
    rows = theta_sweep(req.theta, req.ns, req.alpha, req.beta, req.gamma)
    return [{"n": r.n, "M_n": r.states, "header_bits": r.header_bits, "header_bits_per_n": r.normalized}
            for r in rows]


@app.post("/maxent")
def post_maxent(req: MaxEntRequest):
    return maxent_distribution(req.rho0, req.delta).to_dict()


if __name__ == "__main__":
    uvicorn.run(app, host="0.0.0.0", port=8000)
