"""FastAPI service wrapping the simulator core.

Endpoints take fully-inlined configs (trace files go through the ingest
endpoints first) and return results plus artifact contents; the service
itself never touches the filesystem, so many clients can share one
instance.  Configuration errors map to 400 with ``kind="validation"``,
invariant violations to 500 with ``kind="invariant"`` -- the CLI turns
these into exit codes 1 and 2.
"""

from __future__ import annotations

import json
import math

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import build_experiment, validate_config
from ..errors import ConfigurationError, EnumerationBudgetError, InvariantViolationError, ModelViolationError
from ..experiment import run_experiment
from ..ingest import ingest_price_trace_texts, parse_wind_trace
from ..oracle import OracleInstance, oracle_report
from . import schemas

__all__ = ["create_app", "app"]


def _sanitize(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def create_app() -> FastAPI:
    app = FastAPI(title="gridwelfare", version=__version__)

    @app.exception_handler(ConfigurationError)
    async def _config_error(request, exc: ConfigurationError):
        payload = schemas.ErrorPayload(kind="validation", message=str(exc))
        return JSONResponse(status_code=400, content=payload.model_dump())

    @app.exception_handler(EnumerationBudgetError)
    async def _budget_error(request, exc: EnumerationBudgetError):
        payload = schemas.ErrorPayload(kind="validation", message=str(exc))
        return JSONResponse(status_code=400, content=payload.model_dump())

    @app.exception_handler(InvariantViolationError)
    async def _invariant_error(request, exc: InvariantViolationError):
        payload = schemas.ErrorPayload(kind="invariant", message=str(exc), details=_sanitize(exc.details))
        return JSONResponse(status_code=500, content=payload.model_dump())

    @app.exception_handler(ModelViolationError)
    async def _model_error(request, exc: ModelViolationError):
        payload = schemas.ErrorPayload(kind="invariant", message=str(exc))
        return JSONResponse(status_code=500, content=payload.model_dump())

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/validate", response_model=schemas.ValidateResponse)
    def validate(request: schemas.ValidateRequest):
        report = validate_config(request.config)
        return schemas.ValidateResponse(ok=report["ok"], report=_sanitize(report))

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(request: schemas.SimulateRequest):
        result = run_experiment(request.config)
        return schemas.SimulateResponse(
            summaries=[schemas.RunSummaryModel(**vars(s)) for s in result.summaries],
            artifacts=result.artifacts,
            oracle=_sanitize(result.oracle),
        )

    # /sweep is /simulate with a list-valued eta; kept as its own route so
    # clients can be explicit about intent
    @app.post("/sweep", response_model=schemas.SimulateResponse)
    def sweep(request: schemas.SimulateRequest):
        return simulate(request)

    @app.post("/oracle", response_model=schemas.OracleResponse)
    def oracle(request: schemas.OracleRequest):
        built = build_experiment(request.config)
        report = oracle_report(OracleInstance(built.model, built.process))
        single = report["single_price"]
        feasible = bool(single.feasible)
        doc = {
            "feasible": feasible,
            "single_price_value": single.value if feasible else None,
            "relaxed_value": report["relaxed_value"] if feasible else None,
            "price_of_single_price": report["price_of_single_price"] if feasible else None,
            "target_duals": None if single.target_duals is None else [float(x) for x in single.target_duals],
            "target_slacks": None if single.target_slacks is None else [float(x) for x in single.target_slacks],
            "certificate": _sanitize(single.certificate),
        }
        return schemas.OracleResponse(**doc, report_json=json.dumps(_sanitize(doc), indent=2, sort_keys=True))

    @app.post("/ingest/prices", response_model=schemas.IngestPricesResponse)
    def ingest_prices(request: schemas.IngestPricesRequest):
        process = ingest_price_trace_texts(
            [(f.name, f.content) for f in request.files], request.t_slots
        )
        market = {
            "mode": "iid",
            "states": [
                {"beta": s.beta.tolist(), "alpha_bar": s.alpha_bar.tolist()} for s in process.states
            ],
            "probabilities": process.probabilities.tolist(),
            "beta_max": process.beta_max,
            "alpha_max": process.alpha_max,
        }
        return schemas.IngestPricesResponse(
            market=market, beta_max=process.beta_max, alpha_max=process.alpha_max
        )

    @app.post("/ingest/wind", response_model=schemas.IngestWindResponse)
    def ingest_wind(request: schemas.IngestWindRequest):
        dists = parse_wind_trace(request.name, request.content, request.t_slots)
        atoms = [[(float(v), float(w)) for v, w in zip(d.values, d.weights)] for d in dists]
        return schemas.IngestWindResponse(atoms_per_slot=atoms)

    return app


app = create_app()
