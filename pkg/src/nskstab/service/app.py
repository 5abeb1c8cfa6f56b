"""FastAPI application exposing the toolkit's computations as endpoints."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__, runners
from ..config import ConfigError
from ..dispersion import BracketError
from ..linalg import LinAlgError
from ..profile import ProfileError
from . import schemas

app = FastAPI(
    title="nskstab",
    version=__version__,
    description=("Rayleigh-Taylor stability computations for capillary fluids: "
                 "critical capillary numbers, growth-rate spectra, normal modes, "
                 "linearized evolution and instability bookkeeping."),
)


def _run(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ConfigError, ProfileError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except (BracketError, LinAlgError, ArithmeticError) as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/v1/sigma-critical", response_model=schemas.SigmaCriticalResponse)
def sigma_critical(req: schemas.SigmaCriticalRequest) -> dict:
    return _run(runners.run_sigma_critical, req.to_config())


@app.post("/v1/gamma-spectrum", response_model=schemas.GammaSpectrumResponse)
def gamma_spectrum(req: schemas.GammaSpectrumRequest) -> dict:
    return _run(runners.run_gamma_spectrum, req.to_config(),
                k=req.k, lam=req.lam, count=req.count)


@app.post("/v1/dispersion", response_model=schemas.DispersionResponse)
def dispersion(req: schemas.DispersionRequest) -> dict:
    return _run(runners.run_dispersion, req.to_config(),
                threads=req.threads, include_rows=req.include_rows)


@app.post("/v1/modes", response_model=schemas.ModesResponse)
def modes(req: schemas.ModesRequest) -> dict:
    return _run(runners.compute_mode_documents, req.to_config(), k=req.k, j=req.j)


@app.post("/v1/evolve", response_model=schemas.EvolveResponse)
def evolve(req: schemas.EvolveRequest) -> dict:
    return _run(runners.run_evolve, req.to_config(), k=req.k, init=req.init,
                seed=req.seed, include_trajectory=req.include_trajectory)


@app.post("/v1/instability-plan")
def instability_plan(req: schemas.InstabilityPlanRequest) -> dict:
    return _run(runners.run_instability_plan, req.to_config(),
                mode_documents=req.mode_documents)


@app.post("/v1/check", response_model=schemas.CheckResponse)
def check(req: schemas.CheckRequest) -> dict:
    cfg = req.to_config()
    results = _run(runners.run_check, cfg)
    return {"results": results, "all_passed": all(r["passed"] for r in results),
            **cfg.stamp()}
