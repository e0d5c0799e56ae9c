"""FastAPI Application Entry Point

Provides endpoints for:
1. Experiment runs and breaking-point sweeps
2. Chain growth tables and audits of exported runs
3. Trace validation (upload a JSON-lines trace, get its signatures and fingerprint) and discovery curves
"""

from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from pydantic import BaseModel
from typing import List, Optional
from pathlib import Path
import logging

from config import OUTPUT_DIR, STATIC_DIR
from devsim.io import trace_from_lines
from devsim.models import TraceError
from harness.audit import audit
from harness.discovery import signature_discovery_report
from harness.growth import chain_growth_report
from harness.models import (
    AuditReport,
    DiscoveryReport,
    ExperimentConfig,
    GrowthReport,
    MetricsReport,
    SweepRequest,
    SweepResult,
)
from harness.runner import run_experiment
from harness.sweep import breaking_point_sweep
from ledger.models import LedgerError
from sigcore.models import SignatureError
from sigcore.signatures import compute_fingerprint, signature_set

logger = logging.getLogger(__name__)

app = FastAPI(title="SERENIoT Simulator API", version="0.1.0")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

DOMAIN_ERRORS = (TraceError, SignatureError, LedgerError, ValueError)


@app.get("/health")
def health():
    return {"status": "ok"}


@app.get("/download")
def download_file(file: str):
    """Download a file from the output or static directories."""
    try:
        file_path = Path(file).resolve()
        allowed_dirs = [Path(OUTPUT_DIR).resolve(), Path(STATIC_DIR).resolve()]
        if not any(file_path.is_relative_to(d) for d in allowed_dirs):
            raise HTTPException(status_code=403, detail="Access denied")
        if not file_path.is_file():
            raise HTTPException(status_code=404, detail="File not found")
        return FileResponse(
            path=str(file_path),
            filename=file_path.name,
            media_type="application/octet-stream",
        )
    except HTTPException:
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


# -------------------------------
# Pydantic Models
# -------------------------------


class ExportRequest(BaseModel):
    export_dir: str
    bucket: float = 3600.0
    device_types: Optional[int] = None
    events: Optional[str] = None


class DiscoveryRequest(BaseModel):
    devices: Optional[List[str]] = None
    duration: float = 3600.0
    bucket: float = 60.0
    seed: int = 0


class TraceSummary(BaseModel):
    device_type: str
    records: int
    signatures: int
    fingerprint: str
    signature_list: List[str]


def _existing_dir(path: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise HTTPException(status_code=404, detail=f"Export directory not found: {path}")
    return p


# -------------------------------
# Endpoints
# -------------------------------


@app.post("/experiments/run", response_model=MetricsReport)
def run(config: ExperimentConfig, seed: Optional[int] = None, write: bool = True):
    """Run one seed of an experiment and return its metrics report."""
    try:
        return run_experiment(config, seed=seed, write=write)
    except DOMAIN_ERRORS as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.exception("experiment run failed")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/experiments/sweep", response_model=SweepResult)
def sweep(request: SweepRequest):
    try:
        return breaking_point_sweep(request.base, request.fractions, request.repetitions)
    except DOMAIN_ERRORS as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.exception("sweep failed")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/growth", response_model=GrowthReport)
def growth(request: ExportRequest):
    export_dir = _existing_dir(request.export_dir)
    try:
        return chain_growth_report(export_dir, bucket=request.bucket, device_types=request.device_types)
    except DOMAIN_ERRORS as e:
        raise HTTPException(status_code=400, detail=str(e))


@app.post("/audit", response_model=AuditReport)
def audit_export(request: ExportRequest):
    export_dir = _existing_dir(request.export_dir)
    events = Path(request.events) if request.events else None
    if events is not None and not events.is_file():
        raise HTTPException(status_code=404, detail=f"Events file not found: {request.events}")
    try:
        return audit(export_dir, events)
    except DOMAIN_ERRORS as e:
        raise HTTPException(status_code=400, detail=str(e))


@app.post("/traces/discovery", response_model=DiscoveryReport)
def discovery(request: DiscoveryRequest):
    """Signature discovery curves of bundled traces."""
    try:
        return signature_discovery_report(request.devices, request.duration, request.bucket, request.seed)
    except DOMAIN_ERRORS as e:
        raise HTTPException(status_code=400, detail=str(e))


@app.post("/traces/validate", response_model=TraceSummary)
async def validate_trace(trace_file: UploadFile = File(..., description="JSON-lines device trace")):
    """Validate an uploaded trace and report its signature set."""
    raw = await trace_file.read()
    try:
        text = raw.decode("utf-8")
        trace = trace_from_lines(text.splitlines(), Path(trace_file.filename or "trace").stem)
        sigs = signature_set(trace.records)
        return TraceSummary(
            device_type=trace.device_type,
            records=len(trace.records),
            signatures=len(sigs),
            fingerprint=compute_fingerprint(sigs).hex,
            signature_list=sorted(s.hex for s in sigs),
        )
    except UnicodeDecodeError:
        raise HTTPException(status_code=400, detail="Trace must be UTF-8 text")
    except DOMAIN_ERRORS as e:
        raise HTTPException(status_code=400, detail=str(e))


if __name__ == "__main__":
    # Development server startup (optional): uvicorn api:app --reload --app-dir src
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=8000)
