from fastapi import APIRouter
from fastapi.responses import JSONResponse

from app.schemas import CompareRequest, NetworkDescription, ReclockDelayRequest
from app.services import runs

router = APIRouter()

@router.post("/api/analyze")
async def analyze_endpoint(description: NetworkDescription):
    """
    Per-hop and end-to-end TAI bounds for every flow of the network.
    The exit code of the CLI is returned as a field; 2 means warnings.
    """
    report, _ = runs.analyze(description)
    return JSONResponse(report)

@router.post("/api/compare")
async def compare_endpoint(request: CompareRequest):
    rows = runs.compare(request)
    return JSONResponse(runs.compare_json(rows))

@router.post("/api/reclock/delay")
async def reclock_delay_endpoint(request: ReclockDelayRequest):
    return JSONResponse(runs.reclock(request))
