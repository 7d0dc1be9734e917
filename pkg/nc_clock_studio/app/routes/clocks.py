from fastapi import APIRouter, Depends
from fastapi.responses import JSONResponse
from sqlalchemy.orm import Session

from app.db import crud, session
from app.schemas import ClockValidationRequest
from app.services import runs

router = APIRouter()

@router.post("/api/clocks/validate")
async def validate_clock_endpoint(request: ClockValidationRequest):
    return JSONResponse(runs.validate_clock(request))

@router.get("/api/clocks/presets")
async def list_presets(db: Session = Depends(session.get_db)):
    return JSONResponse([crud.preset_to_dict(p) for p in crud.get_presets(db)])
