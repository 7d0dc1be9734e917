from typing import Optional

from fastapi import APIRouter, Depends
from fastapi.responses import JSONResponse
from sqlalchemy.orm import Session

from app.db import crud, session
from app.schemas import SCHEMA_VERSION, RunRequest

router = APIRouter()

@router.post("/api/runs")
async def create_run_endpoint(request: RunRequest, db: Session = Depends(session.get_db)):
    """Queue a run for the background worker."""
    run = crud.create_run(db, request.run_type, request.payload, schema_version=SCHEMA_VERSION)
    return JSONResponse(crud.run_to_dict(run), status_code=202)

@router.get("/api/runs")
async def list_runs_endpoint(status: Optional[str] = None, limit: int = 100, db: Session = Depends(session.get_db)):
    return JSONResponse([crud.run_to_dict(r) for r in crud.list_runs(db, status=status, limit=limit)])

@router.get("/api/runs/{run_id}")
async def get_run_endpoint(run_id: int, db: Session = Depends(session.get_db)):
    run = crud.get_run(db, run_id)
    if run is None:
        return JSONResponse({"error": f"run {run_id} not found"}, status_code=404)
    return JSONResponse(crud.run_to_dict(run))

@router.post("/api/runs/clear")
async def clear_runs_endpoint(db: Session = Depends(session.get_db)):
    # Only finished runs are removed
    try:
        count = crud.delete_finished_runs(db)
    except Exception as e:
        return JSONResponse({"error": str(e)}, status_code=500)
    return JSONResponse({"deleted": count})
