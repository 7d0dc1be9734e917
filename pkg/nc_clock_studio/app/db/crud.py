from sqlalchemy.orm import Session
from app.db import models
from typing import Optional
import json

RUN_TYPES = ("ANALYZE", "SIMULATE", "COMPARE", "VALIDATE_CLOCK")
FINISHED = ("done", "failed")

# Run CRUD
def create_run(db: Session, run_type: str, payload: Optional[dict] = None, schema_version: Optional[str] = None):
    if run_type not in RUN_TYPES:
        raise ValueError(f"Unknown run type: {run_type}")
    db_run = models.AnalysisRun(
        run_type=run_type,
        status="queued",
        payload_json=json.dumps(payload) if payload is not None else None,
        schema_version=schema_version
    )
    db.add(db_run)
    db.commit()
    db.refresh(db_run)
    return db_run

def get_run(db: Session, run_id: int):
    return db.query(models.AnalysisRun).filter(models.AnalysisRun.id == run_id).first()

def list_runs(db: Session, status: Optional[str] = None, skip: int = 0, limit: int = 100):
    query = db.query(models.AnalysisRun)
    if status:
        query = query.filter(models.AnalysisRun.status == status)
    return query.order_by(models.AnalysisRun.id.desc()).offset(skip).limit(limit).all()

def get_next_queued_run(db: Session):
    return db.query(models.AnalysisRun).filter(models.AnalysisRun.status == "queued").order_by(models.AnalysisRun.id.asc()).first()

def delete_finished_runs(db: Session) -> int:
    count = db.query(models.AnalysisRun).filter(models.AnalysisRun.status.in_(FINISHED)).delete(synchronize_session=False)
    db.commit()
    return count

def run_to_dict(run: models.AnalysisRun) -> dict:
    return {
        "id": run.id,
        "run_type": run.run_type,
        "status": run.status,
        "payload": json.loads(run.payload_json) if run.payload_json else None,
        "result": json.loads(run.result_json) if run.result_json else None,
        "artifact_path": run.artifact_path,
        "exit_code": run.exit_code,
        "schema_version": run.schema_version,
        "error": run.error,
        "created_at": run.created_at.isoformat() if run.created_at else None,
        "completed_at": run.completed_at.isoformat() if run.completed_at else None,
        "duration": run.duration,
    }

# Envelope presets
def get_presets(db: Session):
    return db.query(models.EnvelopePreset).order_by(models.EnvelopePreset.name.asc()).all()

def get_preset(db: Session, name: str):
    return db.query(models.EnvelopePreset).filter(models.EnvelopePreset.name == name).first()

def upsert_preset(db: Session, name: str, rho: str, eta: str, delta: Optional[str] = None, description: Optional[str] = None):
    db_preset = get_preset(db, name)
    if db_preset is None:
        db_preset = models.EnvelopePreset(name=name)
        db.add(db_preset)
    db_preset.rho = rho
    db_preset.eta = eta
    db_preset.delta = delta
    db_preset.description = description
    db.commit()
    db.refresh(db_preset)
    return db_preset

def preset_to_dict(preset: models.EnvelopePreset) -> dict:
    return {
        "name": preset.name,
        "rho": preset.rho,
        "eta": preset.eta,
        "delta": preset.delta,
        "description": preset.description,
    }

# System log
def add_log(db: Session, module: str, content: str, progress_info: Optional[str] = None, level: str = "INFO"):
    log = models.SystemLog(module=module, progress_info=progress_info, content=content, level=level)
    db.add(log)
    db.commit()
    return log
