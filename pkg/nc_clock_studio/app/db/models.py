from sqlalchemy import Column, Integer, String, Text, DateTime, Float
from datetime import datetime
from app.db.session import Base

class EnvelopePreset(Base):
    __tablename__ = "nc_envelope_preset"

    id = Column(Integer, primary_key=True, index=True)
    name = Column(String, nullable=False, unique=True) # e.g. "tsn-nonsync"
    rho = Column(String, nullable=False) # rational string, e.g. "5001/5000"
    eta = Column(String, nullable=False)
    delta = Column(String, nullable=True) # NULL for non-synchronized networks
    description = Column(Text, nullable=True)

    created_at = Column(DateTime, default=datetime.utcnow)
    updated_at = Column(DateTime, default=datetime.utcnow, onupdate=datetime.utcnow)

class SystemLog(Base):
    __tablename__ = "nc_system_log"

    id = Column(Integer, primary_key=True, index=True)
    timestamp = Column(DateTime, default=datetime.utcnow)
    module = Column(String, nullable=False) # e.g. [SIMULATE]
    progress_info = Column(String, nullable=True) # e.g. [run 3]
    content = Column(Text, nullable=False)
    level = Column(String, default="INFO")

class AnalysisRun(Base):
    __tablename__ = "nc_analysis_run"

    id = Column(Integer, primary_key=True, index=True)
    run_type = Column(String, nullable=False) # ANALYZE | SIMULATE | COMPARE | VALIDATE_CLOCK
    status = Column(String, default="queued") # queued/running/done/failed
    payload_json = Column(Text, nullable=True)
    result_json = Column(Text, nullable=True)
    artifact_path = Column(Text, nullable=True) # CSV written to the output dir
    exit_code = Column(Integer, nullable=True)
    schema_version = Column(String, nullable=True)
    error = Column(Text, nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow)
    started_at = Column(DateTime, nullable=True)
    completed_at = Column(DateTime, nullable=True)
    duration = Column(Float, nullable=True)
    updated_at = Column(DateTime, default=datetime.utcnow, onupdate=datetime.utcnow)
