import threading
import time
import json
import logging
from datetime import datetime
from typing import Optional
from sqlalchemy.orm import Session
from app.config import config
from app.db.session import SessionLocal
from app.db import crud, models
from app.services import runs
from app.utils import to_output_path, to_web_path

logger = logging.getLogger(__name__)

class TaskManager:
    def __init__(self, poll_seconds: Optional[float] = None):
        self.running = False
        self.thread = None
        self.poll_seconds = config.TASK_POLL_SECONDS if poll_seconds is None else poll_seconds

    def start(self):
        if not self.running:
            self.running = True
            self.thread = threading.Thread(target=self._worker_loop, daemon=True)
            self.thread.start()
            logger.info("Task Manager started.")

    def stop(self):
        self.running = False
        if self.thread:
            self.thread.join(timeout=2)
            logger.info("Task Manager stopped.")

    def log_system(self, db: Session, module: str, progress: str, content: str, level: str = "INFO"):
        """Helper to write to SystemLog table"""
        try:
            crud.add_log(db, module, content, progress_info=progress, level=level)
        except Exception as e:
            logger.error(f"Failed to write system log: {e}")

    def _worker_loop(self):
        while self.running:
            db = SessionLocal()
            try:
                if not self.run_next(db):
                    time.sleep(self.poll_seconds)
            except Exception as e:
                logger.error(f"Worker loop error: {e}")
                time.sleep(5)
            finally:
                db.close()

    def run_next(self, db: Session) -> bool:
        """Process the oldest queued run; False when the queue is empty."""
        run = crud.get_next_queued_run(db)
        if run is None:
            return False
        self.process_run(db, run)
        return True

    def process_run(self, db: Session, run: models.AnalysisRun):
        logger.info(f"Processing run {run.id}: {run.run_type}")
        run.status = "running"
        run.started_at = datetime.utcnow()
        db.commit()

        module = f"[{run.run_type}]"
        progress = f"[run {run.id}]"
        try:
            payload = json.loads(run.payload_json) if run.payload_json else {}
            result, exit_code, artifact = runs.execute(run.run_type, payload)
            run.result_json = json.dumps(result)
            run.exit_code = exit_code
            if artifact is not None:
                path = to_output_path(f"run_{run.id}_{run.run_type.lower()}.csv")
                with open(path, "w", encoding="utf-8", newline="") as fh:
                    fh.write(artifact)
                run.artifact_path = to_web_path(path)
            run.status = "done"
            self.log_system(db, module, progress, f"done, exit code {exit_code}")
        except Exception as e:
            logger.warning(f"Run {run.id} failed: {e}")
            run.status = "failed"
            run.error = str(e)
            run.exit_code = 1
            self.log_system(db, module, progress, f"failed: {e}", level="ERROR")

        run.completed_at = datetime.utcnow()
        run.duration = (run.completed_at - run.started_at).total_seconds()
        db.commit()

task_manager = TaskManager()
