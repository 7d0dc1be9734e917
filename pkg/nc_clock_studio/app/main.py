import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from app.config import config
from app.db import models
from app.db.migration import check_and_migrate_db
from app.db.session import engine
from app.routes import analysis, clocks, runs, simulations, system
from app.services.netcalc.errors import NetCalcError
# Import the global task_manager instance instead of class
from app.services.tasks.manager import task_manager
from app.utils import setup_logging

setup_logging()

if config.API_LOG:
    logging.info("NC Clock Studio logging initialized (%s)", config.APP_TIMEZONE)

# Run simple migration check
check_and_migrate_db()

# Create tables
models.Base.metadata.create_all(bind=engine)

# Seed envelope presets
try:
    from app.db.seeds import seed_envelope_presets
    from app.db.session import SessionLocal
    db = SessionLocal()
    try:
        seed_envelope_presets(db)
        if config.API_LOG:
            logging.info("Envelope presets seeded successfully.")
    except Exception as e:
        logging.error(f"Failed to seed envelope presets: {e}")
    finally:
        db.close()
except ImportError:
    logging.warning("Seeds module not found, skipping seeding.")

app = FastAPI(title=config.PROJECT_NAME)


@app.exception_handler(NetCalcError)
async def netcalc_error_handler(request: Request, exc: NetCalcError):
    return JSONResponse({"error": exc.code, "detail": str(exc)}, status_code=400)


@app.on_event("startup")
async def startup_event():
    if config.TASK_WORKER:
        task_manager.start()


@app.on_event("shutdown")
async def shutdown_event():
    task_manager.stop()


# Include Routers
app.include_router(analysis.router)
app.include_router(simulations.router)
app.include_router(clocks.router)
app.include_router(runs.router)
app.include_router(system.router)


@app.get("/")
async def read_root():
    return JSONResponse({"name": config.PROJECT_NAME, "version": system.read_version()})


if __name__ == "__main__":
    import uvicorn
    uvicorn.run("app.main:app", host="127.0.0.1", port=8000, reload=True)
