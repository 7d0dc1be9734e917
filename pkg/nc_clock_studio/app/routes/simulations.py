from fastapi import APIRouter
from fastapi.responses import JSONResponse

from app.schemas import SimulateRequest
from app.services import runs
from app.services.simulation.scenarios import SCENARIOS, build_scenario
from app.utils import to_output_path, to_web_path

router = APIRouter()

@router.get("/api/scenarios")
async def list_scenarios():
    return JSONResponse({"scenarios": list(SCENARIOS)})

@router.get("/api/scenarios/{name}")
async def describe_scenario(name: str):
    return JSONResponse(build_scenario(name).describe())

@router.post("/api/simulate/{name}")
async def simulate_endpoint(name: str, request: SimulateRequest = SimulateRequest()):
    summary, output = runs.simulate(name, request.params, request.periods)
    if request.write_csv:
        path = to_output_path(f"{name}_traces.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(output.csv_text)
        summary["traces_csv"] = to_web_path(path)
    return JSONResponse(summary)
