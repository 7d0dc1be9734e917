import os
import tempfile

# The app reads its configuration at import time
_TMP = tempfile.mkdtemp(prefix="ncs-tests-")
os.environ["NCS_DATABASE_URL"] = "sqlite:///" + os.path.join(_TMP, "test.db").replace("\\", "/")
os.environ["NCS_OUTPUT_DIR"] = os.path.join(_TMP, "output")
os.environ["TASK_WORKER"] = "0"
os.environ["API_LOG"] = "0"

import pytest


@pytest.fixture(scope="session")
def app():
    from app.main import app as fastapi_app
    return fastapi_app


@pytest.fixture
def client(app):
    from fastapi.testclient import TestClient
    with TestClient(app) as test_client:
        yield test_client


@pytest.fixture
def db(app):
    from app.db.session import SessionLocal
    session = SessionLocal()
    try:
        yield session
    finally:
        session.close()


@pytest.fixture
def tsn():
    from app.services.netcalc.clocks import PRESETS
    return PRESETS["tsn-nonsync"]
