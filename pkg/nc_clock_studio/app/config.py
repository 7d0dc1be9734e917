import os
from dotenv import load_dotenv

load_dotenv()

class Config:
    PROJECT_NAME = "NC Clock Studio"
    DATABASE_URL = os.getenv("NCS_DATABASE_URL", "sqlite:///./nc_clock_studio.db")

    DEFAULT_PRESET = os.getenv("NCS_DEFAULT_PRESET", "tsn-nonsync")
    APP_TIMEZONE = os.getenv("APP_TIMEZONE", "UTC")

    # Logging Config
    SQL_LOG = os.getenv("SQL_LOG", "0") == "1"
    API_LOG = os.getenv("API_LOG", "1") == "1"
    SIM_LOG = os.getenv("SIM_LOG", "0") == "1"

    # Background worker
    TASK_WORKER = os.getenv("TASK_WORKER", "1") == "1"
    TASK_POLL_SECONDS = float(os.getenv("TASK_POLL_SECONDS", "2"))

    OUTPUT_DIR = os.getenv(
        "NCS_OUTPUT_DIR",
        os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(__file__))), "output"),
    )

config = Config()

# Ensure output directory exists
os.makedirs(config.OUTPUT_DIR, exist_ok=True)
