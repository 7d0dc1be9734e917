import json
import logging
import os
from datetime import datetime
from typing import Any, Optional

import pytz

from app.config import config


class TimezoneFormatter(logging.Formatter):
    """Timestamps rendered in ``config.APP_TIMEZONE``."""

    def converter(self, timestamp):
        return datetime.fromtimestamp(timestamp, pytz.timezone(config.APP_TIMEZONE))

    def formatTime(self, record, datefmt=None):
        ct = self.converter(record.created)
        if datefmt:
            s = ct.strftime(datefmt)
        else:
            t = ct.strftime("%Y-%m-%d %H:%M:%S")
            s = "%s,%03d" % (t, record.msecs)
        return s


def setup_logging(verbose: Optional[bool] = None):
    handler = logging.StreamHandler()
    handler.setFormatter(TimezoneFormatter(fmt='[%(asctime)s] %(levelname)s: %(message)s', datefmt='%Y-%m-%d %H:%M:%S'))
    root = logging.getLogger()
    root.handlers = []  # Clear existing
    root.addHandler(handler)

    if verbose or (verbose is None and config.API_LOG):
        root.setLevel(logging.INFO)
    else:
        root.setLevel(logging.WARNING)

    # Per-release traces of the regulator simulators
    if config.SIM_LOG:
        logging.getLogger("app.services.simulation").setLevel(logging.DEBUG)
    if config.SQL_LOG:
        logging.getLogger("sqlalchemy.engine").setLevel(logging.INFO)


def to_output_path(name: str) -> str:
    """Absolute path of ``name`` inside the output directory (relative names only)."""
    if not name or os.path.isabs(name) or ".." in name.replace("\\", "/").split("/"):
        raise ValueError(f"invalid output file name: {name!r}")
    return os.path.join(config.OUTPUT_DIR, name)


def to_web_path(path: str):
    if not path:
        return ""
    path = path.replace("\\", "/")
    output_dir = config.OUTPUT_DIR.replace("\\", "/")
    if path.startswith(output_dir):
        rel_path = path[len(output_dir):].lstrip("/")
        return f"output/{rel_path}"
    return path


def dump_json(data: Any) -> str:
    """Stable JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
