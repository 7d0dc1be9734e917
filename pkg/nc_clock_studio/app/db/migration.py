import logging
from sqlalchemy import text
from app.db.session import engine

logger = logging.getLogger(__name__)

# Columns added after the first release of the run table
LATE_COLUMNS = {
    "nc_analysis_run": [
        ("exit_code", "INTEGER"),
        ("schema_version", "VARCHAR"),
        ("artifact_path", "TEXT"),
    ],
}

def check_and_migrate_db():
    """
    Simple migration logic to ensure new columns exist.
    Run this on app startup.
    """
    for table, columns in LATE_COLUMNS.items():
        with engine.begin() as conn:
            try:
                # SQLite only
                existing = conn.execute(text(f"PRAGMA table_info({table})")).fetchall()
                if not existing:
                    # New database, create_all builds the full table
                    continue
                column_names = [col[1] for col in existing]
                for name, ddl in columns:
                    if name not in column_names:
                        logger.info("Migrating: adding %s column to %s", name, table)
                        conn.execute(text(f"ALTER TABLE {table} ADD COLUMN {name} {ddl}"))
            except Exception as e:
                logger.warning("Migration check failed for %s: %s", table, e)
