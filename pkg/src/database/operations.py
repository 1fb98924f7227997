import sqlite3
import json
import datetime
import logging
import os
from typing import List, Dict, Optional

import config
from src.database.models import RunManifest

logger = logging.getLogger(__name__)

TIMESTAMP_FORMAT = '%Y-%m-%d %H:%M:%S'


def get_connection():
    """Get a connection to the run registry database."""
    # Ensure the directory exists
    directory = os.path.dirname(config.DATABASE_PATH)
    if directory:
        os.makedirs(directory, exist_ok=True)

    conn = sqlite3.connect(config.DATABASE_PATH)
    conn.row_factory = sqlite3.Row
    return conn


def create_tables():
    """Create the runs table if it doesn't exist."""
    conn = get_connection()
    cursor = conn.cursor()

    cursor.execute('''
    CREATE TABLE IF NOT EXISTS runs (
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        command TEXT NOT NULL,
        config_hash TEXT NOT NULL,
        config_path TEXT,
        toolkit_version TEXT NOT NULL,
        seeds TEXT NOT NULL,
        stage_timings TEXT NOT NULL,
        outputs TEXT NOT NULL,
        status TEXT NOT NULL,
        wall_clock_s REAL NOT NULL,
        date TEXT NOT NULL,
        timestamp TEXT NOT NULL
    )
    ''')

    conn.commit()
    conn.close()
    logger.debug("Run registry tables created or verified.")


def record_run(manifest: RunManifest) -> Optional[int]:
    """
    Insert a finished run into the registry.

    Args:
        manifest (RunManifest): The run to record

    Returns:
        int: The new row id, or None if the registry could not be written
    """
    try:
        create_tables()
        conn = get_connection()
        cursor = conn.cursor()

        cursor.execute(
            "INSERT INTO runs (command, config_hash, config_path, toolkit_version, seeds, stage_timings, "
            "outputs, status, wall_clock_s, date, timestamp) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
            (
                manifest.command,
                manifest.config_hash,
                manifest.config_path,
                manifest.toolkit_version,
                json.dumps(manifest.seeds, sort_keys=True),
                json.dumps(manifest.stage_timings, sort_keys=True),
                json.dumps(manifest.outputs),
                manifest.status,
                manifest.wall_clock_s,
                manifest.started_at.strftime('%Y-%m-%d'),
                manifest.started_at.strftime(TIMESTAMP_FORMAT),
            ),
        )
        run_id = cursor.lastrowid

        conn.commit()
        conn.close()
        manifest.id = run_id
        logger.info(f"Recorded run {run_id} ({manifest.command}) in the registry")
        return run_id

    except sqlite3.Error as e:
        logger.error(f"Error recording run: {e}")
        return None


def _row_to_run(row) -> Dict:
    run = dict(row)
    # Parse JSON strings back to Python objects
    for key in ('seeds', 'stage_timings', 'outputs'):
        run[key] = json.loads(run[key])
    run['timestamp'] = datetime.datetime.strptime(run['timestamp'], TIMESTAMP_FORMAT)
    return run


def get_runs(since: Optional[datetime.date] = None, command: Optional[str] = None) -> List[Dict]:
    """
    Get recorded runs, oldest first.

    Args:
        since (datetime.date, optional): Only runs started on or after this date
        command (str, optional): Only runs of this subcommand

    Returns:
        List[Dict]: Registry rows with seeds, timings and outputs decoded
    """
    try:
        create_tables()
        query = "SELECT * FROM runs"
        clauses, params = [], []
        if since is not None:
            clauses.append("date >= ?")
            params.append(since.strftime('%Y-%m-%d'))
        if command is not None:
            clauses.append("command = ?")
            params.append(command)
        if clauses:
            query += " WHERE " + " AND ".join(clauses)
        query += " ORDER BY timestamp, id"

        conn = get_connection()
        cursor = conn.cursor()
        cursor.execute(query, params)
        runs = [_row_to_run(row) for row in cursor.fetchall()]
        conn.close()
        return runs

    except sqlite3.Error as e:
        logger.error(f"Error retrieving runs: {e}")
        return []


def get_run(run_id: int) -> Dict:
    """Get a single run by id; empty dict if it does not exist."""
    try:
        create_tables()
        conn = get_connection()
        cursor = conn.cursor()
        cursor.execute("SELECT * FROM runs WHERE id = ?", (run_id,))
        row = cursor.fetchone()
        conn.close()
        return _row_to_run(row) if row else {}

    except sqlite3.Error as e:
        logger.error(f"Error retrieving run {run_id}: {e}")
        return {}
