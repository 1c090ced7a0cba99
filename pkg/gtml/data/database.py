import json
import os
import sqlite3
from datetime import datetime
from typing import Any, Dict, Optional

import pandas as pd

STATUSES = ("running", "ok", "config_error", "numerical_error", "failed")


class RunRegistry:
    """sqlite record of every experiment invocation."""

    def __init__(self, db_path="gtml_runs.db"):
        self.db_path = db_path
        parent = os.path.dirname(db_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        self.initialize_db()

    def initialize_db(self):
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()
        cursor.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY,
                command TEXT,
                config_path TEXT,
                seed INTEGER,
                output_path TEXT,
                status TEXT,
                started_at TEXT,
                finished_at TEXT,
                summary TEXT
            )
        """)
        conn.commit()
        conn.close()

    def start_run(self, command: str, config_path: str, seed: Optional[int], output_path: str) -> int:
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()
        cursor.execute(
            "INSERT INTO runs (command, config_path, seed, output_path, status, started_at) VALUES (?,?,?,?,?,?)",
            (command, str(config_path), seed, str(output_path), "running", datetime.now().isoformat()),
        )
        conn.commit()
        run_id = cursor.lastrowid
        conn.close()
        return run_id

    def finish_run(self, run_id: int, status: str, summary: Optional[Dict[str, Any]] = None) -> bool:
        if status not in STATUSES:
            raise ValueError(f"unknown run status {status!r}")
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()
        cursor.execute(
            "UPDATE runs SET status = ?, finished_at = ?, summary = ? WHERE id = ?",
            (status, datetime.now().isoformat(), json.dumps(summary or {}, default=str), run_id),
        )
        conn.commit()
        affected = cursor.rowcount
        conn.close()
        return affected > 0

    def get_all_runs(self):
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        cursor = conn.cursor()
        cursor.execute("SELECT * FROM runs ORDER BY id")
        rows = cursor.fetchall()
        conn.close()
        return [self._decode(dict(row)) for row in rows]

    def get_run(self, run_id: int):
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        cursor = conn.cursor()
        cursor.execute("SELECT * FROM runs WHERE id = ?", (run_id,))
        row = cursor.fetchone()
        conn.close()
        return self._decode(dict(row)) if row else None

    def get_stats(self):
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()
        cursor.execute("SELECT COUNT(*) FROM runs")
        total = cursor.fetchone()[0]
        cursor.execute("SELECT status, COUNT(*) FROM runs GROUP BY status")
        by_status = dict(cursor.fetchall())
        cursor.execute("SELECT command, COUNT(*) FROM runs GROUP BY command")
        by_command = dict(cursor.fetchall())
        conn.close()
        return {"total_runs": total, "by_status": by_status, "by_command": by_command}

    def export_runs(self, path="exports/runs.csv"):
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        df = pd.DataFrame(self.get_all_runs())
        if "summary" in df:
            df["summary"] = df["summary"].map(json.dumps)
        df.to_csv(path, index=False)
        return path

    @staticmethod
    def _decode(row: Dict[str, Any]) -> Dict[str, Any]:
        row["summary"] = json.loads(row["summary"]) if row.get("summary") else {}
        return row
