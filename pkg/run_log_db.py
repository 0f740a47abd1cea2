"""
Run Log Database Module
SQLite log of CLI runs and the experiment reports they produced
"""
import json
import sqlite3
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, Optional

import pandas as pd
from loguru import logger

import config


class RunLogDB:
    """Manages run log database operations"""

    def __init__(self, db_path: Optional[str] = None):
        """
        Initialize the run log

        Args:
            db_path: Path to SQLite database file (default: data/runs.db)
        """
        if db_path is None:
            db_path = config.RUN_LOG_DB

        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self.conn = None
        config.setup_logging()
        logger.debug(f"Run log initialized: {self.db_path}")

    def connect(self):
        """Connect to database"""
        try:
            self.conn = sqlite3.connect(self.db_path)
            self.conn.row_factory = sqlite3.Row
            return self.conn
        except Exception as e:
            logger.error(f"Error connecting to run log: {e}")
            raise

    def close(self):
        """Close database connection"""
        if self.conn:
            self.conn.close()
            self.conn = None

    def create_tables(self):
        """Create all required tables"""
        try:
            self.connect()
            cursor = self.conn.cursor()

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    created_at TIMESTAMP NOT NULL,
                    command VARCHAR(20) NOT NULL,
                    config_hash CHAR(64) NOT NULL,
                    seed INTEGER,
                    outcome VARCHAR(10) NOT NULL CHECK(outcome IN ('pass', 'fail', 'error', 'ok')),
                    exit_code INTEGER NOT NULL,
                    report_json TEXT
                )
            """)

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS experiment_reports (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id INTEGER NOT NULL,
                    experiment VARCHAR(30) NOT NULL,
                    lhs REAL,
                    rhs REAL,
                    abs_gap REAL,
                    rel_gap REAL,
                    stderr REAL,
                    skip_fraction REAL,
                    passed BOOLEAN NOT NULL,
                    FOREIGN KEY (run_id) REFERENCES runs(id)
                )
            """)

            cursor.execute("CREATE INDEX IF NOT EXISTS idx_reports_run ON experiment_reports(run_id)")
            cursor.execute("CREATE INDEX IF NOT EXISTS idx_runs_command ON runs(command)")
            self.conn.commit()
        except Exception as e:
            logger.error(f"Error creating run log tables: {e}")
            raise
        finally:
            self.close()

    def log_run(self, command: str, config_hash: str, seed: Optional[int], outcome: str,
                exit_code: int, report: Optional[Dict] = None,
                experiments: Iterable[Dict] = ()) -> int:
        """
        Append one run and its experiment rows

        Args:
            command: CLI subcommand
            config_hash: sha256 of the canonical run configuration
            seed: random seed (None for deterministic commands)
            outcome: 'pass', 'fail', 'error' or 'ok'
            exit_code: process exit code
            report: JSON-able command output
            experiments: ExperimentReport.to_dict() records

        Returns:
            Run ID
        """
        self.create_tables()
        try:
            self.connect()
            cursor = self.conn.cursor()
            cursor.execute("""
                INSERT INTO runs (created_at, command, config_hash, seed, outcome, exit_code, report_json)
                VALUES (?, ?, ?, ?, ?, ?, ?)
            """, (datetime.now().isoformat(timespec="seconds"), command, config_hash, seed, outcome,
                  exit_code, json.dumps(report, sort_keys=True, default=str) if report is not None else None))
            run_id = cursor.lastrowid

            for record in experiments:
                cursor.execute("""
                    INSERT INTO experiment_reports
                    (run_id, experiment, lhs, rhs, abs_gap, rel_gap, stderr, skip_fraction, passed)
                    VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)
                """, (run_id, record["experiment"], record["lhs"], record["rhs"], record["abs_gap"],
                      record["rel_gap"], record.get("stderr"), record.get("skip_fraction", 0.0),
                      bool(record["passed"])))

            self.conn.commit()
            logger.info(f"Run logged: {command} outcome={outcome} exit={exit_code}")
            return run_id
        except Exception as e:
            logger.error(f"Error logging run: {e}")
            raise
        finally:
            self.close()

    def get_runs(self, limit: int = 20, command: Optional[str] = None) -> pd.DataFrame:
        """
        Most recent runs first

        Args:
            limit: maximum number of rows
            command: optional command filter
        """
        self.create_tables()
        try:
            self.connect()
            if command:
                query = """
                    SELECT id, created_at, command, config_hash, seed, outcome, exit_code
                    FROM runs WHERE command = ? ORDER BY id DESC LIMIT ?
                """
                return pd.read_sql_query(query, self.conn, params=(command, limit))
            query = """
                SELECT id, created_at, command, config_hash, seed, outcome, exit_code
                FROM runs ORDER BY id DESC LIMIT ?
            """
            return pd.read_sql_query(query, self.conn, params=(limit,))
        except Exception as e:
            logger.error(f"Error getting runs: {e}")
            raise
        finally:
            self.close()

    def get_experiment_reports(self, run_id: Optional[int] = None) -> pd.DataFrame:
        """Stored experiment rows, joined with their run's command and seed"""
        self.create_tables()
        try:
            self.connect()
            query = """
                SELECT e.*, r.created_at, r.seed, r.config_hash
                FROM experiment_reports e JOIN runs r ON r.id = e.run_id
            """
            if run_id is not None:
                return pd.read_sql_query(query + " WHERE e.run_id = ? ORDER BY e.id", self.conn,
                                         params=(run_id,))
            return pd.read_sql_query(query + " ORDER BY e.id", self.conn)
        except Exception as e:
            logger.error(f"Error getting experiment reports: {e}")
            raise
        finally:
            self.close()

    def get_report_json(self, run_id: int) -> Optional[Dict]:
        """Decoded output of one run"""
        self.create_tables()
        try:
            self.connect()
            row = self.conn.execute("SELECT report_json FROM runs WHERE id = ?", (run_id,)).fetchone()
            if row is None or row["report_json"] is None:
                return None
            return json.loads(row["report_json"])
        finally:
            self.close()

    def get_summary(self) -> Dict:
        """Run counts per outcome and pass rate of stored experiments"""
        runs = self.get_runs(limit=-1)
        reports = self.get_experiment_reports()
        return {
            "runs": int(len(runs)),
            "by_outcome": {k: int(v) for k, v in runs["outcome"].value_counts().sort_index().items()},
            "experiments": int(len(reports)),
            "pass_rate": float(reports["passed"].mean()) if len(reports) else 0.0,
        }
