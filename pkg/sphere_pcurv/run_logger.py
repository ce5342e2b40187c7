"""
Sphere p-curvature - Run Logger

Category-tagged event log for CLI runs. Logs to:
- the run's output directory (<out>/run.log)
- optionally a unified log directory (SPHERE_PCURV_LOG_DIR), one file per day

Report artifacts never contain timestamps; only this log does.
"""

import os
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional


class RunLogger:
    """Logger for sphere-pcurv run events."""

    LOG_FILE = "run.log"

    def __init__(self, out_dir: Path, command: str = "unknown"):
        """
        Args:
            out_dir: Directory the run writes its artifacts to
            command: CLI subcommand, used to tag unified log lines
        """
        self.out_dir = Path(out_dir)
        self.command = command
        self.log_file = self.out_dir / self.LOG_FILE

        unified = os.environ.get("SPHERE_PCURV_LOG_DIR")
        self.unified_log_dir: Optional[Path] = Path(unified) if unified else None

        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            if self.unified_log_dir is not None:
                self.unified_log_dir.mkdir(parents=True, exist_ok=True)
        except OSError:
            pass

    def _get_timestamp(self) -> str:
        """Get current timestamp string."""
        return datetime.now().strftime("%Y-%m-%d %H:%M:%S")

    def _sanitize_message(self, message: str) -> str:
        """Keep each event on a single log line."""
        return message.replace("\n", "\\n")

    def log_event(self, category: str, message: str) -> None:
        """
        Append one event line to the run log (and the unified daily log).

        Args:
            category: RUN, CONFIG, ROW, ARTIFACT or ERROR
            message: Event message
        """
        log_line = f"[{self._get_timestamp()}] [{category}] {self._sanitize_message(message)}\n"

        try:
            with open(self.log_file, "a") as f:
                f.write(log_line)
        except OSError:
            pass

        if self.unified_log_dir is None:
            return
        daily_log = self.unified_log_dir / f"{datetime.now().strftime('%Y-%m-%d')}.log"
        try:
            with open(daily_log, "a") as f:
                f.write(f"[{self.command}] {log_line}")
        except OSError:
            pass

    # --- Run Events ---

    def log_run_start(self, argv_summary: str = "") -> None:
        """Log the start of a run."""
        msg = f"Run started: {self.command}"
        if argv_summary:
            msg = f"{msg} | {argv_summary[:200]}"
        self.log_event("RUN", msg)

    def log_run_complete(self, exit_code: int = 0) -> None:
        """Log the end of a run with its exit code."""
        self.log_event("RUN", f"Run finished with exit code {exit_code}")

    def log_config(self, settings: Dict[str, Any]) -> None:
        """Log the resolved settings, sorted by key."""
        rendered = ", ".join(f"{k}={v}" for k, v in sorted(settings.items()))
        self.log_event("CONFIG", rendered)

    def log_row(self, message: str) -> None:
        """Log one computed report row."""
        self.log_event("ROW", message)

    def log_artifact(self, path: Path) -> None:
        """Log a written report file."""
        self.log_event("ARTIFACT", f"Wrote {path}")

    def log_error(self, message: str, error: Optional[Exception] = None) -> None:
        """Log an error with optional exception details."""
        if error:
            self.log_event("ERROR", f"{message}: {type(error).__name__}: {error}")
        else:
            self.log_event("ERROR", message)

    # --- Utility ---

    def get_log_path(self) -> str:
        """Get the path to the run log file."""
        return str(self.log_file)

    def get_log_content(self) -> str:
        """Read the run log; empty if it cannot be read."""
        try:
            with open(self.log_file, "r") as f:
                return f.read()
        except OSError:
            return ""
