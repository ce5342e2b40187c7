"""
Sphere p-curvature - Terminal Display

Summaries of reports and diagnostics for the CLI. Uses `rich` tables and
panels on a terminal; falls back to plain text when rich is unavailable,
NO_COLOR is set or stdout is not a TTY.
"""

import os
import sys
from typing import Any, Dict, List, Optional, Sequence, TextIO

try:
    from rich.box import HEAVY, ROUNDED
    from rich.console import Console
    from rich.panel import Panel
    from rich.table import Table
    HAS_RICH = True
except ImportError:
    HAS_RICH = False

MAX_ROWS = 40


def format_value(value: Any) -> str:
    """Render a report cell: yes/no for flags, 6 significant digits for floats."""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


class RunDisplay:
    """Terminal output for one CLI run."""

    def __init__(self, stream: Optional[TextIO] = None) -> None:
        self._stream = stream or sys.stdout
        self._use_rich = (
            HAS_RICH
            and not os.environ.get("NO_COLOR")
            and self._stream.isatty()
        )
        self._console = Console(file=self._stream) if self._use_rich else None

    @property
    def uses_rich(self) -> bool:
        """True when output goes through rich."""
        return self._use_rich

    def _print(self, text: str = "") -> None:
        """Plain-text line to the stream."""
        self._stream.write(text + "\n")

    # =========================================================================
    # Reports
    # =========================================================================

    def header(self, command: str, settings: Dict[str, Any]) -> None:
        """Print the command banner with its settings."""
        lines = [f"{k}: {format_value(v)}" for k, v in sorted(settings.items())]
        if self._use_rich:
            self._console.print(Panel(
                "\n".join(lines) or "-",
                title=f"[bold]sphere-pcurv {command}[/bold]",
                box=HEAVY,
                style="cyan",
            ))
        else:
            self._print("=" * 60)
            self._print(f"sphere-pcurv {command}")
            for line in lines:
                self._print(f"  {line}")
            self._print("=" * 60)

    def report_table(self, title: str, header: Sequence[str], rows: Sequence[Sequence[Any]],
                     meta: Optional[Dict[str, Any]] = None) -> None:
        """Print report rows (capped at MAX_ROWS) followed by metadata."""
        shown = list(rows)[:MAX_ROWS]
        if self._use_rich:
            table = Table(title=title, box=ROUNDED)
            for name in header:
                table.add_column(name, justify="right")
            for row in shown:
                table.add_row(*(format_value(v) for v in row))
            self._console.print(table)
            if len(rows) > MAX_ROWS:
                self._console.print(f"[dim]... {len(rows) - MAX_ROWS} more rows in the report file[/dim]")
            for key, value in sorted((meta or {}).items()):
                self._console.print(f"  [bold]{key}:[/bold] {format_value(value)}")
        else:
            self._print(title)
            self._print("  ".join(header))
            for row in shown:
                self._print("  ".join(format_value(v) for v in row))
            if len(rows) > MAX_ROWS:
                self._print(f"... {len(rows) - MAX_ROWS} more rows in the report file")
            for key, value in sorted((meta or {}).items()):
                self._print(f"  {key}: {format_value(value)}")

    def artifact(self, path: str) -> None:
        """Print the path of a written report."""
        if self._use_rich:
            self._console.print(f"  [dim]Report:[/dim] {path}")
        else:
            self._print(f"  Report: {path}")

    # =========================================================================
    # Diagnostics
    # =========================================================================

    def diagnostics(self, problems: List[str]) -> None:
        """Print validate results, or ok when there are none."""
        if self._use_rich:
            if problems:
                body = "\n".join(f"[red]x[/red] {p}" for p in problems)
                self._console.print(Panel(body, title="[bold red]validate[/bold red]", box=ROUNDED))
            else:
                self._console.print(Panel("[bold green]ok[/bold green]", box=ROUNDED))
        else:
            if problems:
                for p in problems:
                    self._print(f"x {p}")
            else:
                self._print("ok")
