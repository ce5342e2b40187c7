"""
Sphere p-curvature - Artifact Formatting

Pure helpers for the CSV and JSON artifacts: RFC-4180 CSV with '.' decimal
separator and 17 significant digits, JSON with sorted keys. Readers return
plain rows so the owning modules can rebuild their own types.
"""

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

Cell = Union[float, int, str, None]

FLOAT_FORMAT = ".17g"


def format_cell(value: Cell) -> str:
    """Render one CSV cell; None becomes an empty cell."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, FLOAT_FORMAT)
    return str(value)


def parse_float(cell: str) -> Optional[float]:
    """Inverse of format_cell for numeric cells; empty means None."""
    cell = cell.strip()
    if cell == "":
        return None
    return float(cell)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Cell]], meta: Optional[Dict[str, Any]] = None) -> str:
    """
    CSV document as a string.

    Metadata, if given, goes in leading '# key=value' comment lines so the
    table itself stays a plain RFC-4180 table.
    """
    lines: List[str] = []
    if meta:
        for key in sorted(meta):
            lines.append(f"# {key}={format_cell(meta[key])}")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    prefix = "\r\n".join(lines) + ("\r\n" if lines else "")
    return prefix + out.getvalue()


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Cell]],
              meta: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(csv_text(header, rows, meta))
    return path


def read_csv(path: Union[str, Path]) -> Tuple[Dict[str, str], List[str], List[List[str]]]:
    """Read (meta, header, rows) from a CSV written by write_csv."""
    with open(path, "r", newline="") as f:
        text = f.read()
    return parse_csv_text(text)


def parse_csv_text(text: str) -> Tuple[Dict[str, str], List[str], List[List[str]]]:
    meta: Dict[str, str] = {}
    body: List[str] = []
    for line in text.splitlines():
        if line.startswith("# ") and not body:
            key, _, value = line[2:].partition("=")
            meta[key] = value
        elif line.strip():
            body.append(line)
    reader = csv.reader(body)
    rows = list(reader)
    if not rows:
        return meta, [], []
    return meta, [h.strip() for h in rows[0]], rows[1:]


def json_text(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path: Union[str, Path], payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(json_text(payload))
    return path


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    with open(path, "r") as f:
        return json.load(f)

