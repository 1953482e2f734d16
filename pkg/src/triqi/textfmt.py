"""Plain-text serialization: key=value records and CSV tables.

Floats are written with 17 significant digits, which round-trips exactly
through ``float()``; emission is deterministic so repeated runs of one build
produce byte-identical files.
"""

from __future__ import annotations

import csv
import io


def format_float(x: float) -> str:
    return f"{x:.17g}"


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def parse_value(text: str):
    """Best-effort typed parse: bool, int, float, else the raw string."""
    if text == "":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def format_record(record: dict) -> str:
    lines = [f"{key} = {format_value(value)}" for key, value in record.items()]
    return "\n".join(lines) + "\n"


def parse_record(text: str) -> dict:
    out: dict = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = parse_value(value.strip())
    return out


def format_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(columns))
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def parse_csv(text: str) -> tuple[list[str], list[list]]:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        return [], []
    return rows[0], [[parse_value(cell) for cell in row] for row in rows[1:]]
