"""
Result emission for the CLI: aligned table, CSV or versioned JSON on stdout
"""
import json
import sys
from typing import List, Optional

import pandas as pd

from configs.settings import OUTPUT_SCHEMA_VERSION
from core.file_manager import FileManager

OUTPUT_FORMATS = ("table", "csv", "json")


def emit_rows(rows: List[dict], fmt: str = "table", output: Optional[str] = None,
              meta: Optional[dict] = None, stream=None):
    """
    Write `rows` as a table/CSV, or as JSON {"schema", **meta, "rows"}

    CSV uses '.' decimals, ',' separators and always has a header row.
    """
    stream = stream or sys.stdout
    if fmt == "json":
        payload = {"schema": OUTPUT_SCHEMA_VERSION, **(meta or {}), "rows": rows}
        _write_text(json.dumps(payload, indent=2), output, stream)
        return

    df = pd.DataFrame(rows)
    if fmt == "csv":
        if output:
            FileManager.save_csv(df, output)
        else:
            df.to_csv(stream, index=False, lineterminator="\n")
        return
    _write_text(df.to_string(index=False), output, stream)


def emit_document(document: dict, output: Optional[str] = None, stream=None):
    """Write a JSON document carrying the schema version"""
    payload = {"schema": OUTPUT_SCHEMA_VERSION, **document}
    if output:
        FileManager.save_json(payload, output)
        return
    _write_text(json.dumps(payload, indent=2), None, stream or sys.stdout)


def _write_text(text: str, output: Optional[str], stream):
    if output:
        FileManager.make_parent(output)
        with open(output, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    else:
        stream.write(text + "\n")
