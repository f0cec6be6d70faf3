"""Strict-JSON helpers shared by the table and report writers."""

from __future__ import annotations

import json
import math
from pathlib import Path


def jsonable(obj):
    """Replace non-finite floats by the strings "inf", "-inf" and "nan"."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def dump_json(obj, path: str | Path | None = None) -> str:
    """Serialize with sorted keys; optionally also write to ``path``."""
    text = json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
