"""Deterministic JSON and CSV rendering of reports."""

from __future__ import annotations

import dataclasses
import json
import math
from collections.abc import Mapping

import numpy as np

from .empirics import EmpiricalDistribution


def _float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def to_plain(obj):
    """Convert reports, dataclasses and numpy values into plain JSON-able objects."""
    if hasattr(obj, "to_dict"):
        return to_plain(obj.to_dict())
    if isinstance(obj, EmpiricalDistribution):
        return {"values": obj.values.tolist(), "probabilities": obj.probs.tolist()}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_plain(dataclasses.asdict(obj))
    if isinstance(obj, Mapping):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, np.generic):
        return to_plain(obj.item())
    return obj


def _emit(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_emit(v, indent, level + 1) for v in obj) + "]"
        items = ",\n".join(pad + _emit(v, indent, level + 1) for v in obj)
        return "[\n" + items + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            pad + json.dumps(k) + ": " + _emit(obj[k], indent, level + 1) for k in sorted(obj)
        )
        return "{\n" + items + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def render_json(report) -> bytes:
    return (_emit(to_plain(report), 2, 0) + "\n").encode()


def _cell(v) -> str:
    if isinstance(v, float):
        return _float(v).strip('"')
    if v is None:
        return ""
    return str(v)


def _flatten(obj, prefix: str = "") -> list[tuple[str, object]]:
    if isinstance(obj, dict):
        out = []
        for k in sorted(obj):
            out.extend(_flatten(obj[k], f"{prefix}.{k}" if prefix else k))
        return out
    if isinstance(obj, list):
        out = []
        for i, v in enumerate(obj):
            out.extend(_flatten(v, f"{prefix}[{i}]"))
        return out
    return [(prefix, obj)]


def render_csv(report) -> bytes:
    """Distributions become ``value,probability`` tables; lists of flat rows become tables; anything else key,value."""
    if isinstance(report, EmpiricalDistribution):
        lines = ["value,probability"] + [f"{_cell(v)},{_cell(p)}" for v, p in report.to_rows()]
        return ("\n".join(lines) + "\n").encode()
    plain = to_plain(report)
    if isinstance(plain, list) and plain and all(isinstance(r, dict) for r in plain):
        rows = [dict(_flatten(r)) for r in plain]
        header = sorted({k for r in rows for k in r})
        lines = [",".join(header)] + [",".join(_cell(r.get(k)) for k in header) for r in rows]
        return ("\n".join(lines) + "\n").encode()
    lines = ["key,value"] + [f"{k},{_cell(v)}" for k, v in _flatten(plain)]
    return ("\n".join(lines) + "\n").encode()


def render_report(report, fmt: str = "json") -> bytes:
    if fmt == "json":
        return render_json(report)
    if fmt == "csv":
        return render_csv(report)
    raise ValueError(f"unknown format {fmt!r}")
