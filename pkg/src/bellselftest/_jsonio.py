"""Deterministic JSON serialization: sorted keys, floats with 17 significant
digits, so reruns produce byte-identical artifacts."""

from __future__ import annotations

import json
import math


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            raise ValueError(f"non-finite float {value} in JSON payload")
        return format(value, ".17g")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        items = sorted(value.items(), key=lambda kv: str(kv[0]))
        inner = ",".join(f"{json.dumps(str(k))}:{_format(v)}" for k, v in items)
        return "{" + inner + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_format(v) for v in value) + "]"
    try:
        import numpy as np
        if isinstance(value, np.integer):
            return str(int(value))
        if isinstance(value, np.floating):
            return _format(float(value))
        if isinstance(value, np.ndarray):
            return _format(value.tolist())
    except ImportError:
        pass
    raise TypeError(f"cannot serialize {type(value)!r}")


def dumps(obj) -> str:
    return _format(obj)


def dump(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def load(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def loads(text: str):
    return json.loads(text)
