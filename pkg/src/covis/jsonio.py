"""JSON emission with fixed 17-significant-digit floats.

All file formats and step logs in this project serialize floats with 17
significant digits so that round-trips are bit-exact and log replays can be
compared byte-for-byte.  The stdlib json encoder hardwires float repr, hence
this small encoder.
"""
from __future__ import annotations

import json
import math
from typing import Any


def _encode(obj: Any, out: list[str]) -> None:
    if obj is None or obj is True or obj is False:
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"non-finite float not serializable: {obj}")
        out.append(format(obj, ".17g"))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            if not isinstance(k, str):
                raise TypeError(f"object keys must be str, got {type(k)}")
            out.append(json.dumps(k))
            out.append(":")
            _encode(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _encode(v, out)
        out.append("]")
    else:
        raise TypeError(f"not JSON-serializable: {type(obj)}")


def dumps17(obj: Any) -> str:
    """Compact JSON with floats at 17 significant digits (lossless)."""
    out: list[str] = []
    _encode(obj, out)
    return "".join(out)


loads = json.loads
