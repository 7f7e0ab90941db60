"""Canonical JSON serialization used by every file the package writes.

The stdlib json module cannot be told to print floats with a fixed number of
significant digits, so a small writer is rolled by hand: floats are emitted
with 17 significant digits (enough to round-trip a double exactly), keys stay
in insertion order for files, and a sorted-key/no-whitespace form feeds the
config hashes.
"""

import hashlib
import json

import numpy as np

SCHEMA_VERSION = 1


def format_float(value):
    """17-significant-digit decimal form of a finite double."""
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"cannot serialize non-finite float {value!r}")
    return format(value, ".17g")


def to_jsonable(obj):
    """Recursively convert numpy containers/scalars to plain Python."""
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


def _write(obj, parts, indent, level, sort_keys):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end_pad = "" if indent is None else "\n" + " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        parts.append(json.dumps(obj))
    elif isinstance(obj, int):
        parts.append(str(obj))
    elif isinstance(obj, float):
        parts.append(format_float(obj))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, dict):
        keys = sorted(obj) if sort_keys else list(obj)
        if not keys:
            parts.append("{}")
            return
        parts.append("{")
        for i, k in enumerate(keys):
            if not isinstance(k, str):
                raise TypeError(f"non-string key {k!r}")
            parts.append(pad + json.dumps(k) + (": " if indent else ":"))
            _write(obj[k], parts, indent, level + 1, sort_keys)
            if i < len(keys) - 1:
                parts.append(",")
        parts.append(end_pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            parts.append("[]")
            return
        parts.append("[")
        for i, v in enumerate(obj):
            parts.append(pad)
            _write(v, parts, indent, level + 1, sort_keys)
            if i < len(obj) - 1:
                parts.append(",")
        parts.append(end_pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2, sort_keys=False):
    """Serialize to JSON text with 17-significant-digit floats."""
    parts = []
    _write(to_jsonable(obj), parts, indent, 0, sort_keys)
    return "".join(parts)


def dump_file(obj, path):
    with open(path, "w") as fh:
        fh.write(dumps(obj) + "\n")


def load_file(path):
    with open(path) as fh:
        return json.load(fh)


def config_hash(obj):
    """sha256 over the canonical (sorted-key, whitespace-free) serialization."""
    canonical = dumps(obj, indent=None, sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()
