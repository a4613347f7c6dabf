"""Artifact writers: CSV/JSON with stable formatting, digests, atomic replace.

All floating-point output is printed with 9 significant digits so that
re-running a configuration reproduces byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile

FLOAT_FMT = "%.9g"


def fmt_value(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return FLOAT_FMT % x
    return str(x)


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file and rename, so readers never see partial output."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(fmt_value(x) for x in row) for row in rows)
    atomic_write_text(path, "\n".join(lines) + "\n")


def round_floats(obj):
    """Recursively round floats to the output precision for stable JSON."""
    if isinstance(obj, float):
        if math.isinf(obj) or math.isnan(obj):
            return obj
        return float(FLOAT_FMT % obj)
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj


def write_json(path: str, obj) -> None:
    atomic_write_text(path, json.dumps(round_floats(obj), indent=2, sort_keys=True) + "\n")


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def digest_key(obj) -> str:
    """Content digest of a canonical-JSON key, for cache addressing."""
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
