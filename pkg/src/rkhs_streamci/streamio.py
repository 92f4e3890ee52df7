"""Reading and writing (x, y) streams as CSV or JSON lines."""
from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .sgd import DataError


class StreamParseError(DataError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class Stream:
    x: np.ndarray
    y: np.ndarray
    lines: np.ndarray
    rejected: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.x.size

    def summary(self) -> dict:
        return {"accepted": len(self), "rejected": len(self.rejected),
                "rejected_lines": self.rejected[:20]}


def _parse_line(text: str, lineno: int):
    s = text.strip()
    if s.startswith("{"):
        try:
            rec = json.loads(s)
            return float(rec["x"]), float(rec["y"])
        except (ValueError, KeyError, TypeError) as exc:
            raise StreamParseError(lineno, f"bad JSON record ({exc})") from None
    parts = [p.strip() for p in s.split(",")]
    if len(parts) != 2:
        raise StreamParseError(lineno, f"expected 'x,y', got {s!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise StreamParseError(lineno, f"non-numeric field in {s!r}") from None


def _is_header(text: str) -> bool:
    parts = [p.strip().strip('"').lower() for p in text.strip().split(",")]
    return parts == ["x", "y"]


def parse_lines(lines) -> Stream:
    """Parse an iterable of text lines. Blank lines and '#' comments are skipped,
    a leading 'x,y' header is detected, and arrivals with x outside [0, 1] are
    dropped and counted."""
    xs, ys, nums, rejected = [], [], [], []
    seen_data = False
    for lineno, raw in enumerate(lines, start=1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        if not seen_data and _is_header(s):
            seen_data = True
            continue
        seen_data = True
        x, y = _parse_line(s, lineno)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise StreamParseError(lineno, "non-finite value")
        if not 0.0 <= x <= 1.0:
            rejected.append(lineno)
            continue
        xs.append(x)
        ys.append(y)
        nums.append(lineno)
    return Stream(np.array(xs, dtype=float), np.array(ys, dtype=float),
                  np.array(nums, dtype=int), rejected)


def parse_stream(source=None) -> Stream:
    """Read a stream from a path, ``'-'`` / ``None`` for stdin, or a file object."""
    if source is None or source == "-":
        return parse_lines(sys.stdin)
    if hasattr(source, "read"):
        return parse_lines(source)
    with open(source, "r") as fh:
        return parse_lines(fh)


def emit_stream(x, y, fmt: str = "csv", header: bool = False) -> str:
    """Serialise arrivals exactly (shortest round-trip float repr)."""
    out = []
    if fmt == "csv":
        if header:
            out.append("x,y")
        out.extend(f"{float(a)!r},{float(b)!r}" for a, b in zip(x, y))
    elif fmt == "jsonl":
        out.extend(json.dumps({"x": float(a), "y": float(b)}) for a, b in zip(x, y))
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return "\n".join(out) + ("\n" if out else "")
