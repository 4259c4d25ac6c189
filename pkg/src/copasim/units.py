"""Unit parsing and formatting.

Conventions used throughout the package:

* capacities are binary (``"60MB"`` is 60 * 2**20 bytes),
* rates are decimal (``"2.7TB/s"`` is 2.7e12 bytes per second),
* ``"inf"`` denotes an idealized (unbounded) resource.
"""
from __future__ import annotations

import math
import re

from .errors import ValidationError

KB = 1 << 10
MB = 1 << 20
GB = 1 << 30
TB = 1 << 40

_BYTE_SUFFIX = {"B": 1, "KB": KB, "MB": MB, "GB": GB, "TB": TB}
_RATE_SUFFIX = {"B/S": 1.0, "KB/S": 1e3, "MB/S": 1e6, "GB/S": 1e9, "TB/S": 1e12}

_NUM_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*([A-Za-z/]*)\s*$")


def parse_bytes(value) -> float:
    """Parse a byte count: plain number, suffixed string or "inf".

    Returns an int when the result is finite and integral.
    """
    if isinstance(value, (int, float)):
        return value
    if not isinstance(value, str):
        raise ValidationError(f"cannot parse byte count from {value!r}")
    if value.strip().lower() == "inf":
        return math.inf
    m = _NUM_RE.match(value)
    if not m or m.group(2).upper() not in _BYTE_SUFFIX:
        raise ValidationError(f"cannot parse byte count from {value!r}")
    out = float(m.group(1)) * _BYTE_SUFFIX[m.group(2).upper()]
    return int(out) if out == int(out) else out


def parse_rate(value) -> float:
    """Parse a bandwidth: plain number (bytes/s), suffixed string or "inf"."""
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValidationError(f"cannot parse rate from {value!r}")
    if value.strip().lower() == "inf":
        return math.inf
    m = _NUM_RE.match(value)
    if not m:
        raise ValidationError(f"cannot parse rate from {value!r}")
    suffix = m.group(2).upper()
    if suffix in _RATE_SUFFIX:
        return float(m.group(1)) * _RATE_SUFFIX[suffix]
    if suffix == "":
        return float(m.group(1))
    raise ValidationError(f"cannot parse rate from {value!r}")


def fmt_bytes(n) -> str:
    if n == math.inf:
        return "inf"
    for suffix, scale in (("TB", TB), ("GB", GB), ("MB", MB), ("KB", KB)):
        if n >= scale and (n / scale) == int(n / scale):
            return f"{int(n / scale)}{suffix}"
    if n >= MB:
        return f"{n / MB:.6g}MB"
    return f"{int(n)}B"


def fmt_rate(r) -> str:
    if r == math.inf:
        return "inf"
    if r >= 1e12:
        return f"{r / 1e12:.6g}TB/s"
    if r >= 1e9:
        return f"{r / 1e9:.6g}GB/s"
    return f"{r:.6g}B/s"


def is_power_of_two(n) -> bool:
    return isinstance(n, int) and n > 0 and (n & (n - 1)) == 0
