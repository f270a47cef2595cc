"""Identifier arithmetic on the 2**m Chord circle.

Identifiers are plain ``int`` values; the bit width ``m`` travels with the
ring that owns them rather than with every number.
"""

from __future__ import annotations

import hashlib
from enum import Enum

MIN_BITS = 3
MAX_BITS = 63


class ConfigError(ValueError):
    """Invalid simulation configuration (bit width, labels, resources...)."""


class Bounds(Enum):
    """Which ends of a circular interval are included."""

    OPEN = (False, False)          # (a, b)
    LEFT_CLOSED = (True, False)    # [a, b)
    RIGHT_CLOSED = (False, True)   # (a, b]
    CLOSED = (True, True)          # [a, b]

    @property
    def lower_closed(self) -> bool:
        return self.value[0]

    @property
    def upper_closed(self) -> bool:
        return self.value[1]


def check_bits(m: int) -> int:
    if not isinstance(m, int) or isinstance(m, bool) or not MIN_BITS <= m <= MAX_BITS:
        raise ConfigError(f"bit width m must be an integer in [{MIN_BITS}, {MAX_BITS}], got {m!r}")
    return m


def check_id(x: int, m: int) -> int:
    if not 0 <= x < (1 << m):
        raise ValueError(f"identifier {x} outside [0, 2^{m})")
    return x


def hash_id(label: bytes | str, m: int) -> int:
    """Map a label to an m-bit identifier: the top ``m`` bits of its SHA-1 digest."""
    check_bits(m)
    if isinstance(label, str):
        label = label.encode("utf-8")
    if not label:
        raise ConfigError("cannot hash an empty label")
    digest = int.from_bytes(hashlib.sha1(label).digest(), "big")
    return digest >> (160 - m)


def in_interval(x: int, a: int, b: int, bounds: Bounds = Bounds.RIGHT_CLOSED) -> bool:
    """True if ``x`` lies on the clockwise arc from ``a`` to ``b``.

    With ``a == b`` the arc wraps the whole circle: ``(a, a]``, ``[a, a)`` and
    ``[a, a]`` cover every identifier, ``(a, a)`` covers all but ``a``.
    """
    if x == a:
        return bounds.lower_closed or (a == b and bounds.upper_closed)
    if x == b:
        return bounds.upper_closed or (a == b and bounds.lower_closed)
    if a == b:
        return True
    if a < b:
        return a < x < b
    return x > a or x < b


def finger_start(n: int, k: int, m: int) -> int:
    """Start of the k-th finger (1-based) of node ``n``."""
    if not 1 <= k <= m:
        raise ValueError(f"finger index k must be in [1, {m}], got {k}")
    return (n + (1 << (k - 1))) % (1 << m)


def distance_cw(a: int, b: int, m: int) -> int:
    """Clockwise distance from ``a`` to ``b``."""
    return (b - a) % (1 << m)
