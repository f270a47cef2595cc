"""Base Chord lookup with hop and message accounting.

Message model shared by every protocol: one request per forwarding step,
plus one reply from the owner back to the origin when the lookup left the
origin at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .ring import NodeState, Ring


class Schedule(NamedTuple):
    """How a lookup's messages are laid out in time.

    ``prefix`` and ``suffix`` messages are sent one after another; each entry
    of ``branches`` is a run of serial messages that proceeds in parallel with
    the other branches.
    """

    prefix: int
    branches: tuple[int, ...] = ()
    suffix: int = 0


@dataclass
class LookupResult:
    owner: int
    path: list[int]
    messages: int
    schedule: Schedule
    elapsed_ms: float = 0.0
    branch: str = field(default="route", compare=False)

    @property
    def origin(self) -> int:
        return self.path[0]

    @property
    def hops(self) -> int:
        return len(self.path) - 1


def serial_result(path: list[int], branch: str = "route") -> LookupResult:
    hops = len(path) - 1
    messages = hops + 1 if hops else 0
    return LookupResult(owner=path[-1], path=path, messages=messages,
                        schedule=Schedule(messages), branch=branch)


def closest_preceding_finger(node: NodeState, key: int) -> int:
    """Highest finger strictly between ``node`` and ``key``; the node itself if none."""
    n = node.id
    for f in reversed(node.fingers):
        x = f.node
        if n < key:
            if n < x < key:
                return x
        elif x > n or x < key:
            return x
    return n


def _owns(key: int, pred: int, n: int) -> bool:
    if pred < n:
        return pred < key <= n
    return key > pred or key <= n


def route(ring: Ring, start: int, key: int, path: list[int]) -> None:
    """Append to ``path`` the hops from ``start`` to the owner of ``key``."""
    nodes = ring.nodes
    node = nodes[start]
    if _owns(key, node.predecessor, start):
        return
    while True:
        succ = node.successor
        if _owns(key, node.id, succ):
            path.append(succ)
            return
        nxt = closest_preceding_finger(node, key)
        if nxt == node.id:
            nxt = succ
        path.append(nxt)
        node = nodes[nxt]


def find_successor(ring: Ring, origin: int, key: int) -> LookupResult:
    """Resolve ``key`` starting at ``origin`` by finger-table routing."""
    if origin not in ring.nodes:
        raise ValueError(f"origin {origin} is not active")
    path = [origin]
    route(ring, origin, key, path)
    return serial_result(path)
