"""Chord ring membership, finger tables and consistent-hashing key transfer.

Stabilization is a global, atomic repair: after it runs every successor,
predecessor and finger entry agrees with :func:`successor_oracle`.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable

from .ids import check_bits, check_id, finger_start


class RingError(ValueError):
    """Illegal membership change (id collision, last node leaving, ...)."""


@dataclass(slots=True)
class FingerEntry:
    start: int
    interval_end: int
    node: int


@dataclass(slots=True)
class NodeState:
    id: int
    predecessor: int
    successor: int
    fingers: list[FingerEntry]
    rvn: int
    stored_keys: set[int] = field(default_factory=set)
    resources: frozenset = frozenset()


@dataclass(frozen=True)
class KeyTransfer:
    source: int
    target: int
    keys: frozenset[int]


class Ring:
    """Active nodes of one identifier circle plus the keys they store."""

    def __init__(self, m: int):
        self.m = check_bits(m)
        self.nodes: dict[int, NodeState] = {}
        self.all_keys: set[int] = set()
        self._ids: list[int] = []

    @property
    def ids(self) -> list[int]:
        """Active ids in ascending order (do not mutate)."""
        return self._ids

    @property
    def size(self) -> int:
        return 1 << self.m

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.nodes

    def __getitem__(self, node_id: int) -> NodeState:
        return self.nodes[node_id]

    def successor(self, x: int) -> int:
        """First active id clockwise from ``x``, inclusive."""
        ids = self._ids
        if not ids:
            raise RingError("ring is empty")
        i = bisect.bisect_left(ids, x)
        return ids[i] if i < len(ids) else ids[0]

    def predecessor(self, x: int) -> int:
        """Last active id strictly counter-clockwise from ``x``."""
        ids = self._ids
        if not ids:
            raise RingError("ring is empty")
        i = bisect.bisect_left(ids, x)
        return ids[i - 1]  # i == 0 wraps to ids[-1]

    def _insert_id(self, node_id: int) -> None:
        bisect.insort(self._ids, node_id)

    def _remove_id(self, node_id: int) -> None:
        i = bisect.bisect_left(self._ids, node_id)
        del self._ids[i]


def successor_oracle(ring: Ring, x: int) -> int:
    """Brute-force ground truth: the first active id clockwise from ``x``."""
    return ring.successor(x)


def _fingers(ring: Ring, n: int) -> list[FingerEntry]:
    m = ring.m
    starts = [finger_start(n, k, m) for k in range(1, m + 1)]
    return [
        FingerEntry(start=s, interval_end=starts[(k + 1) % m], node=ring.successor(s))
        for k, s in enumerate(starts)
    ]


def build_finger_table(ring: Ring, n: int) -> list[FingerEntry]:
    """Fingers of ``n`` computed from the oracle; entry k-1 holds finger k."""
    if n not in ring.nodes:
        raise ValueError(f"node {n} is not active")
    return _fingers(ring, n)


def _fresh_node(ring: Ring, n: int, resources: frozenset) -> NodeState:
    fingers = _fingers(ring, n)
    succ = fingers[0].node
    return NodeState(
        id=n,
        predecessor=ring.predecessor(n),
        successor=succ,
        fingers=fingers,
        rvn=succ,
        resources=resources,
    )


def build_ring(
    ids: Iterable[int],
    keys: Iterable[int] = (),
    m: int = 6,
    resources: dict[int, frozenset] | None = None,
) -> Ring:
    """Build a fully stabilized ring; every key lands at its successor.

    Each node's recently-visited-node slot starts out as its own successor.
    """
    ring = Ring(m)
    id_list = list(ids)
    if not id_list:
        raise RingError("a ring needs at least one node")
    if len(set(id_list)) != len(id_list):
        raise RingError("duplicate node ids")
    for n in id_list:
        check_id(n, m)
    ring._ids = sorted(id_list)
    resources = resources or {}
    for n in ring._ids:
        ring.nodes[n] = _fresh_node(ring, n, frozenset(resources.get(n, ())))
    for k in keys:
        check_id(k, m)
        ring.all_keys.add(k)
        ring.nodes[ring.successor(k)].stored_keys.add(k)
    return ring


def stabilize(ring: Ring) -> int:
    """Repair every successor/predecessor/finger pointer; return the number changed."""
    corrected = 0
    succ_of = ring.successor
    for n in ring._ids:
        node = ring.nodes[n]
        pred = ring.predecessor(n)
        if node.predecessor != pred:
            node.predecessor = pred
            corrected += 1
        for f in node.fingers:
            target = succ_of(f.start)
            if f.node != target:
                f.node = target
                corrected += 1
        if node.successor != node.fingers[0].node:
            node.successor = node.fingers[0].node
            corrected += 1
    return corrected


def join(
    ring: Ring,
    new_id: int,
    resources: frozenset = frozenset(),
    stabilize_after: bool = True,
) -> KeyTransfer:
    """Insert ``new_id``; it takes over the keys in (predecessor, new_id] from its successor."""
    check_id(new_id, ring.m)
    if new_id in ring.nodes:
        raise RingError(f"id collision: {new_id} is already active")
    if not ring.nodes:
        raise RingError("cannot join an empty ring")
    old_succ = ring.nodes[ring.successor(new_id)]
    ring._insert_id(new_id)
    node = _fresh_node(ring, new_id, frozenset(resources))
    node.rvn = old_succ.rvn
    ring.nodes[new_id] = node

    pred = node.predecessor
    moved = {k for k in old_succ.stored_keys if _owned_by(k, pred, new_id)}
    old_succ.stored_keys -= moved
    node.stored_keys |= moved
    if stabilize_after:
        stabilize(ring)
    return KeyTransfer(source=old_succ.id, target=new_id, keys=frozenset(moved))


def leave(ring: Ring, node_id: int, stabilize_after: bool = True) -> KeyTransfer:
    """Remove ``node_id``; its keys go to its successor and stale RVN slots are repaired."""
    from .rvn import rvn_repair

    if node_id not in ring.nodes:
        raise RingError(f"node {node_id} is not active")
    if len(ring) < 2:
        raise RingError("the last node cannot leave")
    node = ring.nodes.pop(node_id)
    ring._remove_id(node_id)
    heir = ring.nodes[ring.successor(node_id)]
    heir.stored_keys |= node.stored_keys
    rvn_repair(ring, node_id, heir.id, restabilize=stabilize_after)
    return KeyTransfer(source=node_id, target=heir.id, keys=frozenset(node.stored_keys))


def _owned_by(k: int, pred: int, n: int) -> bool:
    # k in (pred, n], written out to avoid the Bounds lookup in a hot loop
    if pred < n:
        return pred < k <= n
    return k > pred or k <= n
