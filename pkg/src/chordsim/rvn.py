"""RVN-Chord: a recently-visited-node shortcut consulted before finger routing.

Every node carries one extra slot holding the id of the node that answered
the previous successful lookup. Commits and repairs are ring-wide writes whose
messages count as maintenance, never as lookup traffic.
"""

from __future__ import annotations

from .ids import Bounds, in_interval
from .lookup import LookupResult, route, serial_result
from .ring import Ring, stabilize


def rvn_lookup(ring: Ring, origin: int, key: int, modular_guard: bool = False) -> LookupResult:
    """Look ``key`` up from ``origin`` using the origin's RVN slot.

    * ``key == rvn``: the RVN node is the answer.
    * ``key > rvn`` (plain integer comparison): jump to the RVN node, then
      route normally from there. With ``modular_guard`` the test becomes
      "key lies clockwise after rvn and before origin".
    * otherwise: ordinary Chord routing from the origin.
    """
    if origin not in ring.nodes:
        raise ValueError(f"origin {origin} is not active")
    rvn = ring.nodes[origin].rvn
    path = [origin]
    if key == rvn:
        if rvn != origin:
            path.append(rvn)
        return serial_result(path, branch="hit")
    if in_interval(key, rvn, origin, Bounds.OPEN) if modular_guard else key > rvn:
        if rvn != origin:
            path.append(rvn)
        route(ring, rvn, key, path)
        return serial_result(path, branch="jump")
    route(ring, origin, key, path)
    return serial_result(path, branch="route")


def rvn_commit(ring: Ring, resolved: int) -> int:
    """Point every node's RVN slot at ``resolved``; returns the N-1 update messages."""
    if resolved not in ring.nodes:
        raise ValueError(f"node {resolved} is not active")
    for node in ring.nodes.values():
        node.rvn = resolved
    return len(ring) - 1


def rvn_repair(ring: Ring, departed: int, old_successor: int, restabilize: bool = True) -> None:
    """Redirect slots naming ``departed`` to the successor it had when it left."""
    for node in ring.nodes.values():
        if node.rvn == departed:
            node.rvn = old_successor
    if restabilize:
        stabilize(ring)
