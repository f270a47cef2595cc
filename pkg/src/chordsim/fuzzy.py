"""FZ-Chord: three resource-ranked sub-rings searched in parallel via Ring-Heads.

Nodes are ranked by how many resources they hold relative to the richest
node, then split into HOT / HOTTER / HOTTEST sub-rings. Nodes owning a
resource nobody else has are promoted to HOTTEST. A resource table that
collapses nodes with identical resource sets is replicated at every node
and is what a Ring-Head consults to learn which sub-ring holds a key's owner.
"""

from __future__ import annotations

import bisect
import hashlib
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, NamedTuple

from .ids import ConfigError
from .lookup import LookupResult, Schedule, route
from .ring import NodeState, Ring, build_ring


@dataclass(frozen=True, order=True)
class ResourceDescriptor:
    kind: str
    attribute: str

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.strip().lower())
        object.__setattr__(self, "attribute", self.attribute.strip().lower())
        if not self.kind or not self.attribute:
            raise ValueError("resource kind and attribute must be non-empty")

    @classmethod
    def parse(cls, text: str) -> ResourceDescriptor:
        kind, sep, attribute = text.partition(":")
        if not sep:
            raise ValueError(f"expected kind:attribute, got {text!r}")
        return cls(kind, attribute)

    def __str__(self) -> str:
        return f"{self.kind}:{self.attribute}"


class RingLabel(IntEnum):
    HOT = 1
    HOTTER = 2
    HOTTEST = 3


# Crisp split points, inclusive for HOTTER on both sides.
HOTTER_LOW = 0.34
HOTTER_HIGH = 0.66

# Triangle anchors of the membership functions.
HOT_ZERO = 0.34
HOTTER_FOOT_LEFT, HOTTER_PEAK, HOTTER_FOOT_RIGHT = 0.17, 0.50, 0.83
HOTTEST_ZERO = 0.66


def _solve_crossover(rising_foot, rising_span, falling_end, falling_span):
    # (f - rising_foot) / rising_span == (falling_end - f) / falling_span
    return (rising_foot * falling_span + falling_end * rising_span) / (rising_span + falling_span)


# Where argmax(membership) flips between neighbouring labels.
HOT_HOTTER_CROSSOVER = _solve_crossover(HOTTER_FOOT_LEFT, HOTTER_PEAK - HOTTER_FOOT_LEFT, HOT_ZERO, HOT_ZERO)
HOTTER_HOTTEST_CROSSOVER = _solve_crossover(
    HOTTEST_ZERO, 1.0 - HOTTEST_ZERO, HOTTER_FOOT_RIGHT, HOTTER_FOOT_RIGHT - HOTTER_PEAK
)


class MembershipGrades(NamedTuple):
    hot: float
    hotter: float
    hottest: float

    def argmax(self) -> RingLabel:
        best = max(range(3), key=lambda i: (self[i], i))
        return RingLabel(best + 1)


def _check_fraction(fraction: float) -> float:
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"resource fraction must lie in [0, 1], got {fraction}")
    return fraction


def membership(fraction: float) -> MembershipGrades:
    f = _check_fraction(fraction)
    hot = max(0.0, 1.0 - f / HOT_ZERO)
    if f <= HOTTER_FOOT_LEFT or f >= HOTTER_FOOT_RIGHT:
        hotter = 0.0
    elif f <= HOTTER_PEAK:
        hotter = (f - HOTTER_FOOT_LEFT) / (HOTTER_PEAK - HOTTER_FOOT_LEFT)
    else:
        hotter = (HOTTER_FOOT_RIGHT - f) / (HOTTER_FOOT_RIGHT - HOTTER_PEAK)
    hottest = max(0.0, (f - HOTTEST_ZERO) / (1.0 - HOTTEST_ZERO))
    return MembershipGrades(hot, hotter, hottest)


def classify(fraction: float) -> RingLabel:
    f = _check_fraction(fraction)
    if f > HOTTER_HIGH:
        return RingLabel.HOTTEST
    if f >= HOTTER_LOW:
        return RingLabel.HOTTER
    return RingLabel.HOT


def normalize_resources(nodes: Iterable[NodeState]) -> dict[int, float]:
    """Resource count of each node divided by the largest count in the set."""
    counts = {n.id: len(n.resources) for n in nodes}
    top = max(counts.values(), default=0)
    if top == 0:
        raise ConfigError("all nodes resourceless")
    return {nid: c / top for nid, c in counts.items()}


def detect_unique(nodes: Iterable[NodeState]) -> set[int]:
    """Ids of nodes holding at least one descriptor that no other node holds."""
    nodes = list(nodes)
    holders = Counter(d for n in nodes for d in n.resources)
    return {n.id for n in nodes if any(holders[d] == 1 for d in n.resources)}


def resource_signature(resources: Iterable[ResourceDescriptor]) -> str:
    canon = "\n".join(sorted(str(d) for d in resources))
    return hashlib.sha1(canon.encode("utf-8")).hexdigest()


class NodeStatus(NamedTuple):
    online: bool
    unique: bool


@dataclass(frozen=True)
class ResourceTableEntry:
    node_ids: frozenset[int]
    resource_count: int
    status: NodeStatus
    signature: str


def build_resource_table(nodes: Iterable[NodeState]) -> list[ResourceTableEntry]:
    """One entry per distinct resource set, sorted by signature."""
    nodes = list(nodes)
    unique = detect_unique(nodes)
    groups: dict[str, list[NodeState]] = {}
    for n in nodes:
        groups.setdefault(resource_signature(n.resources), []).append(n)
    return [
        ResourceTableEntry(
            node_ids=frozenset(n.id for n in members),
            resource_count=len(members[0].resources),
            status=NodeStatus(online=True, unique=any(n.id in unique for n in members)),
            signature=sig,
        )
        for sig, members in sorted(groups.items())
    ]


def elect_ring_head(subring: Ring) -> int | None:
    """Member with the most resources, lowest id on ties; ``None`` for an empty ring."""
    if not len(subring):
        return None
    return min(subring.ids, key=lambda n: (-len(subring.nodes[n].resources), n))


class OverlayError(RuntimeError):
    """The overlay contradicts its own partition (should never happen)."""


@dataclass
class FzOverlay:
    m: int
    subrings: dict[RingLabel, Ring]
    ring_heads: dict[RingLabel, int]
    unique_nodes: frozenset[int]
    resource_table: list[ResourceTableEntry]
    labels: dict[int, RingLabel]
    _members: list[int] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self._members:
            self._members = sorted(nid for e in self.resource_table for nid in e.node_ids)

    def __len__(self) -> int:
        return len(self._members)

    def resolve_owner(self, key: int) -> int:
        """Owner of ``key`` on the full ring, read off the replicated resource table."""
        ids = self._members
        i = bisect.bisect_left(ids, key)
        return ids[i] if i < len(ids) else ids[0]

    def members(self, label: RingLabel) -> list[int]:
        ring = self.subrings.get(label)
        return list(ring.ids) if ring is not None else []


def partition(ring: Ring) -> FzOverlay:
    """Split ``ring`` into HOT/HOTTER/HOTTEST sub-rings and elect their heads."""
    nodes = list(ring.nodes.values())
    fractions = normalize_resources(nodes)
    unique = detect_unique(nodes)
    labels = {
        n.id: RingLabel.HOTTEST if n.id in unique else classify(fractions[n.id])
        for n in nodes
    }
    subrings: dict[RingLabel, Ring] = {}
    heads: dict[RingLabel, int] = {}
    for label in RingLabel:
        member_ids = [nid for nid in ring.ids if labels[nid] == label]
        if not member_ids:
            continue
        sub = build_ring(member_ids, m=ring.m,
                         resources={nid: ring.nodes[nid].resources for nid in member_ids})
        subrings[label] = sub
        heads[label] = elect_ring_head(sub)
    return FzOverlay(
        m=ring.m,
        subrings=subrings,
        ring_heads=heads,
        unique_nodes=frozenset(unique),
        resource_table=build_resource_table(nodes),
        labels=labels,
        _members=list(ring.ids),
    )


def replication_messages(overlay: FzOverlay) -> int:
    """Messages needed to ship a freshly built resource table to every other node."""
    return len(overlay) - 1


def fz_lookup(overlay: FzOverlay, origin: int, key: int) -> LookupResult:
    """Parallel three-ring lookup relayed through Ring-Heads.

    The origin forwards to its own head, which fans the query out to the
    other heads. The head of the owner's sub-ring routes to the owner over
    that sub-ring's fingers; the result travels back owner -> its head ->
    origin's head -> origin. Heads of the other rings answer with a miss.
    Hops follow the successful chain only; messages count every branch.
    """
    if origin not in overlay.labels:
        raise ValueError(f"origin {origin} is not active")
    owner = overlay.resolve_owner(key)
    if owner == origin:
        return LookupResult(owner=origin, path=[origin], messages=0,
                            schedule=Schedule(0), branch="local")
    try:
        home = overlay.labels[origin]
        target = overlay.labels[owner]
        home_head = overlay.ring_heads[home]
        target_head = overlay.ring_heads[target]
        target_ring = overlay.subrings[target]
    except KeyError as exc:
        raise OverlayError(f"owner {owner} of key {key} missing from the partition") from exc

    path = [origin]
    prefix = 0
    if home_head != origin:
        path.append(home_head)
        prefix = 1
    if target != home:
        path.append(target_head)
    before = len(path)
    route(target_ring, target_head, owner, path)
    if path[-1] != owner:
        raise OverlayError(f"intra-ring route ended at {path[-1]}, expected {owner}")
    intra = len(path) - before

    branches = []
    for label in overlay.ring_heads:
        if label == home:
            if label == target:
                branches.append(intra + (owner != home_head))
            continue
        if label == target:
            # fan-out, intra-ring route, owner -> head, head -> origin's head
            branches.append(1 + intra + (owner != target_head) + 1)
        else:
            branches.append(2)  # fan-out request + miss reply
    suffix = 1 if home_head != origin else 0
    schedule = Schedule(prefix, tuple(branches), suffix)
    messages = prefix + sum(branches) + suffix
    return LookupResult(owner=owner, path=path, messages=messages,
                        schedule=schedule, branch="same" if target == home else "cross")
