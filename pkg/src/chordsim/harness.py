"""Deterministic experiment engine.

Every random choice comes from a numpy ``Generator`` derived from the run
seed and a fixed per-purpose stream number, so a run is a pure function of
its configuration.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .fuzzy import ResourceDescriptor, fz_lookup, partition, replication_messages
from .ids import ConfigError, check_bits, hash_id
from .lookup import LookupResult, Schedule, find_successor
from .ring import Ring, build_ring, join, leave, stabilize
from .rvn import rvn_commit, rvn_lookup

PROTOCOLS = ("chord", "rvn", "fz")
WORKLOADS = ("uniform", "zipf", "sequential")

# independent random streams per run
BUILD, WORKLOAD, LATENCY, CHURN = range(4)

ZIPF_UNIVERSE = 1 << 16


def stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(purpose,)))


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str = "uniform"
    lookups: int = 1000
    seed: int = 0
    zipf_s: float = 1.2
    locality_window: int | None = None

    def __post_init__(self):
        if self.kind not in WORKLOADS:
            raise ConfigError(f"unknown workload {self.kind!r}; expected one of {WORKLOADS}")
        if self.lookups < 1:
            raise ConfigError("lookups must be >= 1")
        if self.kind == "zipf" and not self.zipf_s > 0:
            raise ConfigError("zipf exponent must be > 0")
        if self.kind == "sequential" and (self.locality_window is None or self.locality_window < 0):
            raise ConfigError("sequential workload needs a non-negative locality window")


class WorkItem(NamedTuple):
    """One lookup request.

    ``origin_u`` in [0, 1) selects the origin among whichever nodes are active
    when the lookup runs. For relative items ``key`` is a clockwise offset
    from the owner that resolved the previous lookup.
    """

    origin_u: float
    key: int
    relative: bool = False


def gen_workload(spec: WorkloadSpec, m: int) -> list[WorkItem]:
    check_bits(m)
    rng = stream(spec.seed, WORKLOAD)
    n = spec.lookups
    space = 1 << m
    origins = rng.random(n)
    if spec.kind == "uniform":
        keys = rng.integers(0, space, size=n, dtype=np.uint64)
        return [WorkItem(float(u), int(k)) for u, k in zip(origins, keys)]
    if spec.kind == "zipf":
        ranked = zipf_key_ranking(rng, m)
        probs = zipf_probabilities(len(ranked), spec.zipf_s)
        ranks = rng.choice(len(ranked), size=n, p=probs)
        return [WorkItem(float(u), ranked[r]) for u, r in zip(origins, ranks)]
    first = int(rng.integers(0, space, dtype=np.uint64))
    offsets = rng.integers(0, spec.locality_window + 1, size=n)
    items = [WorkItem(float(origins[0]), first)]
    items += [WorkItem(float(u), int(d), True) for u, d in zip(origins[1:], offsets[1:])]
    return items


def zipf_probabilities(universe: int, s: float) -> np.ndarray:
    weights = np.arange(1, universe + 1, dtype=float) ** -s
    return weights / weights.sum()


def zipf_key_ranking(rng: np.random.Generator, m: int) -> list[int]:
    """Distinct keys in popularity order (index 0 is the most popular)."""
    space = 1 << m
    universe = min(space, ZIPF_UNIVERSE)
    if space <= 4 * universe:
        return [int(k) for k in rng.permutation(space)[:universe]]
    seen: dict[int, None] = {}
    while len(seen) < universe:
        for k in rng.integers(0, space, size=universe, dtype=np.uint64):
            seen.setdefault(int(k), None)
            if len(seen) == universe:
                break
    return list(seen)


@dataclass(frozen=True)
class LatencyModel:
    kind: str = "uniform"
    fixed_ms: float = 50.0
    lo_ms: float = 10.0
    hi_ms: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform"):
            raise ConfigError(f"unknown latency model {self.kind!r}")
        if min(self.fixed_ms, self.lo_ms, self.hi_ms) < 0 or self.lo_ms > self.hi_ms:
            raise ConfigError("latencies must be >= 0 with lo <= hi")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> LatencyModel:
        """``fixed:<ms>`` or ``uniform:<lo>,<hi>``."""
        kind, _, args = text.partition(":")
        try:
            if kind == "fixed":
                return cls("fixed", fixed_ms=float(args), seed=seed)
            if kind == "uniform":
                lo, hi = (float(v) for v in args.split(","))
                return cls("uniform", lo_ms=lo, hi_ms=hi, seed=seed)
        except ValueError:
            pass
        raise ConfigError(f"bad latency spec {text!r}; use fixed:<ms> or uniform:<lo>,<hi>")

    def __str__(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.fixed_ms:g}"
        return f"uniform:{self.lo_ms:g},{self.hi_ms:g}"


class LatencySampler:
    def __init__(self, model: LatencyModel):
        self.model = model
        self._rng = stream(model.seed, LATENCY)

    def __call__(self) -> float:
        return sample_latency(self.model, self._rng)

    def elapsed(self, schedule: Schedule) -> float:
        """Virtual time of a lookup: serial prefix + slowest branch + serial suffix."""
        total = sum(self() for _ in range(schedule.prefix))
        if schedule.branches:
            total += max(sum(self() for _ in range(b)) for b in schedule.branches)
        total += sum(self() for _ in range(schedule.suffix))
        return total


def sample_latency(model: LatencyModel, rng: np.random.Generator | None = None) -> float:
    if model.kind == "fixed" or model.lo_ms == model.hi_ms:
        return model.fixed_ms if model.kind == "fixed" else model.lo_ms
    if rng is None:
        rng = stream(model.seed, LATENCY)
    return float(rng.uniform(model.lo_ms, model.hi_ms))


def bytes_per_id(m: int) -> int:
    return math.ceil(m / 8)


def memory_footprint(ring: Ring, protocol: str = "chord", overlay=None) -> int:
    """Routing-state bytes summed over all nodes.

    Base: m fingers x (start, interval end, node) plus successor and
    predecessor. RVN adds one id per node. FZ adds, at every node, a copy of
    the resource table (id + 4-byte count + status byte per entry) and the
    three Ring-Head ids.
    """
    n, b = len(ring), bytes_per_id(ring.m)
    total = n * (3 * ring.m + 2) * b
    if protocol == "rvn":
        total += n * b
    elif protocol == "fz":
        if overlay is None:
            raise ValueError("fz memory accounting needs the overlay")
        total += n * (len(overlay.resource_table) * (b + 4 + 1) + 3 * b)
    return total


COMMON_RESOURCES = tuple(
    ResourceDescriptor(k, a)
    for k, a in [
        ("cpu", "2core"), ("cpu", "4core"), ("cpu", "8core"), ("ram", "1ghz"),
        ("ram", "4gb"), ("ram", "16gb"), ("disk", "500gb"), ("disk", "2tb"),
        ("net", "1gbps"), ("net", "10gbps"), ("os", "linux"), ("gpu", "t4"),
    ]
)
UNIQUE_RESOURCE_RATE = 0.03


def synthetic_resources(node_id: int, rng: np.random.Generator) -> frozenset[ResourceDescriptor]:
    """Draw a resource set from a shared catalog; a few nodes get a one-off device."""
    count = int(rng.integers(1, len(COMMON_RESOURCES) + 1))
    picks = rng.choice(len(COMMON_RESOURCES), size=count, replace=False)
    res = {COMMON_RESOURCES[i] for i in picks}
    if rng.random() < UNIQUE_RESOURCE_RATE:
        res.add(ResourceDescriptor("special", f"dev{node_id}"))
    return frozenset(res)


def draw_distinct(rng: np.random.Generator, count: int, m: int, exclude: Iterable[int] = ()) -> list[int]:
    space = 1 << m
    taken = set(exclude)
    if count > space - len(taken):
        raise ConfigError(f"cannot draw {count} distinct ids from 2^{m}")
    out: list[int] = []
    while len(out) < count:
        for v in rng.integers(0, space, size=count - len(out), dtype=np.uint64):
            v = int(v)
            if v not in taken:
                taken.add(v)
                out.append(v)
    return out


@dataclass
class MetricsRow:
    protocol: str
    nodes: int
    m: int
    workload: str
    seed: int
    lookups: int
    avg_hops: float
    avg_messages: float
    avg_time_ms: float
    memory_bytes: int
    maintenance_messages: int

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def failed(self) -> bool:
        return math.isnan(self.avg_hops)


FIELDS = tuple(MetricsRow.__dataclass_fields__)


@dataclass
class ExperimentConfig:
    protocol: str
    nodes: int
    m: int
    workload: WorkloadSpec
    latency: LatencyModel = field(default_factory=LatencyModel)
    churn_rate: float = 0.0
    seed: int = 0
    n_keys: int | None = None
    rvn_modular_guard: bool = False
    resources: dict[int, frozenset] | None = None
    hashed_ids: bool = False

    def validate(self) -> None:
        check_bits(self.m)
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}")
        if self.resources is not None and len(self.resources) != self.nodes:
            raise ConfigError("resource file must list exactly one record per node")
        if not 1 <= self.nodes <= (1 << self.m):
            raise ConfigError(f"nodes={self.nodes} does not fit in 2^{self.m} identifiers")
        if self.churn_rate < 0:
            raise ConfigError("churn rate must be >= 0")


class TraceRecord(NamedTuple):
    protocol: str
    origin: int
    key: int
    owner: int
    hops: int
    messages: int
    time_ms: float


def build_initial_ring(cfg: ExperimentConfig) -> Ring:
    rng = stream(cfg.seed, BUILD)
    if cfg.resources is not None:
        ids = sorted(cfg.resources)
        resources = dict(cfg.resources)
    else:
        ids = hashed_node_ids(cfg.nodes, cfg.m) if cfg.hashed_ids else draw_distinct(rng, cfg.nodes, cfg.m)
        resources = {n: synthetic_resources(n, rng) for n in ids}
    n_keys = cfg.nodes if cfg.n_keys is None else cfg.n_keys
    keys = draw_distinct(rng, min(n_keys, 1 << cfg.m), cfg.m)
    return build_ring(ids, keys, cfg.m, resources)


def hashed_node_ids(count: int, m: int) -> list[int]:
    """Ids from SHA-1 of synthetic ``IP:port`` labels; colliding labels are skipped."""
    if count > (1 << m) // 2:
        raise ConfigError(f"hashed ids need 2^m well above the node count (N={count}, m={m})")
    ids: dict[int, None] = {}
    i = 0
    while len(ids) < count:
        ids.setdefault(hash_id(f"10.{(i >> 16) & 255}.{(i >> 8) & 255}.{i & 255}:4000", m), None)
        i += 1
    return list(ids)


def run_experiment(
    cfg: ExperimentConfig,
    trace: Callable[[TraceRecord], None] | None = None,
    ring: Ring | None = None,
) -> MetricsRow:
    """Run one protocol over one workload and aggregate per-lookup metrics."""
    cfg.validate()
    if ring is None:
        ring = build_initial_ring(cfg)
    overlay = partition(ring) if cfg.protocol == "fz" else None
    maintenance = replication_messages(overlay) if overlay is not None else 0
    items = gen_workload(cfg.workload, cfg.m)
    latency = LatencySampler(cfg.latency)
    churn_rng = stream(cfg.seed, CHURN)
    space = 1 << cfg.m

    hops = messages = 0
    elapsed = 0.0
    prev_owner: int | None = None
    for item in items:
        if cfg.churn_rate > 0:
            events = int(churn_rng.poisson(cfg.churn_rate))
            for _ in range(events):
                maintenance += churn_event(ring, churn_rng)
            if events and overlay is not None:
                overlay = partition(ring)
                maintenance += replication_messages(overlay)
        if not len(ring):
            raise ExperimentError("ring shrank to zero nodes")
        ids = ring.ids
        origin = ids[min(int(item.origin_u * len(ids)), len(ids) - 1)]
        if item.relative and prev_owner is not None:
            key = (prev_owner + item.key) % space
        else:
            key = item.key % space

        result = _lookup(cfg, ring, overlay, origin, key)
        if cfg.protocol == "rvn":
            maintenance += rvn_commit(ring, result.owner)
        result.elapsed_ms = latency.elapsed(result.schedule)
        hops += result.hops
        messages += result.messages
        elapsed += result.elapsed_ms
        prev_owner = result.owner
        if trace is not None:
            trace(TraceRecord(cfg.protocol, origin, key, result.owner,
                              result.hops, result.messages, result.elapsed_ms))

    count = len(items)
    return MetricsRow(
        protocol=cfg.protocol,
        nodes=cfg.nodes,
        m=cfg.m,
        workload=cfg.workload.kind,
        seed=cfg.seed,
        lookups=count,
        avg_hops=hops / count,
        avg_messages=messages / count,
        avg_time_ms=elapsed / count,
        memory_bytes=memory_footprint(ring, cfg.protocol, overlay),
        maintenance_messages=maintenance,
    )


def failed_row(cfg: ExperimentConfig) -> MetricsRow:
    nan = float("nan")
    return MetricsRow(cfg.protocol, cfg.nodes, cfg.m, cfg.workload.kind, cfg.seed,
                      cfg.workload.lookups, nan, nan, nan, -1, -1)


def _lookup(cfg: ExperimentConfig, ring: Ring, overlay, origin: int, key: int) -> LookupResult:
    if cfg.protocol == "chord":
        return find_successor(ring, origin, key)
    if cfg.protocol == "rvn":
        return rvn_lookup(ring, origin, key, modular_guard=cfg.rvn_modular_guard)
    return fz_lookup(overlay, origin, key)


def churn_event(ring: Ring, rng: np.random.Generator) -> int:
    """One join or leave (coin flip), followed by stabilization.

    Returns the number of pointers stabilization had to correct.
    """
    full = len(ring) >= (1 << ring.m)
    if full or (len(ring) > 1 and rng.random() < 0.5):
        victim = ring.ids[int(rng.integers(0, len(ring)))]
        leave(ring, victim, stabilize_after=False)
    else:
        (new_id,) = draw_distinct(rng, 1, ring.m, exclude=ring.nodes)
        join(ring, new_id, synthetic_resources(new_id, rng), stabilize_after=False)
    return stabilize(ring)
