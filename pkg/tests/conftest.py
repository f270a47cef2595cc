import random

import pytest

from chordsim.ring import build_ring

# Ten ids consistent with every stated fact about the m=6 example ring:
# successor(1)=1, successor(29)=32, successor(36)=38, successor(44)=48.
SMALL_IDS = (1, 8, 14, 21, 32, 38, 42, 48, 51, 56)
SMALL_KEYS = (1, 2, 10, 24, 29, 30, 36, 38, 44, 54, 60)


@pytest.fixture
def small_ring():
    return build_ring(SMALL_IDS, SMALL_KEYS, m=6)


def brute_successor(ids, x, m):
    """Scan clockwise one identifier at a time."""
    active = set(ids)
    for d in range(1 << m):
        y = (x + d) % (1 << m)
        if y in active:
            return y
    raise AssertionError("empty ring")


def random_ring(n, m, seed, n_keys=None, resources=None):
    rnd = random.Random(seed)
    ids = rnd.sample(range(1 << m), n)
    keys = rnd.sample(range(1 << m), n if n_keys is None else n_keys)
    return build_ring(ids, keys, m, resources)


def key_partition_ok(ring):
    seen = set()
    for node in ring.nodes.values():
        if seen & node.stored_keys:
            return False
        seen |= node.stored_keys
        for k in node.stored_keys:
            if ring.successor(k) != node.id:
                return False
    return seen == ring.all_keys


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when == "call" and "test_acceptance.py::" in rep.nodeid:
                detail = rep.capstdout.strip().splitlines()
                lines.append((rep.nodeid.split("::")[-1], outcome.upper()[:4],
                              detail[-1] if detail else ""))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, verdict, detail in sorted(lines):
            terminalreporter.write_line(f"{verdict:<4} {name}  {detail}")
