"""Chord, RVN-Chord and FZ-Chord lookup simulation."""

from .fuzzy import FzOverlay, ResourceDescriptor, RingLabel, fz_lookup, partition
from .harness import ExperimentConfig, LatencyModel, MetricsRow, WorkloadSpec, run_experiment
from .ids import Bounds, ConfigError, distance_cw, finger_start, hash_id, in_interval
from .lookup import LookupResult, closest_preceding_finger, find_successor
from .ring import Ring, RingError, build_ring, join, leave, stabilize, successor_oracle
from .rvn import rvn_commit, rvn_lookup, rvn_repair

__version__ = "0.1.0"
