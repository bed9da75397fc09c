"""Counter-based random streams and the replication work pool.

Every replication draws from its own Philox stream whose key is derived from
``(master_seed, domain, replication_index, *extra)``.  Results therefore do
not depend on how replications are grouped into chunks or spread over
workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

# disjoint key domains; never renumber, existing seeds would change meaning
DOMAINS = {
    "W": 0,
    "limit-W": 1,
    "limit-B": 2,
    "mlmc": 3,
    "psi": 4,
    "cross-qv": 5,
    "lemma3": 6,
    "test": 7,
}

CHUNK = 1024


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    replication_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if int(self.replication_index) < 0:
            raise ValueError("replication_index must be nonnegative")

    def rng(self, domain: str, *extra: int) -> np.random.Generator:
        key = np.random.SeedSequence(
            int(self.master_seed),
            spawn_key=(DOMAINS[domain], int(self.replication_index), *map(int, extra)),
        ).generate_state(2, np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def default_jobs() -> int:
    return os.cpu_count() or 1


def chunks(start: int, stop: int, size: int = CHUNK) -> list[range]:
    return [range(i, min(i + size, stop)) for i in range(start, stop, size)]


def run_ordered(fn: Callable, tasks: Sequence, jobs: int = 1) -> list:
    """Apply ``fn`` to every task, possibly on a thread pool, keeping task order."""
    if jobs is None or jobs < 1:
        raise ValueError("jobs must be a positive integer")
    if jobs == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))
