"""Simulated cluster: deterministic AllReduce and barrier execution.

Nodes live in one address space; communication is *modeled*, not
performed.  Every AllReduce combines per-node buffers over a fixed
left-leaning binary tree keyed by node id, so results are bitwise
reproducible regardless of thread count, and the ledger charges
beta * length * ceil(log2 P) cost units per call (zero for P = 1).
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NodeTaskError

__all__ = ["ClusterConfig", "CostLedger", "SimulatedCluster", "ceil_log2"]


def ceil_log2(p: int) -> int:
    """ceil(log2(p)) for p >= 1; the depth of a p-leaf reduction tree."""
    if p < 1:
        raise ConfigurationError(f"node count must be >= 1, got {p}")
    return int(p - 1).bit_length()


@dataclass
class ClusterConfig:
    n_nodes: int
    beta: float = 100.0  # modeled cost of moving one scalar one tree level
    threads: int = 1

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ConfigurationError(f"n_nodes must be >= 1, got {self.n_nodes}")
        if self.beta < 0:
            raise ConfigurationError(f"beta must be >= 0, got {self.beta}")
        if self.threads < 1:
            raise ConfigurationError(f"threads must be >= 1, got {self.threads}")


@dataclass
class CostLedger:
    """Accumulated modeled costs plus measured per-node compute time."""

    comp_units: float = 0.0
    comm_units: float = 0.0
    allreduce_calls: int = 0
    scalars_moved: int = 0
    call_log: list = field(default_factory=list)  # vector length per AllReduce
    wall_comp_seconds: np.ndarray | None = None
    wall_comp_max: float = 0.0

    def check_comm(self, beta: float, n_nodes: int) -> bool:
        """Recompute comm_units from the call log; True when they agree."""
        expected = beta * sum(self.call_log) * ceil_log2(n_nodes) if n_nodes > 1 else 0.0
        return expected == self.comm_units


class SimulatedCluster:
    """P simulated nodes with tree AllReduce and a cost ledger."""

    def __init__(self, config: ClusterConfig):
        self.config = config
        self.ledger = CostLedger(
            wall_comp_seconds=np.zeros(config.n_nodes, dtype=float)
        )

    @property
    def n_nodes(self) -> int:
        return self.config.n_nodes

    def _charge(self, length: int):
        p = self.config.n_nodes
        self.ledger.allreduce_calls += 1
        self.ledger.call_log.append(int(length))
        if p > 1:
            self.ledger.comm_units += self.config.beta * length * ceil_log2(p)
            self.ledger.scalars_moved += int(length)

    def allreduce_sum(self, vectors) -> np.ndarray:
        """Sum per-node vectors over the fixed tree; replicated result.

        Pairs nodes at stride 1, 2, 4, ... so for P = 3 the sum is
        (n0 + n1) + n2 exactly.
        """
        vectors = [np.array(v, dtype=float, copy=True) for v in vectors]
        p = self.config.n_nodes
        if len(vectors) != p:
            raise ConfigurationError(
                f"expected {p} buffers, got {len(vectors)}"
            )
        length = vectors[0].size
        for v in vectors[1:]:
            if v.size != length:
                raise ConfigurationError("AllReduce buffers must share a length")
        stride = 1
        while stride < p:
            for i in range(0, p - stride, 2 * stride):
                vectors[i] += vectors[i + stride]
            stride *= 2
        self._charge(length)
        return vectors[0]

    def allreduce_scalar(self, values) -> float:
        """Tree sum of one scalar per node (charged as a length-1 vector)."""
        arr = self.allreduce_sum([np.asarray([v], dtype=float) for v in values])
        return float(arr[0])

    def barrier_run(self, tasks) -> list:
        """Run one task per node; return results indexed by node id.

        All tasks complete before this returns.  A raising task aborts
        the run with its node id attached.  ``threads`` only changes how
        tasks are scheduled, never their results, because tasks may share
        state only read-only between barriers.
        """
        tasks = list(tasks)
        if not tasks:
            raise ConfigurationError("barrier_run needs at least one task")
        if len(tasks) != self.config.n_nodes:
            raise ConfigurationError(
                f"expected {self.config.n_nodes} tasks, got {len(tasks)}"
            )
        results = [None] * len(tasks)
        errors = [None] * len(tasks)
        elapsed = np.zeros(len(tasks))

        def invoke(node_id, fn):
            t0 = time.perf_counter()
            try:
                results[node_id] = fn()
            except Exception as exc:  # noqa: BLE001 - reattributed below
                errors[node_id] = exc
            finally:
                elapsed[node_id] = time.perf_counter() - t0

        if self.config.threads > 1:
            with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
                futs = [pool.submit(invoke, i, fn) for i, fn in enumerate(tasks)]
                for fut in futs:
                    fut.result()
        else:
            for i, fn in enumerate(tasks):
                invoke(i, fn)

        self.ledger.wall_comp_seconds += elapsed
        self.ledger.wall_comp_max += float(np.max(elapsed))
        for node_id, exc in enumerate(errors):
            if exc is not None:
                raise NodeTaskError(node_id, str(exc)) from exc
        return results
