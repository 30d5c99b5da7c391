"""Nodes, tasks, feasibility checks, and allocation mechanics.

All resource bookkeeping uses integer milli units (1000 milli-vCPU = one
virtual CPU, 1000 GPU-milli = one physical GPU) so that repeated
allocations never accumulate floating-point drift.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from .errors import ConfigError, ResourceOverflowError

if TYPE_CHECKING:
    from .power import HardwareProfile

GPU_MILLI = 1000


@dataclass(frozen=True)
class GpuDemand:
    """GPU request of a task: nothing, a fraction of one GPU, or k whole GPUs.

    A task may share a single GPU (partial) or exclusively occupy whole GPUs
    (full), never both.
    """

    kind: str  # "none" | "partial" | "full"
    value: int = 0  # partial: milli in [1, 999]; full: GPU count >= 1

    def __post_init__(self):
        if self.kind == "none":
            if self.value != 0:
                raise ValueError("cpu-only demand must carry value 0")
        elif self.kind == "partial":
            if not 1 <= self.value <= GPU_MILLI - 1:
                raise ValueError(f"partial GPU demand must be in [1, 999] milli, got {self.value}")
        elif self.kind == "full":
            if self.value < 1:
                raise ValueError(f"full GPU demand must be >= 1 GPU, got {self.value}")
        else:
            raise ValueError(f"unknown GPU demand kind {self.kind!r}")

    @classmethod
    def none(cls) -> "GpuDemand":
        return cls("none", 0)

    @classmethod
    def partial(cls, milli: int) -> "GpuDemand":
        return cls("partial", milli)

    @classmethod
    def full(cls, count: int) -> "GpuDemand":
        return cls("full", count)

    @property
    def total_milli(self) -> int:
        if self.kind == "partial":
            return self.value
        if self.kind == "full":
            return self.value * GPU_MILLI
        return 0


@dataclass(frozen=True)
class TaskSpec:
    """One task's resource demands and hardware-model constraints."""

    id: str
    cpu_milli: int
    memory_mib: int
    gpu_demand: GpuDemand
    cpu_constraint: frozenset[str] = frozenset()
    gpu_constraint: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.cpu_milli < 0:
            raise ValueError(f"task {self.id}: negative cpu_milli")
        if self.memory_mib < 0:
            raise ValueError(f"task {self.id}: negative memory_mib")


@dataclass
class NodeState:
    """One node's specs plus its allocated/unallocated resource vectors.

    ``gpu_unalloc_milli[g]`` is the unallocated share of GPU ``g`` in
    [0, 1000]; allocated share is the complement. ``resident_demands``
    counts hosted tasks by GPU-demand class (used by the clustering
    heuristic).
    """

    id: str
    cpu_model: str
    gpu_model: str | None
    cpu_capacity_milli: int
    mem_capacity_mib: int
    gpu_unalloc_milli: list[int]
    cpu_alloc_milli: int = 0
    mem_alloc_mib: int = 0
    resident_demands: Counter = field(default_factory=Counter)

    def __post_init__(self):
        if not 0 <= self.cpu_alloc_milli <= self.cpu_capacity_milli:
            raise ValueError(f"node {self.id}: CPU allocation outside capacity")
        if not 0 <= self.mem_alloc_mib <= self.mem_capacity_mib:
            raise ValueError(f"node {self.id}: memory allocation outside capacity")
        for g, r in enumerate(self.gpu_unalloc_milli):
            if not 0 <= r <= GPU_MILLI:
                raise ValueError(f"node {self.id}: GPU {g} unallocated share {r} outside [0, 1000]")
        if self.gpu_unalloc_milli and self.gpu_model is None:
            raise ValueError(f"node {self.id}: GPUs present but no GPU model")

    @property
    def gpu_count(self) -> int:
        return len(self.gpu_unalloc_milli)

    @property
    def cpu_unalloc_milli(self) -> int:
        return self.cpu_capacity_milli - self.cpu_alloc_milli

    @property
    def mem_unalloc_mib(self) -> int:
        return self.mem_capacity_mib - self.mem_alloc_mib

    @property
    def gpu_unalloc_total(self) -> int:
        return sum(self.gpu_unalloc_milli)

    @property
    def full_gpu_count(self) -> int:
        return sum(1 for r in self.gpu_unalloc_milli if r == GPU_MILLI)

    @property
    def max_partial_remainder(self) -> int:
        """Largest fractional unallocated share over the node's GPUs."""
        return max((r % GPU_MILLI for r in self.gpu_unalloc_milli), default=0)

    def clone(self) -> "NodeState":
        return NodeState(
            id=self.id,
            cpu_model=self.cpu_model,
            gpu_model=self.gpu_model,
            cpu_capacity_milli=self.cpu_capacity_milli,
            mem_capacity_mib=self.mem_capacity_mib,
            gpu_unalloc_milli=list(self.gpu_unalloc_milli),
            cpu_alloc_milli=self.cpu_alloc_milli,
            mem_alloc_mib=self.mem_alloc_mib,
            resident_demands=Counter(self.resident_demands),
        )


@dataclass(frozen=True)
class Placement:
    """A concrete intra-node assignment: which GPUs of which node a task uses."""

    node_id: str
    gpu_indices: tuple[int, ...] = ()


class ClusterState:
    """An ordered collection of nodes with cached capacity totals."""

    def __init__(self, nodes: list[NodeState], profiles: "HardwareProfile | None" = None):
        ids = [n.id for n in nodes]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate node ids in cluster")
        self.nodes = nodes
        self.profiles = profiles
        self._by_id = {n.id: n for n in nodes}
        self.total_gpu_capacity_milli = sum(GPU_MILLI * n.gpu_count for n in nodes)
        self.total_cpu_capacity_milli = sum(n.cpu_capacity_milli for n in nodes)
        # Per-dimension maxima over nodes, used by score normalizations.
        self.max_cpu_capacity_milli = max((n.cpu_capacity_milli for n in nodes), default=0)
        self.max_mem_capacity_mib = max((n.mem_capacity_mib for n in nodes), default=0)
        self.max_gpu_capacity_milli = max((GPU_MILLI * n.gpu_count for n in nodes), default=0)

    def node(self, node_id: str) -> NodeState:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise ResourceOverflowError(f"unknown node {node_id!r}") from None

    def __iter__(self):
        return iter(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)


def gpu_budget(node: NodeState) -> int:
    """Scalar GPU availability of a node, in milli.

    Whole free GPUs count fully; of the partially free ones only the largest
    fractional share counts, because a task cannot combine fractions across
    GPUs.
    """
    full = 0
    best_rem = 0
    for r in node.gpu_unalloc_milli:
        full += (r // GPU_MILLI) * GPU_MILLI
        rem = r % GPU_MILLI
        if rem > best_rem:
            best_rem = rem
    return full + best_rem


def is_feasible(node: NodeState, task: TaskSpec, *, strict_cond3: bool = False) -> bool:
    """Whether the node can host the task right now.

    Partial tasks by default need one GPU with enough unallocated share
    (fully idle GPUs qualify). With ``strict_cond3`` the fractional demand
    must fit into the largest *fractional* share instead, which forbids
    placing a sharing task on a fully idle GPU.
    """
    if task.cpu_milli > node.cpu_unalloc_milli:
        return False
    if task.memory_mib > node.mem_unalloc_mib:
        return False
    d = task.gpu_demand
    if d.kind == "full":
        if node.full_gpu_count < d.value:
            return False
    elif d.kind == "partial":
        if strict_cond3:
            if node.max_partial_remainder < d.value:
                return False
        elif not any(r >= d.value for r in node.gpu_unalloc_milli):
            return False
    if task.cpu_constraint and node.cpu_model not in task.cpu_constraint:
        return False
    if task.gpu_constraint:
        if node.gpu_model is None or node.gpu_model not in task.gpu_constraint:
            return False
    return True


def candidate_placements(node: NodeState, task: TaskSpec, *, strict_cond3: bool = False) -> list[Placement]:
    """All intra-node GPU choices for a feasible task; empty if infeasible.

    Full demands yield exactly one deterministic choice: the lowest-index
    fully free GPUs. Within a node all GPUs are the same model, so the
    choice affects determinism only.
    """
    if not is_feasible(node, task, strict_cond3=strict_cond3):
        return []
    d = task.gpu_demand
    if d.kind == "none":
        return [Placement(node.id)]
    if d.kind == "partial":
        return [
            Placement(node.id, (g,))
            for g, r in enumerate(node.gpu_unalloc_milli)
            if r >= d.value
        ]
    free = [g for g, r in enumerate(node.gpu_unalloc_milli) if r == GPU_MILLI]
    return [Placement(node.id, tuple(free[: d.value]))]


def _apply_to_node(node: NodeState, task: TaskSpec, placement: Placement) -> None:
    d = task.gpu_demand
    expected = {"none": 0, "partial": 1, "full": d.value if d.kind == "full" else 0}[d.kind]
    if len(placement.gpu_indices) != expected:
        raise ResourceOverflowError(
            f"task {task.id}: placement names {len(placement.gpu_indices)} GPUs, expected {expected}"
        )
    if len(set(placement.gpu_indices)) != len(placement.gpu_indices):
        raise ResourceOverflowError(f"task {task.id}: duplicate GPU indices in placement")
    if task.cpu_milli > node.cpu_unalloc_milli:
        raise ResourceOverflowError(f"task {task.id}: CPU overflow on node {node.id}")
    if task.memory_mib > node.mem_unalloc_mib:
        raise ResourceOverflowError(f"task {task.id}: memory overflow on node {node.id}")
    for g in placement.gpu_indices:
        if not 0 <= g < node.gpu_count:
            raise ResourceOverflowError(f"task {task.id}: GPU index {g} out of range on node {node.id}")
        if d.kind == "partial" and node.gpu_unalloc_milli[g] < d.value:
            raise ResourceOverflowError(f"task {task.id}: GPU {g} on node {node.id} lacks {d.value} milli")
        if d.kind == "full" and node.gpu_unalloc_milli[g] != GPU_MILLI:
            raise ResourceOverflowError(f"task {task.id}: GPU {g} on node {node.id} is not fully free")
    node.cpu_alloc_milli += task.cpu_milli
    node.mem_alloc_mib += task.memory_mib
    if d.kind == "partial":
        node.gpu_unalloc_milli[placement.gpu_indices[0]] -= d.value
    elif d.kind == "full":
        for g in placement.gpu_indices:
            node.gpu_unalloc_milli[g] = 0
    node.resident_demands[d] += 1


def apply(cluster: ClusterState, task: TaskSpec, placement: Placement) -> None:
    """Commit a placement, mutating the target node. Other nodes untouched."""
    _apply_to_node(cluster.node(placement.node_id), task, placement)


def hypothetical_apply(cluster: ClusterState, task: TaskSpec, placement: Placement) -> NodeState:
    """Return a copy of the target node with the placement applied.

    The cluster itself is never mutated, so scoring plugins can evaluate
    many hypothetical assignments against one shared snapshot.
    """
    node = cluster.node(placement.node_id).clone()
    _apply_to_node(node, task, placement)
    return node


CLUSTER_CSV_HEADER = ["node_id", "cpu_model", "cpu_milli", "memory_mib", "gpu_model", "gpu_count"]


def load_cluster(path: str | Path, profiles: "HardwareProfile | None" = None) -> ClusterState:
    """Load a cluster config CSV: one row per node, GPUs all fully free."""
    path = Path(path)
    nodes: list[NodeState] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CLUSTER_CSV_HEADER:
            raise ConfigError(f"{path}: expected header {','.join(CLUSTER_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                node_id, cpu_model, cpu_milli, memory_mib, gpu_model, gpu_count = row
                count = int(gpu_count)
                nodes.append(
                    NodeState(
                        id=node_id,
                        cpu_model=cpu_model,
                        gpu_model=gpu_model or None,
                        cpu_capacity_milli=int(cpu_milli),
                        mem_capacity_mib=int(memory_mib),
                        gpu_unalloc_milli=[GPU_MILLI] * count,
                    )
                )
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{path} line {lineno}: {exc}") from exc
    return ClusterState(nodes, profiles)


def write_cluster(nodes: list[NodeState], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CLUSTER_CSV_HEADER)
        for n in nodes:
            writer.writerow(
                [n.id, n.cpu_model, n.cpu_capacity_milli, n.mem_capacity_mib, n.gpu_model or "", n.gpu_count]
            )
