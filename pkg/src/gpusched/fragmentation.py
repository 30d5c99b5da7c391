"""Target workloads and expected GPU fragmentation.

A node's fragmentation for a task class is the amount of its unallocated
GPU milli that a task of that class could not use: everything, if the node
cannot host the class at all; otherwise only the shares that are unusable
for the class's demand shape (partial remnants below a sharing demand,
non-whole GPUs for whole-GPU demands, all shares for CPU-only demands
under the literal reading).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .cluster import (
    GPU_MILLI,
    ClusterState,
    GpuDemand,
    NodeState,
    Placement,
    TaskSpec,
    hypothetical_apply,
    is_feasible,
)
from .errors import ConfigError

CPU_CLASS_STEP_MILLI = 500
MEM_CLASS_STEP_MIB = 1024


@dataclass(frozen=True)
class TaskClass:
    """A demand class of the target workload with its popularity."""

    cpu_milli: int
    memory_mib: int
    gpu_demand: GpuDemand
    gpu_constraint: frozenset[str]
    popularity: float

    def as_task(self) -> TaskSpec:
        return TaskSpec(
            id="",
            cpu_milli=self.cpu_milli,
            memory_mib=self.memory_mib,
            gpu_demand=self.gpu_demand,
            gpu_constraint=self.gpu_constraint,
        )


@dataclass(frozen=True)
class TargetWorkload:
    classes: tuple[TaskClass, ...]

    def __post_init__(self):
        keys = [(c.gpu_demand, c.gpu_constraint, c.cpu_milli, c.memory_mib) for c in self.classes]
        if len(set(keys)) != len(keys):
            raise ConfigError("duplicate task classes in target workload")
        total = sum(c.popularity for c in self.classes)
        if self.classes and abs(total - 1.0) > 1e-9:
            raise ConfigError(f"class popularities sum to {total}, expected 1")


def _round_to(value: int, step: int) -> int:
    return (value + step // 2) // step * step


def derive_target_workload(tasks: Sequence[TaskSpec]) -> TargetWorkload:
    """Bucket a trace into demand classes keyed by GPU demand, GPU
    constraint, and coarsely rounded CPU/memory; popularity is frequency."""
    if not tasks:
        raise ConfigError("cannot derive a target workload from an empty trace")
    counts: dict[tuple, int] = {}
    for t in tasks:
        key = (
            t.gpu_demand,
            t.gpu_constraint,
            _round_to(t.cpu_milli, CPU_CLASS_STEP_MILLI),
            _round_to(t.memory_mib, MEM_CLASS_STEP_MIB),
        )
        counts[key] = counts.get(key, 0) + 1
    n = len(tasks)
    classes = tuple(
        TaskClass(cpu_milli=cpu, memory_mib=mem, gpu_demand=d, gpu_constraint=constraint, popularity=c / n)
        for (d, constraint, cpu, mem), c in sorted(
            counts.items(), key=lambda kv: (kv[0][0].kind, kv[0][0].value, kv[0][2], kv[0][3], sorted(kv[0][1]))
        )
    )
    return TargetWorkload(classes)


def frag_node_for_class(
    node: NodeState,
    cls: TaskClass,
    *,
    strict_cond3: bool = False,
    cpuonly_frag_zero: bool = False,
) -> int:
    """Unallocated GPU milli of the node that a task of this class cannot use."""
    total = node.gpu_unalloc_total
    if not is_feasible(node, cls.as_task(), strict_cond3=strict_cond3):
        return total
    d = cls.gpu_demand
    if d.kind == "none":
        return 0 if cpuonly_frag_zero else total
    if d.kind == "full":
        return total - GPU_MILLI * node.full_gpu_count
    return sum(r for r in node.gpu_unalloc_milli if 0 < r < d.value)


def frag_node_expected(
    node: NodeState,
    workload: TargetWorkload,
    *,
    strict_cond3: bool = False,
    cpuonly_frag_zero: bool = False,
) -> float:
    """Popularity-weighted expected fragmentation of one node, in milli."""
    return sum(
        c.popularity
        * frag_node_for_class(node, c, strict_cond3=strict_cond3, cpuonly_frag_zero=cpuonly_frag_zero)
        for c in workload.classes
    )


def frag_datacenter(
    cluster: ClusterState,
    workload: TargetWorkload,
    *,
    strict_cond3: bool = False,
    cpuonly_frag_zero: bool = False,
) -> float:
    return sum(
        frag_node_expected(n, workload, strict_cond3=strict_cond3, cpuonly_frag_zero=cpuonly_frag_zero)
        for n in cluster.nodes
    )


def frag_delta(
    cluster: ClusterState,
    task: TaskSpec,
    placement: Placement,
    workload: TargetWorkload,
    *,
    strict_cond3: bool = False,
    cpuonly_frag_zero: bool = False,
) -> float:
    """Change of the affected node's expected fragmentation; may be negative."""
    node = cluster.node(placement.node_id)
    hyp = hypothetical_apply(cluster, task, placement)
    kwargs = dict(strict_cond3=strict_cond3, cpuonly_frag_zero=cpuonly_frag_zero)
    return frag_node_expected(hyp, workload, **kwargs) - frag_node_expected(node, workload, **kwargs)


_KIND_NONE, _KIND_PARTIAL, _KIND_FULL = 0, 1, 2


class FragEvaluator:
    """Optimized expected-fragmentation evaluation for the scheduling loop.

    Equivalent to :func:`frag_node_expected`, but compiles the workload
    once and evaluates hypothetical placements without cloning nodes.
    """

    def __init__(
        self,
        workload: TargetWorkload,
        *,
        strict_cond3: bool = False,
        cpuonly_frag_zero: bool = False,
    ):
        self.workload = workload
        self.strict_cond3 = strict_cond3
        self.cpuonly_frag_zero = cpuonly_frag_zero
        self._classes = []
        for c in workload.classes:
            kind = {"none": _KIND_NONE, "partial": _KIND_PARTIAL, "full": _KIND_FULL}[c.gpu_demand.kind]
            constraint = c.gpu_constraint if c.gpu_constraint else None
            self._classes.append((kind, c.gpu_demand.value, c.cpu_milli, c.memory_mib, constraint, c.popularity))
        self._partial_demands = sorted({c[1] for c in self._classes if c[0] == _KIND_PARTIAL})

    def node_value(self, node: NodeState) -> float:
        return self._value(
            node.gpu_unalloc_milli,
            node.gpu_model,
            node.cpu_unalloc_milli,
            node.mem_unalloc_mib,
        )

    def hyp_value(self, node: NodeState, task: TaskSpec, placement: Placement) -> float:
        """Fragmentation the node would have after the placement."""
        d = task.gpu_demand
        gpus = node.gpu_unalloc_milli
        if d.kind == "partial":
            g = placement.gpu_indices[0]
            gpus = gpus[:g] + [gpus[g] - d.value] + gpus[g + 1 :]
        elif d.kind == "full":
            chosen = set(placement.gpu_indices)
            gpus = [0 if g in chosen else r for g, r in enumerate(gpus)]
        return self._value(
            gpus,
            node.gpu_model,
            node.cpu_unalloc_milli - task.cpu_milli,
            node.mem_unalloc_mib - task.memory_mib,
        )

    def _value(self, gpus: Sequence[int], gpu_model: str | None, cpu_un: int, mem_un: int) -> float:
        total = 0
        full = 0
        max_r = 0
        max_rem = 0
        nonzero = []
        for r in gpus:
            total += r
            if r == GPU_MILLI:
                full += 1
            elif r > max_rem:
                max_rem = r
            if r > max_r:
                max_r = r
            if 0 < r < GPU_MILLI:
                nonzero.append(r)
        # Unusable-partial-share sums, one cumulative value per distinct demand.
        nonzero.sort()
        partial_sums = {}
        acc = 0
        i = 0
        for dem in self._partial_demands:
            while i < len(nonzero) and nonzero[i] < dem:
                acc += nonzero[i]
                i += 1
            partial_sums[dem] = acc
        strict = self.strict_cond3
        cpuonly_zero = self.cpuonly_frag_zero
        value = 0.0
        for kind, dval, cpu, mem, constraint, p in self._classes:
            if cpu > cpu_un or mem > mem_un or (constraint is not None and (gpu_model is None or gpu_model not in constraint)):
                value += p * total
            elif kind == _KIND_FULL:
                value += p * (total if full < dval else total - GPU_MILLI * full)
            elif kind == _KIND_PARTIAL:
                feasible = (max_rem >= dval) if strict else (max_r >= dval)
                value += p * (partial_sums[dval] if feasible else total)
            elif not cpuonly_zero:
                value += p * total
        return value


WORKLOAD_CSV_HEADER = ["cpu_milli", "memory_mib", "num_gpu", "gpu_milli", "gpu_spec", "popularity"]


def write_workload(workload: TargetWorkload, path: str | Path) -> None:
    """Export a target workload so derived workloads are inspectable and reusable."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(WORKLOAD_CSV_HEADER)
        for c in workload.classes:
            d = c.gpu_demand
            num_gpu = d.value if d.kind == "full" else 0
            gpu_milli = d.value if d.kind == "partial" else (GPU_MILLI if d.kind == "full" else 0)
            writer.writerow(
                [c.cpu_milli, c.memory_mib, num_gpu, gpu_milli, ";".join(sorted(c.gpu_constraint)), repr(c.popularity)]
            )


def load_workload(path: str | Path) -> TargetWorkload:
    path = Path(path)
    classes = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != WORKLOAD_CSV_HEADER:
            raise ConfigError(f"{path}: expected header {','.join(WORKLOAD_CSV_HEADER)}")
        for row in reader:
            if not row:
                continue
            cpu, mem, num_gpu, gpu_milli, gpu_spec, popularity = row
            if int(num_gpu) >= 1:
                demand = GpuDemand.full(int(num_gpu))
            elif int(gpu_milli) > 0:
                demand = GpuDemand.partial(int(gpu_milli))
            else:
                demand = GpuDemand.none()
            constraint = frozenset(s for s in gpu_spec.split(";") if s)
            classes.append(TaskClass(int(cpu), int(mem), demand, constraint, float(popularity)))
    return TargetWorkload(tuple(classes))
