"""Trace ingestion, derived traces, and seeded workload inflation.

Traces follow the public Alibaba GPU trace schema: one row per task with
milli-CPU, MiB memory, a whole-GPU count or a milli share of one GPU, and
an optional set of acceptable GPU models. Derivations rescale parts of a
trace by resampling within the affected task class, so the achieved
percentages (recorded in the provenance) are the nearest reachable with
whole tasks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .cluster import ClusterState, GpuDemand, TaskSpec
from .errors import ConfigError, TraceFormatError

TRACE_CSV_HEADER = ["name", "cpu_milli", "memory_mib", "num_gpu", "gpu_milli", "gpu_spec"]


@dataclass(frozen=True)
class Trace:
    tasks: tuple[TaskSpec, ...]
    provenance: dict

    @property
    def total_gpu_milli(self) -> int:
        return sum(t.gpu_demand.total_milli for t in self.tasks)


def _task_from_row(row: list[str], lineno: int) -> TaskSpec:
    if len(row) != len(TRACE_CSV_HEADER):
        raise TraceFormatError(lineno, f"expected {len(TRACE_CSV_HEADER)} columns, got {len(row)}")
    name, cpu_milli, memory_mib, num_gpu, gpu_milli, gpu_spec = row
    try:
        cpu = int(cpu_milli)
        mem = int(memory_mib)
        gpus = int(num_gpu)
        milli = int(gpu_milli)
    except ValueError as exc:
        raise TraceFormatError(lineno, str(exc)) from exc
    if cpu < 0 or mem < 0 or gpus < 0 or milli < 0:
        raise TraceFormatError(lineno, "negative resource value")
    if gpus >= 1:
        if milli not in (0, 1000):
            raise TraceFormatError(lineno, f"whole-GPU task must have gpu_milli 0 or 1000, got {milli}")
        demand = GpuDemand.full(gpus)
    elif 0 < milli < 1000:
        demand = GpuDemand.partial(milli)
    elif milli == 0:
        demand = GpuDemand.none()
    else:
        raise TraceFormatError(lineno, f"gpu_milli {milli} with num_gpu 0 is neither partial nor zero")
    constraint = frozenset(s for s in gpu_spec.split(";") if s)
    return TaskSpec(id=name, cpu_milli=cpu, memory_mib=mem, gpu_demand=demand, gpu_constraint=constraint)


def parse_trace(path: str | Path) -> Trace:
    path = Path(path)
    tasks = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRACE_CSV_HEADER:
            raise ConfigError(f"{path}: expected header {','.join(TRACE_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            tasks.append(_task_from_row(row, lineno))
    return Trace(tuple(tasks), provenance={"source": str(path), "derivation": "parsed"})


def write_trace(trace: Trace, path: str | Path) -> None:
    """Write a trace CSV plus a key=value sidecar recording its derivation."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_CSV_HEADER)
        for t in trace.tasks:
            d = t.gpu_demand
            num_gpu = d.value if d.kind == "full" else 0
            gpu_milli = d.value if d.kind == "partial" else (1000 if d.kind == "full" else 0)
            writer.writerow([t.id, t.cpu_milli, t.memory_mib, num_gpu, gpu_milli, ";".join(sorted(t.gpu_constraint))])
    meta = Path(str(path) + ".meta")
    with meta.open("w", encoding="utf-8") as fh:
        for key in sorted(trace.provenance):
            fh.write(f"{key}={trace.provenance[key]}\n")


def _sample_to_total(
    population: list[TaskSpec], target_milli: float, rng: np.random.Generator, suffix: str
) -> list[TaskSpec]:
    """Sample with replacement until the cumulative GPU demand is as close
    to the target as whole tasks allow."""
    chosen: list[TaskSpec] = []
    total = 0
    while total < target_milli:
        t = population[int(rng.integers(len(population)))]
        chosen.append(replace(t, id=f"{t.id}-{suffix}{len(chosen)}"))
        total += t.gpu_demand.total_milli
    if chosen:
        last = chosen[-1].gpu_demand.total_milli
        if abs(total - last - target_milli) < abs(total - target_milli):
            chosen.pop()
    return chosen


def derive_multigpu(trace: Trace, pct: int, seed: int) -> Trace:
    """Raise the total GPU demand of whole-GPU tasks by ``pct`` percent by
    sampling extra whole-GPU tasks; sharing and CPU-only tasks unchanged."""
    if pct == 0:
        return Trace(trace.tasks, dict(trace.provenance))
    if pct < 0:
        raise ConfigError(f"multi-GPU increase must be >= 0, got {pct}")
    full = [t for t in trace.tasks if t.gpu_demand.kind == "full"]
    if not full:
        raise ConfigError("trace has no whole-GPU tasks to inflate")
    base = sum(t.gpu_demand.total_milli for t in full)
    rng = np.random.default_rng(seed)
    extra = _sample_to_total(full, base * pct / 100, rng, "mg")
    achieved = 100 * sum(t.gpu_demand.total_milli for t in extra) / base
    provenance = dict(trace.provenance)
    provenance.update(
        {"derivation": "multigpu", "pct_nominal": pct, "pct_achieved": round(achieved, 4), "seed": seed}
    )
    return Trace(trace.tasks + tuple(extra), provenance)


def derive_sharinggpu(trace: Trace, pct: int, seed: int) -> Trace:
    """Resample GPU tasks so that sharing tasks request ``pct`` percent of
    the total GPU demand, keeping intra-class distributions and the
    CPU-only share of the task population."""
    if not 0 < pct <= 100:
        raise ConfigError(f"sharing-GPU percentage must be in (0, 100], got {pct}")
    partial = [t for t in trace.tasks if t.gpu_demand.kind == "partial"]
    full = [t for t in trace.tasks if t.gpu_demand.kind == "full"]
    cpuonly = [t for t in trace.tasks if t.gpu_demand.kind == "none"]
    if not partial:
        raise ConfigError("trace has no sharing-GPU tasks")
    if pct < 100 and not full:
        raise ConfigError("trace has no whole-GPU tasks")
    total = sum(t.gpu_demand.total_milli for t in partial) + sum(t.gpu_demand.total_milli for t in full)
    rng = np.random.default_rng(seed)
    new_partial = _sample_to_total(partial, total * pct / 100, rng, "sp")
    new_full = _sample_to_total(full, total * (100 - pct) / 100, rng, "sf") if pct < 100 else []
    cpu_share = len(cpuonly) / len(trace.tasks)
    n_gpu = len(new_partial) + len(new_full)
    n_cpu = round(cpu_share * n_gpu / (1 - cpu_share)) if cpu_share < 1 else 0
    new_cpu = []
    for i in range(n_cpu if cpuonly else 0):
        t = cpuonly[int(rng.integers(len(cpuonly)))]
        new_cpu.append(replace(t, id=f"{t.id}-sc{i}"))
    new_partial_milli = sum(t.gpu_demand.total_milli for t in new_partial)
    new_total = new_partial_milli + sum(t.gpu_demand.total_milli for t in new_full)
    provenance = dict(trace.provenance)
    provenance.update(
        {
            "derivation": "sharinggpu",
            "pct_nominal": pct,
            "pct_achieved": round(100 * new_partial_milli / new_total, 4),
            "seed": seed,
        }
    )
    return Trace(tuple(new_partial + new_full + new_cpu), provenance)


def derive_constrained(trace: Trace, pct: int, seed: int, cluster: ClusterState) -> Trace:
    """Give ``pct`` percent of GPU tasks a single-model GPU constraint,
    sampled proportionally to each model's share of the cluster's GPUs."""
    if not 0 < pct < 100:
        raise ConfigError(f"constrained percentage must be in (0, 100), got {pct}")
    gpu_indices = [i for i, t in enumerate(trace.tasks) if t.gpu_demand.kind != "none"]
    if not gpu_indices:
        raise ConfigError("trace has no GPU tasks to constrain")
    model_milli: dict[str, int] = {}
    for n in cluster.nodes:
        if n.gpu_model is not None and n.gpu_count:
            model_milli[n.gpu_model] = model_milli.get(n.gpu_model, 0) + 1000 * n.gpu_count
    if not model_milli:
        raise ConfigError("cluster has no GPUs to derive constraints from")
    models = sorted(model_milli)
    weights = np.array([model_milli[m] for m in models], dtype=float)
    weights /= weights.sum()
    rng = np.random.default_rng(seed)
    n_sel = round(pct / 100 * len(gpu_indices))
    selected = rng.choice(len(gpu_indices), size=n_sel, replace=False)
    tasks = list(trace.tasks)
    for sel in sorted(int(s) for s in selected):
        idx = gpu_indices[sel]
        model = models[int(rng.choice(len(models), p=weights))]
        tasks[idx] = replace(tasks[idx], gpu_constraint=frozenset({model}))
    provenance = dict(trace.provenance)
    provenance.update({"derivation": "constrained", "pct_nominal": pct, "seed": seed})
    return Trace(tuple(tasks), provenance)


class InflationStream:
    """With-replacement task sampler that stops once the cumulative GPU
    demand of drawn tasks reaches ``stop_ratio`` of the cluster capacity."""

    def __init__(self, base: Trace, rng_seed: int, total_gpu_capacity_milli: int, stop_ratio: float = 1.0):
        if stop_ratio <= 0:
            raise ConfigError(f"stop_ratio must be > 0, got {stop_ratio}")
        self.base = base
        self.rng_seed = rng_seed
        self.stop_ratio = stop_ratio
        self._threshold_milli = stop_ratio * total_gpu_capacity_milli
        self._rng = np.random.default_rng(rng_seed)
        self._drawn_gpu_milli = 0
        # A trace without GPU demand can never reach the threshold.
        self._exhausted = not base.tasks or base.total_gpu_milli == 0

    @property
    def drawn_gpu_milli(self) -> int:
        return self._drawn_gpu_milli

    def next_task(self) -> TaskSpec | None:
        """The next sampled task, or None once the stream is exhausted."""
        if self._exhausted or self._drawn_gpu_milli >= self._threshold_milli:
            self._exhausted = True
            return None
        task = self.base.tasks[int(self._rng.integers(len(self.base.tasks)))]
        self._drawn_gpu_milli += task.gpu_demand.total_milli
        return task


# Synthetic trace shaped like the production "Default" trace: population
# shares per GPU-request bucket 13.3 / 37.8 / 48.0 / 0.2 / 0.2 / 0.5 percent
# for no-GPU / sharing / 1 / 2 / 4 / 8 GPUs.
_BUCKETS = ("none", "partial", "full1", "full2", "full4", "full8")
_BUCKET_PROBS = (0.133, 0.378, 0.480, 0.002, 0.002, 0.005)

_PARTIAL_MILLI = (100, 200, 300, 400, 500, 600, 700, 800, 900)
_PARTIAL_PROBS = (0.05, 0.05, 0.10, 0.10, 0.15, 0.15, 0.20, 0.10, 0.10)

# (cpu_milli, memory_mib) options with probabilities, per bucket.
_SHAPES = {
    "none": (((2000, 4096), (4000, 8192), (8000, 16384), (16000, 32768)), (0.30, 0.30, 0.25, 0.15)),
    "partial": (((2000, 4096), (4000, 8192), (8000, 16384)), (0.40, 0.40, 0.20)),
    "full1": (((8000, 16384), (12000, 24576), (16000, 32768)), (0.40, 0.40, 0.20)),
    "full2": (((24000, 49152),), (1.0,)),
    "full4": (((48000, 98304),), (1.0,)),
    "full8": (((64000, 131072),), (1.0,)),
}
_BUCKET_GPUS = {"full1": 1, "full2": 2, "full4": 4, "full8": 8}


def synth_trace(n_tasks: int, seed: int) -> Trace:
    """Generate a synthetic trace with the Default-trace bucket shares."""
    if n_tasks < 1:
        raise ConfigError("n_tasks must be >= 1")
    rng = np.random.default_rng(seed)
    buckets = rng.choice(len(_BUCKETS), size=n_tasks, p=_BUCKET_PROBS)
    tasks = []
    for i, b in enumerate(buckets):
        bucket = _BUCKETS[int(b)]
        shapes, probs = _SHAPES[bucket]
        cpu, mem = shapes[int(rng.choice(len(shapes), p=probs))]
        if bucket == "none":
            demand = GpuDemand.none()
        elif bucket == "partial":
            demand = GpuDemand.partial(int(_PARTIAL_MILLI[int(rng.choice(len(_PARTIAL_MILLI), p=_PARTIAL_PROBS))]))
        else:
            demand = GpuDemand.full(_BUCKET_GPUS[bucket])
        tasks.append(TaskSpec(id=f"synth-{i:06d}", cpu_milli=cpu, memory_mib=mem, gpu_demand=demand))
    return Trace(tuple(tasks), provenance={"source": "synthetic", "derivation": "synth", "n_tasks": n_tasks, "seed": seed})
