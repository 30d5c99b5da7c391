"""The online scheduling loop.

Tasks are drawn from the inflation stream one at a time; each scheduling
decision is atomic and applied before the next draw. Failed tasks are
dropped (no retries) but stay in the requested totals, which is what makes
the allocation ratio a fragmentation signal. Power and fragmentation are
tracked incrementally and can be verified against full recomputation.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .cluster import ClusterState, TaskSpec, apply, load_cluster
from .errors import ConfigError, GpuSchedError
from .fragmentation import (
    FragEvaluator,
    TargetWorkload,
    derive_target_workload,
    load_workload,
)
from .policies import Decision, PolicyConfig, select
from .power import HardwareProfile, cpu_power, datacenter_power, gpu_power, load_profiles
from .reporting import MetricSample
from .workload import InflationStream, Trace, parse_trace

_RATIO_EPS = 1e-9


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one run bit-for-bit."""

    cluster_file: str
    profile_file: str
    trace_file: str
    policy: str
    seed: int
    checkpoint_step: float = 0.01
    stop_ratio: float = 1.0
    strict_cond3: bool = False
    cpuonly_frag_zero: bool = False
    workload_file: str | None = None
    debug_verify: bool = False

    def __post_init__(self):
        if self.checkpoint_step <= 0 or self.checkpoint_step > 1:
            raise ConfigError(f"checkpoint_step must be in (0, 1], got {self.checkpoint_step}")
        steps = 1.0 / self.checkpoint_step
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigError(f"checkpoint_step {self.checkpoint_step} must divide 1.0")
        if self.stop_ratio <= 0:
            raise ConfigError(f"stop_ratio must be > 0, got {self.stop_ratio}")


@dataclass
class RunLedger:
    """Outcome record of one run: totals, per-task outcomes, and samples."""

    policy: str
    seed: int
    requested_gpu_milli: int = 0
    allocated_gpu_milli: int = 0
    tasks_arrived: int = 0
    tasks_failed: int = 0
    outcomes: list[tuple[str, str | None]] = field(default_factory=list)
    samples: list[MetricSample] = field(default_factory=list)
    checkpoint_counts: list[tuple[int, int]] = field(default_factory=list)

    def ratios(self) -> tuple[float, ...]:
        return tuple(s.ratio for s in self.samples)

    def write_csv(self, path: str | Path) -> None:
        import csv

        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(LEDGER_CSV_HEADER)
            for s, (arrived, failed) in zip(self.samples, self.checkpoint_counts):
                writer.writerow(
                    [
                        self.policy,
                        self.seed,
                        repr(s.ratio),
                        repr(s.eopc_w),
                        repr(s.eopc_cpu_w),
                        repr(s.eopc_gpu_w),
                        repr(s.grar),
                        s.frag_milli,
                        arrived,
                        failed,
                    ]
                )


LEDGER_CSV_HEADER = [
    "policy",
    "seed",
    "ratio",
    "eopc_w",
    "eopc_cpu_w",
    "eopc_gpu_w",
    "grar",
    "frag_milli",
    "tasks_arrived",
    "tasks_failed",
]


def read_ledger_csv(path: str | Path) -> RunLedger:
    """Rebuild the checkpoint view of a ledger from its CSV export."""
    import csv

    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != LEDGER_CSV_HEADER:
            raise ConfigError(f"{path}: expected header {','.join(LEDGER_CSV_HEADER)}")
        ledger: RunLedger | None = None
        for row in reader:
            if not row:
                continue
            if ledger is None:
                ledger = RunLedger(policy=row[0], seed=int(row[1]))
            ledger.samples.append(
                MetricSample(
                    ratio=float(row[2]),
                    eopc_w=float(row[3]),
                    eopc_cpu_w=float(row[4]),
                    eopc_gpu_w=float(row[5]),
                    grar=float(row[6]),
                    frag_milli=int(row[7]),
                )
            )
            ledger.checkpoint_counts.append((int(row[8]), int(row[9])))
            ledger.tasks_arrived = int(row[8])
            ledger.tasks_failed = int(row[9])
    if ledger is None:
        raise ConfigError(f"{path}: empty ledger")
    return ledger


def schedule_one(
    cluster: ClusterState,
    task: TaskSpec,
    policy: PolicyConfig,
    workload: TargetWorkload | None,
    profile: HardwareProfile | None,
    *,
    strict_cond3: bool = False,
    cpuonly_frag_zero: bool = False,
    frag_evaluator: FragEvaluator | None = None,
) -> Decision:
    """One atomic decision: pick a node and commit the placement if any."""
    decision = select(
        cluster,
        task,
        policy,
        workload,
        profile,
        strict_cond3=strict_cond3,
        cpuonly_frag_zero=cpuonly_frag_zero,
        frag_evaluator=frag_evaluator,
    )
    if decision.scheduled:
        apply(cluster, task, decision.placement)
    return decision


def simulate(
    cluster: ClusterState,
    profile: HardwareProfile,
    trace: Trace,
    policy: PolicyConfig,
    workload: TargetWorkload,
    *,
    seed: int,
    checkpoint_step: float = 0.01,
    stop_ratio: float = 1.0,
    strict_cond3: bool = False,
    cpuonly_frag_zero: bool = False,
    debug_verify: bool = False,
) -> RunLedger:
    """Run the inflation protocol on a freshly loaded cluster state."""
    capacity = cluster.total_gpu_capacity_milli
    stream = InflationStream(trace, seed, capacity, stop_ratio)
    evaluator = FragEvaluator(workload, strict_cond3=strict_cond3, cpuonly_frag_zero=cpuonly_frag_zero)

    breakdown = datacenter_power(cluster, profile)
    eopc_cpu = breakdown.cpu_w
    eopc_gpu = breakdown.gpu_w
    frag_by_node = {n.id: evaluator.node_value(n) for n in cluster.nodes}
    frag_total = sum(frag_by_node.values())

    ledger = RunLedger(policy=policy.canonical, seed=seed)
    k = 1
    k_max = round(stop_ratio / checkpoint_step)

    while (task := stream.next_task()) is not None:
        ledger.requested_gpu_milli += task.gpu_demand.total_milli
        ledger.tasks_arrived += 1
        decision = select(
            cluster,
            task,
            policy,
            workload,
            profile,
            strict_cond3=strict_cond3,
            cpuonly_frag_zero=cpuonly_frag_zero,
            frag_evaluator=evaluator,
        )
        if decision.scheduled:
            node = cluster.node(decision.placement.node_id)
            cpu_before = cpu_power(node, profile)
            gpu_before = gpu_power(node, profile)
            apply(cluster, task, decision.placement)
            eopc_cpu += cpu_power(node, profile) - cpu_before
            eopc_gpu += gpu_power(node, profile) - gpu_before
            new_frag = evaluator.node_value(node)
            frag_total += new_frag - frag_by_node[node.id]
            frag_by_node[node.id] = new_frag
            ledger.allocated_gpu_milli += task.gpu_demand.total_milli
            ledger.outcomes.append((task.id, node.id))
        else:
            ledger.tasks_failed += 1
            ledger.outcomes.append((task.id, None))

        ratio = ledger.requested_gpu_milli / capacity
        while k <= k_max and k * checkpoint_step <= ratio + _RATIO_EPS:
            if debug_verify:
                _verify_tracking(cluster, profile, evaluator, eopc_cpu, eopc_gpu, frag_total)
            ledger.samples.append(
                MetricSample(
                    ratio=round(k * checkpoint_step, 12),
                    eopc_w=eopc_cpu + eopc_gpu,
                    eopc_cpu_w=eopc_cpu,
                    eopc_gpu_w=eopc_gpu,
                    grar=ledger.allocated_gpu_milli / ledger.requested_gpu_milli,
                    frag_milli=round(frag_total),
                )
            )
            ledger.checkpoint_counts.append((ledger.tasks_arrived, ledger.tasks_failed))
            k += 1
    return ledger


def _verify_tracking(cluster, profile, evaluator, eopc_cpu, eopc_gpu, frag_total) -> None:
    fresh = datacenter_power(cluster, profile)
    if abs(fresh.cpu_w - eopc_cpu) > 1e-6 or abs(fresh.gpu_w - eopc_gpu) > 1e-6:
        raise GpuSchedError(
            f"incremental power tracking diverged: cpu {eopc_cpu} vs {fresh.cpu_w}, gpu {eopc_gpu} vs {fresh.gpu_w}"
        )
    fresh_frag = sum(evaluator.node_value(n) for n in cluster.nodes)
    if abs(fresh_frag - frag_total) > 1e-3:
        raise GpuSchedError(f"incremental fragmentation tracking diverged: {frag_total} vs {fresh_frag}")


def run(config: RunConfig) -> RunLedger:
    """Load inputs per the config and execute one deterministic run."""
    profile = load_profiles(config.profile_file)
    cluster = load_cluster(config.cluster_file, profile)
    trace = parse_trace(config.trace_file)
    if config.workload_file is not None:
        workload = load_workload(config.workload_file)
    else:
        workload = derive_target_workload(trace.tasks)
    policy = PolicyConfig.parse(config.policy)
    return simulate(
        cluster,
        profile,
        trace,
        policy,
        workload,
        seed=config.seed,
        checkpoint_step=config.checkpoint_step,
        stop_ratio=config.stop_ratio,
        strict_cond3=config.strict_cond3,
        cpuonly_frag_zero=config.cpuonly_frag_zero,
        debug_verify=config.debug_verify,
    )


def worker_count(n_jobs: int) -> int:
    cap = os.environ.get("GPUSCHED_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_jobs, limit))


def run_many(configs: list[RunConfig]) -> list[RunLedger]:
    """Execute runs concurrently; results keep the order of the configs."""
    workers = worker_count(len(configs))
    if workers == 1 or len(configs) == 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, configs))
