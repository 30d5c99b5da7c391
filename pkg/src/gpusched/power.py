"""Estimated power consumption of nodes and the datacenter.

The CPU estimate charges a whole physical CPU package at maximum power as
soon as any of its virtual CPUs is allocated, and idle power for every
package that is entirely unallocated (two virtual CPUs map to one physical
core). A GPU is charged maximum power as soon as any milli of it is
allocated, which safely covers opportunistic use of its idle compute by
sharing tasks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .cluster import GPU_MILLI, ClusterState, NodeState, Placement, TaskSpec, hypothetical_apply
from .errors import ConfigError


@dataclass(frozen=True)
class CpuProfile:
    idle_w: float
    max_w: float
    ncores: int

    def __post_init__(self):
        if not 0 <= self.idle_w <= self.max_w:
            raise ConfigError(f"CPU profile: need 0 <= idle ({self.idle_w}) <= max ({self.max_w})")
        if self.ncores < 1:
            raise ConfigError(f"CPU profile: ncores must be >= 1, got {self.ncores}")


@dataclass(frozen=True)
class GpuProfile:
    idle_w: float
    max_w: float

    def __post_init__(self):
        if not 0 <= self.idle_w <= self.max_w:
            raise ConfigError(f"GPU profile: need 0 <= idle ({self.idle_w}) <= max ({self.max_w})")


@dataclass(frozen=True)
class HardwareProfile:
    cpu_profiles: dict[str, CpuProfile]
    gpu_profiles: dict[str, GpuProfile]

    def cpu(self, model: str) -> CpuProfile:
        try:
            return self.cpu_profiles[model]
        except KeyError:
            raise ConfigError(f"unknown CPU model {model!r}") from None

    def gpu(self, model: str | None) -> GpuProfile:
        try:
            return self.gpu_profiles[model]  # type: ignore[index]
        except KeyError:
            raise ConfigError(f"unknown GPU model {model!r}") from None


@dataclass(frozen=True)
class PowerBreakdown:
    total_w: float
    cpu_w: float
    gpu_w: float


def cpu_power(node: NodeState, profile: HardwareProfile) -> float:
    """Watts drawn by the node's CPU packages at the current allocation."""
    spec = profile.cpu(node.cpu_model)
    width_milli = 2 * spec.ncores * 1000  # virtual CPUs per package, in milli
    busy_packages = -(-node.cpu_alloc_milli // width_milli)
    idle_packages = node.cpu_unalloc_milli // width_milli
    return spec.max_w * busy_packages + spec.idle_w * idle_packages


def gpu_power(node: NodeState, profile: HardwareProfile) -> float:
    """Watts drawn by the node's GPUs; a GPU is active iff any milli is allocated."""
    if node.gpu_count == 0:
        return 0.0
    spec = profile.gpu(node.gpu_model)
    active = sum(1 for r in node.gpu_unalloc_milli if r < GPU_MILLI)
    return spec.max_w * active + spec.idle_w * (node.gpu_count - active)


def node_power(node: NodeState, profile: HardwareProfile) -> float:
    return cpu_power(node, profile) + gpu_power(node, profile)


def datacenter_power(cluster: ClusterState, profile: HardwareProfile) -> PowerBreakdown:
    """Total estimated power with its CPU/GPU split."""
    cpu_w = 0.0
    gpu_w = 0.0
    for n in cluster.nodes:
        cpu_w += cpu_power(n, profile)
        gpu_w += gpu_power(n, profile)
    return PowerBreakdown(cpu_w + gpu_w, cpu_w, gpu_w)


def power_delta(cluster: ClusterState, task: TaskSpec, placement: Placement, profile: HardwareProfile) -> float:
    """Power increase of hypothetically placing the task; never negative."""
    node = cluster.node(placement.node_id)
    hyp = hypothetical_apply(cluster, task, placement)
    return node_power(hyp, profile) - node_power(node, profile)


PROFILE_CSV_HEADER = ["model", "kind", "idle_w", "max_w", "ncores"]


def load_profiles(path: str | Path) -> HardwareProfile:
    """Load a hardware profile CSV with rows of kind ``cpu`` or ``gpu``."""
    path = Path(path)
    cpus: dict[str, CpuProfile] = {}
    gpus: dict[str, GpuProfile] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PROFILE_CSV_HEADER:
            raise ConfigError(f"{path}: expected header {','.join(PROFILE_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                model, kind, idle_w, max_w, ncores = row
                if kind == "cpu":
                    cpus[model] = CpuProfile(float(idle_w), float(max_w), int(ncores))
                elif kind == "gpu":
                    if ncores not in ("", "0"):
                        raise ConfigError("GPU rows must leave ncores empty")
                    gpus[model] = GpuProfile(float(idle_w), float(max_w))
                else:
                    raise ConfigError(f"unknown kind {kind!r}")
            except ConfigError as exc:
                raise ConfigError(f"{path} line {lineno}: {exc}") from exc
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{path} line {lineno}: {exc}") from exc
    return HardwareProfile(cpus, gpus)


def write_profiles(profile: HardwareProfile, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PROFILE_CSV_HEADER)
        for model, spec in profile.cpu_profiles.items():
            writer.writerow([model, "cpu", _fmt_w(spec.idle_w), _fmt_w(spec.max_w), spec.ncores])
        for model, gspec in profile.gpu_profiles.items():
            writer.writerow([model, "gpu", _fmt_w(gspec.idle_w), _fmt_w(gspec.max_w), ""])


def _fmt_w(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))
