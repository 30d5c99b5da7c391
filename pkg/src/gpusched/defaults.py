"""Bundled cluster compositions and hardware profiles.

The reference cluster reproduces the production datacenter aggregates:
1213 nodes of which 310 have no GPU, 107,018 virtual CPUs, and 6,212 GPUs
split across seven models. Per-model GPU counts and power figures are
fixed; the per-node grouping (GPUs per node, vCPUs, memory) is chosen so
the aggregates come out exactly, with nodes of the two classified models
at their known shapes (96 vCPU / 393,216 MiB and 128 vCPU / 786,432 MiB).
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .cluster import GPU_MILLI, ClusterState, NodeState, write_cluster
from .power import CpuProfile, GpuProfile, HardwareProfile

CPU_MODEL = "Xeon-ES-2682-V4"

DEFAULT_PROFILE = HardwareProfile(
    cpu_profiles={CPU_MODEL: CpuProfile(idle_w=15.0, max_w=120.0, ncores=16)},
    gpu_profiles={
        "V100M16": GpuProfile(idle_w=30.0, max_w=300.0),
        "V100M32": GpuProfile(idle_w=30.0, max_w=300.0),
        "P100": GpuProfile(idle_w=25.0, max_w=250.0),
        "T4": GpuProfile(idle_w=10.0, max_w=70.0),
        "A10": GpuProfile(idle_w=30.0, max_w=150.0),
        "G2": GpuProfile(idle_w=30.0, max_w=150.0),
        "G3": GpuProfile(idle_w=50.0, max_w=400.0),
    },
)

# (gpu_model, node count, GPUs per node, vCPUs per node, memory MiB per node)
REFERENCE_GROUPS = [
    ("V100M16", 24, 8, 96, 393216),
    ("V100M16", 1, 3, 96, 393216),
    ("V100M32", 25, 8, 96, 393216),
    ("V100M32", 1, 4, 96, 393216),
    ("P100", 33, 8, 96, 393216),
    ("P100", 1, 1, 96, 393216),
    ("T4", 192, 4, 64, 262144),
    ("T4", 37, 2, 64, 262144),
    ("A10", 1, 2, 96, 393216),
    ("G2", 549, 8, 96, 393216),
    ("G3", 39, 8, 128, 786432),
    (None, 105, 0, 64, 262144),
    (None, 204, 0, 96, 393216),
    (None, 1, 0, 106, 434176),  # odd size absorbs the vCPU remainder
]

# Per-model node counts of the reference cluster divided by 10 (rounded
# half-up, at least one node per model), using each model's dominant node
# shape.
MIRRORED_GROUPS = [
    ("V100M16", 3, 8, 96, 393216),
    ("V100M32", 3, 8, 96, 393216),
    ("P100", 3, 8, 96, 393216),
    ("T4", 23, 4, 64, 262144),
    ("A10", 1, 2, 96, 393216),
    ("G2", 55, 8, 96, 393216),
    ("G3", 4, 8, 128, 786432),
    (None, 31, 0, 64, 262144),
]

TOY_GROUPS = [
    ("T4", 2, 4, 64, 262144),
    ("G2", 1, 8, 96, 393216),
    ("V100M32", 1, 8, 96, 393216),
    ("G3", 1, 8, 128, 786432),
    (None, 1, 0, 64, 262144),
]


def _build_nodes(groups) -> list[NodeState]:
    nodes = []
    i = 0
    for model, count, gpus, vcpus, mem in groups:
        for _ in range(count):
            i += 1
            nodes.append(
                NodeState(
                    id=f"n{i:04d}",
                    cpu_model=CPU_MODEL,
                    gpu_model=model,
                    cpu_capacity_milli=vcpus * 1000,
                    mem_capacity_mib=mem,
                    gpu_unalloc_milli=[GPU_MILLI] * gpus,
                )
            )
    return nodes


def reference_cluster() -> ClusterState:
    return ClusterState(_build_nodes(REFERENCE_GROUPS), DEFAULT_PROFILE)


def mirrored_cluster() -> ClusterState:
    return ClusterState(_build_nodes(MIRRORED_GROUPS), DEFAULT_PROFILE)


def toy_cluster() -> ClusterState:
    return ClusterState(_build_nodes(TOY_GROUPS), DEFAULT_PROFILE)


def data_path(name: str) -> Path:
    """Path of a bundled data file (cluster/profile/trace CSVs)."""
    return Path(resources.files("gpusched").joinpath("data", name))  # type: ignore[arg-type]


BUNDLED = {
    "cluster-default": "cluster_default.csv",
    "cluster-mirrored": "cluster_mirrored.csv",
    "cluster-toy": "cluster_toy.csv",
    "profiles-default": "profiles_default.csv",
    "trace-default-synth": "trace_default_synth.csv",
}


def write_bundled_data(out_dir: str | Path) -> None:
    """Regenerate the bundled data files (used to build the package data)."""
    from .power import write_profiles
    from .workload import synth_trace, write_trace

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_cluster(reference_cluster().nodes, out / BUNDLED["cluster-default"])
    write_cluster(mirrored_cluster().nodes, out / BUNDLED["cluster-mirrored"])
    write_cluster(toy_cluster().nodes, out / BUNDLED["cluster-toy"])
    write_profiles(DEFAULT_PROFILE, out / BUNDLED["profiles-default"])
    write_trace(synth_trace(8152, seed=20230402), out / BUNDLED["trace-default-synth"])
