import pytest

from gpusched.cluster import GPU_MILLI, ClusterState, GpuDemand, NodeState, TaskSpec
from gpusched.power import CpuProfile, GpuProfile, HardwareProfile

XEON = "Xeon-ES-2682-V4"


@pytest.fixture
def profile() -> HardwareProfile:
    return HardwareProfile(
        cpu_profiles={XEON: CpuProfile(idle_w=15.0, max_w=120.0, ncores=16)},
        gpu_profiles={
            "T4": GpuProfile(idle_w=10.0, max_w=70.0),
            "V100M32": GpuProfile(idle_w=30.0, max_w=300.0),
            "G2": GpuProfile(idle_w=30.0, max_w=150.0),
        },
    )


def make_node(
    node_id="n1",
    gpu_model="T4",
    gpus=(1000, 1000),
    cpu_capacity=96000,
    mem_capacity=393216,
    cpu_alloc=0,
    mem_alloc=0,
) -> NodeState:
    return NodeState(
        id=node_id,
        cpu_model=XEON,
        gpu_model=gpu_model if gpus else None,
        cpu_capacity_milli=cpu_capacity,
        mem_capacity_mib=mem_capacity,
        gpu_unalloc_milli=list(gpus),
        cpu_alloc_milli=cpu_alloc,
        mem_alloc_mib=mem_alloc,
    )


def make_task(task_id="t1", cpu=1000, mem=1024, demand=GpuDemand.none(), gpu_constraint=()) -> TaskSpec:
    return TaskSpec(
        id=task_id,
        cpu_milli=cpu,
        memory_mib=mem,
        gpu_demand=demand,
        gpu_constraint=frozenset(gpu_constraint),
    )


def make_cluster(*nodes, profiles=None) -> ClusterState:
    return ClusterState(list(nodes), profiles)


def random_node(rng, node_id, max_gpus=4) -> NodeState:
    """Randomized node with arbitrary partial allocations."""
    n_gpus = int(rng.integers(0, max_gpus + 1))
    gpus = [int(rng.choice([0, 100, 250, 300, 500, 700, 900, 1000])) for _ in range(n_gpus)]
    cpu_capacity = int(rng.choice([32000, 64000, 96000]))
    mem_capacity = int(rng.choice([131072, 262144]))
    return NodeState(
        id=node_id,
        cpu_model=XEON,
        gpu_model=str(rng.choice(["T4", "V100M32", "G2"])) if n_gpus else None,
        gpu_unalloc_milli=gpus,
        cpu_capacity_milli=cpu_capacity,
        mem_capacity_mib=mem_capacity,
        cpu_alloc_milli=int(rng.integers(0, cpu_capacity + 1)),
        mem_alloc_mib=int(rng.integers(0, mem_capacity + 1)),
    )


def random_task(rng, task_id="t") -> TaskSpec:
    kind = rng.choice(["none", "partial", "full"], p=[0.2, 0.4, 0.4])
    if kind == "none":
        demand = GpuDemand.none()
    elif kind == "partial":
        demand = GpuDemand.partial(int(rng.integers(1, 1000)))
    else:
        demand = GpuDemand.full(int(rng.integers(1, 5)))
    constraint = ()
    if rng.random() < 0.2:
        constraint = (str(rng.choice(["T4", "V100M32", "G2"])),)
    return make_task(
        task_id,
        cpu=int(rng.integers(0, 16000)),
        mem=int(rng.integers(0, 65536)),
        demand=demand,
        gpu_constraint=constraint,
    )
