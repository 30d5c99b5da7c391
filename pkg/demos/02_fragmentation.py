"""
Expected GPU fragmentation
==========================

A node's unallocated GPU milli is fragmented for a task class when the
class cannot use it. Weighting over the class popularities of a target
workload gives the node's expected fragmentation.
"""

from gpusched import GpuDemand, frag_datacenter, frag_node_expected, frag_node_for_class
from gpusched.defaults import BUNDLED, data_path, toy_cluster
from gpusched.fragmentation import TargetWorkload, TaskClass, derive_target_workload
from gpusched.workload import parse_trace

from gpusched.cluster import NodeState

node = NodeState(
    id="demo",
    cpu_model="Xeon-ES-2682-V4",
    gpu_model="T4",
    cpu_capacity_milli=64000,
    mem_capacity_mib=262144,
    gpu_unalloc_milli=[500, 1000],
)

print(f"node with GPU shares {node.gpu_unalloc_milli}:")
for demand, label in [
    (GpuDemand.partial(700), "sharing task wanting 0.7 GPU"),
    (GpuDemand.full(1), "one whole GPU"),
    (GpuDemand.full(2), "two whole GPUs"),
    (GpuDemand.none(), "CPU-only"),
]:
    c = TaskClass(1000, 1024, demand, frozenset(), 1.0)
    print(f"  {label:30s} -> {frag_node_for_class(node, c):5d} milli fragmented")

workload = TargetWorkload(
    tuple(
        TaskClass(1000, 1024, d, frozenset(), 0.25)
        for d in (GpuDemand.partial(700), GpuDemand.full(1), GpuDemand.full(2), GpuDemand.none())
    )
)
print(f"\nexpected fragmentation over the 4-class workload: {frag_node_expected(node, workload):.0f} milli")

# A realistic target workload comes from a trace.
trace = parse_trace(data_path(BUNDLED["trace-default-synth"]))
derived = derive_target_workload(trace.tasks)
print(f"\nworkload derived from the bundled trace: {len(derived.classes)} classes")
cluster = toy_cluster()
print(f"idle toy-cluster fragmentation: {frag_datacenter(cluster, derived):.0f} milli "
      f"(of {cluster.total_gpu_capacity_milli} unallocated)")
