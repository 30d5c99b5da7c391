"""
Estimating node and datacenter power
====================================

Walks the power model over a few node states: idle packages draw idle
watts, any allocation on a package charges it at full TDP, and a GPU
counts as active as soon as one milli of it is allocated.
"""

from gpusched import GpuDemand, Placement, TaskSpec, apply, datacenter_power, node_power
from gpusched.defaults import DEFAULT_PROFILE, reference_cluster, toy_cluster

profile = DEFAULT_PROFILE
cluster = toy_cluster()

print("toy cluster, everything idle:")
for node in cluster.nodes:
    print(f"  {node.id} ({node.gpu_model or 'cpu-only'}, {node.gpu_count} GPUs): {node_power(node, profile):7.1f} W")
print(f"  total: {datacenter_power(cluster, profile).total_w:.1f} W")

# One virtual CPU activates a whole 32-vCPU package; one milli of GPU
# activates the whole GPU.
node = cluster.nodes[0]
task = TaskSpec(id="demo", cpu_milli=1000, memory_mib=1024, gpu_demand=GpuDemand.partial(1))
before = node_power(node, profile)
apply(cluster, task, Placement(node.id, (0,)))
after = node_power(node, profile)
print(f"\n1 vCPU + 1 GPU-milli on {node.id}: {before:.1f} W -> {after:.1f} W (+{after - before:.1f} W)")

# A second sharing task on the same GPU and package is free.
task2 = TaskSpec(id="demo2", cpu_milli=1000, memory_mib=1024, gpu_demand=GpuDemand.partial(400))
before = node_power(node, profile)
apply(cluster, task2, Placement(node.id, (0,)))
print(f"another sharing task on the same GPU:   +{node_power(node, profile) - before:.1f} W")

# The full 1213-node reference datacenter at idle.
reference = reference_cluster()
breakdown = datacenter_power(reference, profile)
print(f"\nreference datacenter idle: {breakdown.total_w / 1000:.1f} kW "
      f"(CPU {breakdown.cpu_w / 1000:.1f} kW, GPU {breakdown.gpu_w / 1000:.1f} kW)")
