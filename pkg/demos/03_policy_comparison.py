"""
Comparing scheduling policies on one decision
=============================================

Gives the same task to each policy on the same toy-cluster snapshot and
shows which node each one picks and why (raw scores per feasible node).
"""

from gpusched import GpuDemand, Placement, TaskSpec, apply, select
from gpusched.defaults import BUNDLED, DEFAULT_PROFILE, data_path, toy_cluster
from gpusched.fragmentation import derive_target_workload
from gpusched.policies import PolicyConfig
from gpusched.workload import parse_trace

cluster = toy_cluster()
workload = derive_target_workload(parse_trace(data_path(BUNDLED["trace-default-synth"])).tasks)

# Warm the cluster up a little so the policies have texture to react to:
# one sharing task on a T4 and a full GPU on the V100 node.
apply(cluster, TaskSpec("warm1", 2000, 4096, GpuDemand.partial(300)), Placement("n0001", (0,)))
apply(cluster, TaskSpec("warm2", 8000, 16384, GpuDemand.full(1)), Placement("n0004", (0,)))

task = TaskSpec("incoming", 4000, 8192, GpuDemand.partial(500))
print(f"incoming task: {task.cpu_milli} milli-vCPU, {task.gpu_demand.value} GPU-milli\n")

for spec in ["pwr", "fgd", "bestfit", "dotprod", "gpupacking", "gpuclustering", "pwr:100+fgd:900"]:
    config = PolicyConfig.parse(spec)
    decision = select(cluster, task, config, workload, DEFAULT_PROFILE)
    chosen = decision.placement
    print(f"{spec:18s} -> {chosen.node_id} GPU {chosen.gpu_indices}")
    for score in decision.scores:
        raws = ", ".join(f"{k}={v:.4g}" for k, v in score.raw.items())
        marker = "*" if score.node_id == chosen.node_id else " "
        print(f"   {marker} {score.node_id}: combined={score.combined:6.2f}  {raws}")
    print()
