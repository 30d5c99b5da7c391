"""
Deriving rescaled traces
========================

Starting from the bundled synthetic trace, derives the three rescaled
variants: more whole-GPU demand, a chosen sharing-task share of GPU
demand, and a constrained fraction of GPU tasks pinned to specific GPU
models.
"""

from gpusched.defaults import BUNDLED, data_path, mirrored_cluster
from gpusched.workload import derive_constrained, derive_multigpu, derive_sharinggpu, parse_trace


def describe(label, trace):
    partial = sum(t.gpu_demand.total_milli for t in trace.tasks if t.gpu_demand.kind == "partial")
    full = sum(t.gpu_demand.total_milli for t in trace.tasks if t.gpu_demand.kind == "full")
    cpuonly = sum(1 for t in trace.tasks if t.gpu_demand.kind == "none")
    constrained = sum(1 for t in trace.tasks if t.gpu_constraint)
    print(
        f"{label:24s} tasks={len(trace.tasks):5d}  full GPU demand={full / 1000:7.1f}  "
        f"sharing share={100 * partial / (partial + full):5.1f}%  "
        f"cpu-only={100 * cpuonly / len(trace.tasks):4.1f}%  constrained={constrained}"
    )


base = parse_trace(data_path(BUNDLED["trace-default-synth"]))
describe("base", base)

describe("multi-GPU +30%", derive_multigpu(base, 30, seed=1))
describe("sharing-GPU 60%", derive_sharinggpu(base, 60, seed=1))
describe("sharing-GPU 100%", derive_sharinggpu(base, 100, seed=1))
constrained = derive_constrained(base, 25, seed=1, cluster=mirrored_cluster())
describe("constrained 25%", constrained)

models = {}
for t in constrained.tasks:
    for m in t.gpu_constraint:
        models[m] = models.get(m, 0) + 1
print("\nconstraint models follow the cluster's GPU mix:")
for model, count in sorted(models.items(), key=lambda kv: -kv[1]):
    print(f"  {model:8s} {count}")
