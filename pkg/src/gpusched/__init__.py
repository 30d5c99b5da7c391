"""Trace-driven simulator for power- and fragmentation-aware online
scheduling in heterogeneous GPU datacenters with GPU sharing."""

from .cluster import (
    GPU_MILLI,
    ClusterState,
    GpuDemand,
    NodeState,
    Placement,
    TaskSpec,
    apply,
    candidate_placements,
    gpu_budget,
    hypothetical_apply,
    is_feasible,
    load_cluster,
    write_cluster,
)
from .engine import RunConfig, RunLedger, run, run_many, schedule_one, simulate
from .errors import ConfigError, GpuSchedError, ResourceOverflowError, TraceFormatError
from .fragmentation import (
    FragEvaluator,
    TargetWorkload,
    TaskClass,
    derive_target_workload,
    frag_datacenter,
    frag_delta,
    frag_node_expected,
    frag_node_for_class,
    load_workload,
    write_workload,
)
from .policies import (
    Decision,
    PolicyConfig,
    bestfit_raw,
    dotprod_raw,
    fgd_raw,
    gpuclustering_raw,
    gpupacking_raw,
    normalize,
    pwr_raw,
    select,
)
from .power import (
    HardwareProfile,
    PowerBreakdown,
    cpu_power,
    datacenter_power,
    gpu_power,
    load_profiles,
    node_power,
    power_delta,
    write_profiles,
)
from .reporting import (
    Curve,
    CurvePoint,
    MetricSample,
    aggregate,
    emit,
    gpu_power_fraction,
    power_savings,
)
from .workload import (
    InflationStream,
    Trace,
    derive_constrained,
    derive_multigpu,
    derive_sharinggpu,
    parse_trace,
    synth_trace,
    write_trace,
)

__version__ = "0.1.0"
