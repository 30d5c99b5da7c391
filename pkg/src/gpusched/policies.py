"""Score policies and node selection.

Every plugin produces a raw cost per candidate placement (lower is more
desirable). Raw costs are min-max normalized to [0, 100] so that several
plugins can be combined linearly with non-negative weights; the node with
the highest combined normalized score wins, ties broken by the
lexicographically smallest node id.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cluster import (
    GPU_MILLI,
    ClusterState,
    NodeState,
    Placement,
    TaskSpec,
    is_feasible,
)
from .errors import ConfigError
from .fragmentation import FragEvaluator, TargetWorkload, frag_delta
from .power import HardwareProfile, power_delta

PLUGIN_NAMES = ("pwr", "fgd", "bestfit", "dotprod", "gpupacking", "gpuclustering")


@dataclass(frozen=True)
class PolicyConfig:
    """Weighted combination of score plugins.

    Weights are non-negative and normalized internally; zero-weight
    components are dropped, so ``pwr:1000+fgd:0`` is exactly the pure
    ``pwr`` policy.
    """

    components: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if not self.components:
            raise ConfigError("policy needs at least one component")
        for name, weight in self.components:
            if name not in PLUGIN_NAMES:
                raise ConfigError(f"unknown policy plugin {name!r}")
            if not (weight >= 0 and weight == weight and weight != float("inf")):
                raise ConfigError(f"weight for {name} must be finite and >= 0, got {weight}")
        if sum(w for _, w in self.components) <= 0:
            raise ConfigError("policy weights sum to zero")

    @classmethod
    def parse(cls, spec: str) -> "PolicyConfig":
        """Parse a policy spec string, e.g. ``fgd`` or ``pwr:100+fgd:900``
        with integer per-mille weights."""
        components: list[tuple[str, float]] = []
        for part in spec.split("+"):
            part = part.strip()
            if ":" in part:
                name, _, weight = part.partition(":")
                try:
                    w = int(weight)
                except ValueError:
                    raise ConfigError(f"policy weight must be an integer per-mille value: {part!r}") from None
                if w < 0:
                    raise ConfigError(f"policy weight must be >= 0: {part!r}")
                components.append((name, float(w)))
            elif part:
                components.append((part, 1000.0))
            else:
                raise ConfigError(f"malformed policy spec {spec!r}")
        return cls(tuple(components))

    @classmethod
    def alpha_combo(cls, alpha_permille: int) -> "PolicyConfig":
        """Power/fragmentation combination with the power weight in per-mille."""
        if not 0 <= alpha_permille <= 1000:
            raise ConfigError(f"alpha must be in [0, 1000] per-mille, got {alpha_permille}")
        return cls((("pwr", float(alpha_permille)), ("fgd", float(1000 - alpha_permille))))

    @property
    def active_components(self) -> tuple[tuple[str, float], ...]:
        return tuple((name, w) for name, w in self.components if w > 0)

    @property
    def canonical(self) -> str:
        active = self.active_components
        if len(active) == 1:
            return active[0][0]
        return "+".join(f"{name}:{int(w) if float(w).is_integer() else w}" for name, w in active)


@dataclass(frozen=True)
class NodeScore:
    """Audit record for one feasible node in a decision."""

    node_id: str
    placement: Placement
    raw: dict[str, float] = field(compare=False)
    normalized: dict[str, float] = field(compare=False)
    combined: float = 0.0


@dataclass(frozen=True)
class Decision:
    placement: Placement | None
    reason: str | None = None
    scores: tuple[NodeScore, ...] = ()

    @property
    def scheduled(self) -> bool:
        return self.placement is not None


def _remaining_fractions(cluster: ClusterState, node: NodeState, task: TaskSpec) -> float:
    score = 0.0
    if cluster.max_cpu_capacity_milli > 0:
        score += (node.cpu_unalloc_milli - task.cpu_milli) / cluster.max_cpu_capacity_milli
    if cluster.max_mem_capacity_mib > 0:
        score += (node.mem_unalloc_mib - task.memory_mib) / cluster.max_mem_capacity_mib
    if cluster.max_gpu_capacity_milli > 0:
        score += (node.gpu_unalloc_total - task.gpu_demand.total_milli) / cluster.max_gpu_capacity_milli
    return score


def pwr_raw(cluster: ClusterState, task: TaskSpec, placement: Placement, profile: HardwareProfile) -> float:
    """Estimated power increase of the placement, in watts."""
    return power_delta(cluster, task, placement, profile)


def fgd_raw(
    cluster: ClusterState,
    task: TaskSpec,
    placement: Placement,
    workload: TargetWorkload,
    *,
    strict_cond3: bool = False,
    cpuonly_frag_zero: bool = False,
) -> float:
    """Expected fragmentation increase of the placement, in milli."""
    return frag_delta(
        cluster, task, placement, workload, strict_cond3=strict_cond3, cpuonly_frag_zero=cpuonly_frag_zero
    )


def bestfit_raw(cluster: ClusterState, task: TaskSpec, placement: Placement) -> float:
    """Post-placement remaining resources of the node, summed over the CPU,
    memory, and GPU-milli dimensions, each normalized by the largest node
    capacity in that dimension."""
    return _remaining_fractions(cluster, cluster.node(placement.node_id), task)


def dotprod_raw(cluster: ClusterState, task: TaskSpec, placement: Placement) -> float:
    """Dot product of the node's pre-placement availability and the task
    demand, both normalized per dimension by the largest node capacity."""
    node = cluster.node(placement.node_id)
    score = 0.0
    if cluster.max_cpu_capacity_milli > 0:
        score += (node.cpu_unalloc_milli / cluster.max_cpu_capacity_milli) * (
            task.cpu_milli / cluster.max_cpu_capacity_milli
        )
    if cluster.max_mem_capacity_mib > 0:
        score += (node.mem_unalloc_mib / cluster.max_mem_capacity_mib) * (
            task.memory_mib / cluster.max_mem_capacity_mib
        )
    if cluster.max_gpu_capacity_milli > 0:
        score += (node.gpu_unalloc_total / cluster.max_gpu_capacity_milli) * (
            task.gpu_demand.total_milli / cluster.max_gpu_capacity_milli
        )
    return score


def _node_entirely_idle(node: NodeState) -> bool:
    return (
        node.cpu_alloc_milli == 0
        and node.mem_alloc_mib == 0
        and all(r == GPU_MILLI for r in node.gpu_unalloc_milli)
    )


def gpupacking_raw(cluster: ClusterState, task: TaskSpec, placement: Placement) -> float:
    """Tier cost: occupied GPUs first, then idle GPUs on active nodes, then
    idle nodes. Ties within a tier broken by the best-fit score."""
    node = cluster.node(placement.node_id)
    if _node_entirely_idle(node):
        tier = 2
    elif any(node.gpu_unalloc_milli[g] == GPU_MILLI for g in placement.gpu_indices):
        tier = 1
    else:
        tier = 0
    return tier + _remaining_fractions(cluster, node, task) / 1000


def gpuclustering_raw(cluster: ClusterState, task: TaskSpec, placement: Placement) -> float:
    """Tier cost favoring nodes already hosting tasks of the same GPU-demand
    class; ties broken by the best-fit score."""
    node = cluster.node(placement.node_id)
    if node.resident_demands.get(task.gpu_demand, 0) > 0:
        tier = 0
    elif sum(node.resident_demands.values()) > 0:
        tier = 1
    else:
        tier = 2
    return tier + _remaining_fractions(cluster, node, task) / 1000


def normalize(scores: dict[str, float]) -> dict[str, float]:
    """Min-max map raw costs to [0, 100], higher meaning more desirable.

    All-equal inputs map to 100 everywhere to avoid a zero division.
    """
    if not scores:
        raise ConfigError("cannot normalize an empty score map")
    values = scores.values()
    vmax = max(values)
    vmin = min(values)
    if vmax == vmin:
        return {k: 100.0 for k in scores}
    return {k: 100.0 * (vmax - v) / (vmax - vmin) for k, v in scores.items()}


def _normalize_list(values: list[float]) -> list[float]:
    vmax = max(values)
    vmin = min(values)
    if vmax == vmin:
        return [100.0] * len(values)
    span = vmax - vmin
    return [100.0 * (vmax - v) / span for v in values]


# Raw scores are quantized before comparison so that mathematically equal
# costs computed along different float paths (popularity weights are not
# binary-exact) tie exactly and fall through to the node-id tie-break.
# Genuine cost differences are at least ~1e-4 (one milli times one trace
# count), far above the quantum.
_RAW_DECIMALS = 6


def _quantize(values: list[float]) -> list[float]:
    return [round(v, _RAW_DECIMALS) for v in values]


def _fast_power_delta(
    node: NodeState,
    task: TaskSpec,
    placement: Placement,
    profile: HardwareProfile,
) -> float:
    """power_delta without cloning the node; exact same arithmetic."""
    spec = profile.cpu(node.cpu_model)
    width = 2 * spec.ncores * 1000
    alloc = node.cpu_alloc_milli
    unalloc = node.cpu_unalloc_milli
    busy_after = -(-(alloc + task.cpu_milli) // width)
    busy_before = -(-alloc // width)
    idle_after = (unalloc - task.cpu_milli) // width
    idle_before = unalloc // width
    delta = spec.max_w * (busy_after - busy_before) + spec.idle_w * (idle_after - idle_before)
    d = task.gpu_demand
    if d.kind != "none":
        gspec = profile.gpu(node.gpu_model)
        step = gspec.max_w - gspec.idle_w
        if d.kind == "full":
            delta += step * d.value
        elif node.gpu_unalloc_milli[placement.gpu_indices[0]] == GPU_MILLI:
            delta += step
    return delta


def _deduped_candidates(node: NodeState, task: TaskSpec, *, strict_cond3: bool) -> list[Placement]:
    """Candidate placements with symmetric GPU choices collapsed.

    GPUs of one node with identical unallocated shares are interchangeable
    for every plugin, so only the lowest-index representative is scored.
    """
    if not is_feasible(node, task, strict_cond3=strict_cond3):
        return []
    d = task.gpu_demand
    if d.kind == "none":
        return [Placement(node.id)]
    if d.kind == "partial":
        seen: dict[int, int] = {}
        for g, r in enumerate(node.gpu_unalloc_milli):
            if r >= d.value and r not in seen:
                seen[r] = g
        return [Placement(node.id, (g,)) for g in sorted(seen.values())]
    free = [g for g, r in enumerate(node.gpu_unalloc_milli) if r == GPU_MILLI]
    return [Placement(node.id, tuple(free[: d.value]))]


def select(
    cluster: ClusterState,
    task: TaskSpec,
    config: PolicyConfig,
    workload: TargetWorkload | None,
    profile: HardwareProfile | None,
    *,
    strict_cond3: bool = False,
    cpuonly_frag_zero: bool = False,
    frag_evaluator: FragEvaluator | None = None,
) -> Decision:
    """Pick the node and placement for a task under the configured policy.

    Infeasible nodes are filtered out first. Each plugin scores every
    candidate placement of every feasible node; the per-node placement is
    the one maximizing the weighted combination of per-plugin normalized
    scores, and the winning node maximizes the combination of the
    across-node normalized scores of those placements.
    """
    components = config.active_components
    weight_sum = sum(w for _, w in components)
    names = [name for name, _ in components]
    if "pwr" in names and profile is None:
        raise ConfigError("pwr policy requires a hardware profile")
    if "fgd" in names:
        if frag_evaluator is None:
            if workload is None:
                raise ConfigError("fgd policy requires a target workload")
            frag_evaluator = FragEvaluator(
                workload, strict_cond3=strict_cond3, cpuonly_frag_zero=cpuonly_frag_zero
            )

    entries: list[tuple[NodeState, list[Placement]]] = []
    for node in cluster.nodes:
        placements = _deduped_candidates(node, task, strict_cond3=strict_cond3)
        if placements:
            entries.append((node, placements))
    if not entries:
        return Decision(None, reason="no feasible node")

    flat: list[tuple[int, Placement]] = []
    offsets: list[tuple[int, int]] = []
    for e_idx, (_, placements) in enumerate(entries):
        start = len(flat)
        flat.extend((e_idx, p) for p in placements)
        offsets.append((start, len(flat)))

    raw: dict[str, list[float]] = {}
    for name in names:
        if name == "pwr":
            raw[name] = [_fast_power_delta(entries[e][0], task, p, profile) for e, p in flat]
        elif name == "fgd":
            base = [frag_evaluator.node_value(node) for node, _ in entries]
            raw[name] = [frag_evaluator.hyp_value(entries[e][0], task, p) - base[e] for e, p in flat]
        elif name == "bestfit":
            per_node = [_remaining_fractions(cluster, node, task) for node, _ in entries]
            raw[name] = [per_node[e] for e, _ in flat]
        elif name == "dotprod":
            per_node = [dotprod_raw(cluster, task, Placement(node.id)) for node, _ in entries]
            raw[name] = [per_node[e] for e, _ in flat]
        elif name == "gpupacking":
            raw[name] = [_packing_tier(entries[e][0], p) + _remaining_fractions(cluster, entries[e][0], task) / 1000 for e, p in flat]
        elif name == "gpuclustering":
            per_node = [
                _clustering_tier(node, task) + _remaining_fractions(cluster, node, task) / 1000
                for node, _ in entries
            ]
            raw[name] = [per_node[e] for e, _ in flat]
        raw[name] = _quantize(raw[name])

    norm_flat = {name: _normalize_list(raw[name]) for name in names}
    combined_flat = [0.0] * len(flat)
    for name, w in components:
        share = w / weight_sum
        norms = norm_flat[name]
        for i in range(len(flat)):
            combined_flat[i] += share * norms[i]

    chosen_idx: list[int] = []
    for start, end in offsets:
        best = start
        for i in range(start + 1, end):
            if combined_flat[i] > combined_flat[best]:
                best = i
        chosen_idx.append(best)

    node_raw = {name: [raw[name][i] for i in chosen_idx] for name in names}
    node_norm = {name: _normalize_list(node_raw[name]) for name in names}
    node_combined = [0.0] * len(entries)
    for name, w in components:
        share = w / weight_sum
        norms = node_norm[name]
        for i in range(len(entries)):
            node_combined[i] += share * norms[i]

    winner = 0
    for i in range(1, len(entries)):
        if node_combined[i] > node_combined[winner] or (
            node_combined[i] == node_combined[winner] and entries[i][0].id < entries[winner][0].id
        ):
            winner = i

    scores = tuple(
        NodeScore(
            node_id=entries[i][0].id,
            placement=flat[chosen_idx[i]][1],
            raw={name: node_raw[name][i] for name in names},
            normalized={name: node_norm[name][i] for name in names},
            combined=node_combined[i],
        )
        for i in range(len(entries))
    )
    return Decision(placement=flat[chosen_idx[winner]][1], scores=scores)


def _packing_tier(node: NodeState, placement: Placement) -> int:
    if _node_entirely_idle(node):
        return 2
    if any(node.gpu_unalloc_milli[g] == GPU_MILLI for g in placement.gpu_indices):
        return 1
    return 0


def _clustering_tier(node: NodeState, task: TaskSpec) -> int:
    if node.resident_demands.get(task.gpu_demand, 0) > 0:
        return 0
    if sum(node.resident_demands.values()) > 0:
        return 1
    return 2
