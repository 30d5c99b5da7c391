import numpy as np
import pytest

from gpusched.cluster import (
    GpuDemand,
    Placement,
    apply,
    candidate_placements,
    hypothetical_apply,
)
from gpusched.errors import ConfigError
from gpusched.fragmentation import TargetWorkload, TaskClass, derive_target_workload, frag_node_expected
from gpusched.policies import (
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
from gpusched.power import node_power

from conftest import make_cluster, make_node, make_task, random_node, random_task


def small_workload():
    return TargetWorkload(
        (
            TaskClass(2000, 4096, GpuDemand.partial(500), frozenset(), 0.4),
            TaskClass(8000, 16384, GpuDemand.full(1), frozenset(), 0.5),
            TaskClass(4000, 8192, GpuDemand.none(), frozenset(), 0.1),
        )
    )


def exhaustive_best(cluster, task, objective):
    """Oracle: enumerate all feasible (node, placement) pairs, pick the one
    minimizing the objective on the post-placement state; ties broken by
    node id, then candidate order. Objectives are compared at the same
    1e-6 quantum the policy layer uses."""
    best = None
    for node in sorted(cluster.nodes, key=lambda n: n.id):
        for placement in candidate_placements(node, task):
            value = round(objective(node, placement), 6)
            if best is None or value < best[0]:
                best = (value, node.id, placement)
    return best


class TestPolicyConfig:
    def test_parse_single(self):
        assert PolicyConfig.parse("pwr").canonical == "pwr"

    def test_parse_combo_weights(self):
        config = PolicyConfig.parse("pwr:100+fgd:900")
        assert config.components == (("pwr", 100.0), ("fgd", 900.0))
        assert config.canonical == "pwr:100+fgd:900"

    def test_zero_weight_components_canonicalize_away(self):
        assert PolicyConfig.parse("pwr:1000+fgd:0").canonical == "pwr"
        assert PolicyConfig.parse("pwr:0+fgd:1000").canonical == "fgd"

    def test_alpha_combo(self):
        assert PolicyConfig.alpha_combo(100).components == (("pwr", 100.0), ("fgd", 900.0))

    def test_bad_specs(self):
        for bad in ["", "nosuch", "pwr:abc", "pwr:-5", "pwr:0+fgd:0"]:
            with pytest.raises(ConfigError):
                PolicyConfig.parse(bad)


class TestNormalize:
    def test_two_values(self):
        assert normalize({"A": 10.0, "B": 30.0}) == {"A": 100.0, "B": 0.0}

    def test_degenerate_all_equal(self):
        assert normalize({"A": 5.0, "B": 5.0, "C": 5.0}) == {"A": 100.0, "B": 100.0, "C": 100.0}

    def test_affine(self):
        assert normalize({"A": 0.0, "B": 50.0, "C": 100.0}) == {"A": 100.0, "B": 50.0, "C": 0.0}

    def test_empty_is_error(self):
        with pytest.raises(ConfigError):
            normalize({})


class TestBestFit:
    def test_perfect_fit_scores_zero(self):
        node = make_node(gpus=(500,), cpu_capacity=4000, mem_capacity=4096)
        cluster = make_cluster(node)
        task = make_task(cpu=4000, mem=4096, demand=GpuDemand.partial(500))
        assert bestfit_raw(cluster, task, Placement("n1", (0,))) == pytest.approx(0.0)

    def test_dominance_ordering(self):
        tight = make_node("a", gpus=(500,), cpu_capacity=8000, mem_capacity=8192)
        loose = make_node("b", gpus=(1000, 1000), cpu_capacity=96000, mem_capacity=393216)
        cluster = make_cluster(tight, loose)
        task = make_task(cpu=2000, mem=2048, demand=GpuDemand.partial(300))
        assert bestfit_raw(cluster, task, Placement("a", (0,))) < bestfit_raw(cluster, task, Placement("b", (0,)))

    def test_scale_invariance_of_argmin(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            caps = [int(rng.integers(2, 32)) * 1000 for _ in range(4)]
            allocs = [int(rng.integers(0, c // 1000)) * 1000 for c in caps]
            task = make_task(cpu=1000, mem=0)
            nodes = [
                make_node(f"n{i}", gpus=(), cpu_capacity=c, mem_capacity=1, cpu_alloc=a)
                for i, (c, a) in enumerate(zip(caps, allocs))
            ]
            doubled = [
                make_node(f"n{i}", gpus=(), cpu_capacity=2 * c, mem_capacity=2, cpu_alloc=2 * a)
                for i, (c, a) in enumerate(zip(caps, allocs))
            ]
            def argmin(cluster):
                feasible = [n for n in cluster.nodes if n.cpu_unalloc_milli >= task.cpu_milli]
                if not feasible:
                    return None
                return min(feasible, key=lambda n: (bestfit_raw(cluster, task, Placement(n.id)), n.id)).id
            task2 = make_task(cpu=2000, mem=0)
            base = argmin(make_cluster(*nodes))
            cluster2 = make_cluster(*doubled)
            feasible2 = [n for n in cluster2.nodes if n.cpu_unalloc_milli >= task2.cpu_milli]
            scaled = min(
                feasible2, key=lambda n: (bestfit_raw(cluster2, task2, Placement(n.id)), n.id)
            ).id if feasible2 else None
            assert base == scaled


class TestDotProd:
    def test_zero_demand_scores_zero_everywhere(self):
        cluster = make_cluster(make_node("a"), make_node("b", gpus=(500,)))
        task = make_task(cpu=0, mem=0)
        assert dotprod_raw(cluster, task, Placement("a")) == 0.0
        assert dotprod_raw(cluster, task, Placement("b")) == 0.0

    def test_gpu_only_task_ignores_free_cpu(self):
        busy = make_node("a", gpus=(1000,), cpu_alloc=90000)
        idle = make_node("b", gpus=(1000,))
        cluster = make_cluster(busy, idle)
        task = make_task(cpu=0, mem=0, demand=GpuDemand.partial(500))
        assert dotprod_raw(cluster, task, Placement("a", (0,))) == dotprod_raw(
            cluster, task, Placement("b", (0,))
        )

    def test_two_node_argmin_matches_hand_computation(self):
        a = make_node("a", gpus=(1000,), cpu_capacity=96000, mem_capacity=393216, cpu_alloc=48000)
        b = make_node("b", gpus=(500, 500), cpu_capacity=96000, mem_capacity=393216)
        cluster = make_cluster(a, b)
        task = make_task(cpu=9600, mem=0, demand=GpuDemand.partial(200))
        # availability (cpu, gpu) normalized by maxima (96000, 2000):
        # a: 0.5 * 0.1 + (1000/2000) * (200/2000) = 0.05 + 0.05 = 0.1
        # b: 1.0 * 0.1 + (1000/2000) * (200/2000) = 0.15
        assert dotprod_raw(cluster, task, Placement("a", (0,))) == pytest.approx(0.1)
        assert dotprod_raw(cluster, task, Placement("b", (0,))) == pytest.approx(0.15)


class TestTieredHeuristics:
    def test_gpupacking_tiers(self):
        active_gpu = make_node("a", gpus=(500, 1000), cpu_alloc=1000)
        idle = make_node("b", gpus=(1000,))
        cluster = make_cluster(active_gpu, idle)
        partial = make_task(cpu=0, mem=0, demand=GpuDemand.partial(300))
        assert gpupacking_raw(cluster, partial, Placement("a", (0,))) < 1
        assert 1 <= gpupacking_raw(cluster, make_task(cpu=0, mem=0, demand=GpuDemand.full(1)), Placement("a", (1,))) < 2
        assert gpupacking_raw(cluster, partial, Placement("b", (0,))) >= 2

    def test_gpuclustering_tiers(self):
        same = make_node("a", gpus=(1000, 1000))
        apply(make_cluster(same), make_task("resident", cpu=0, mem=0, demand=GpuDemand.partial(500)), Placement("a", (0,)))
        other = make_node("b", gpus=(1000, 1000))
        apply(make_cluster(other), make_task("resident", cpu=0, mem=0, demand=GpuDemand.full(1)), Placement("b", (0,)))
        empty = make_node("c", gpus=(1000,))
        cluster = make_cluster(same, other, empty)
        incoming = make_task(cpu=0, mem=0, demand=GpuDemand.partial(500))
        assert gpuclustering_raw(cluster, incoming, Placement("a", (1,))) < 1
        assert 1 <= gpuclustering_raw(cluster, incoming, Placement("b", (1,))) < 2
        assert gpuclustering_raw(cluster, incoming, Placement("c", (0,))) >= 2


class TestSelect:
    def test_pwr_picks_cheaper_activation(self, profile):
        # T4-over-V100 case: activating an idle T4 on a warm node costs
        # 60 W, activating an idle V100 plus a fresh package costs 375 W.
        t4 = make_node("a", gpu_model="T4", gpus=(1000, 1000), cpu_alloc=1000)
        v100 = make_node("b", gpu_model="V100M32", gpus=(1000,) * 8)
        cluster = make_cluster(t4, v100)
        task = make_task(cpu=1000, demand=GpuDemand.partial(500))
        decision = select(cluster, task, PolicyConfig.parse("pwr"), None, profile)
        assert decision.scheduled and decision.placement.node_id == "a"
        raws = {s.node_id: s.raw["pwr"] for s in decision.scores}
        assert raws["a"] == pytest.approx(60.0)
        assert raws["b"] == pytest.approx(375.0)

    def test_no_feasible_node(self, profile):
        cluster = make_cluster(make_node(gpus=()))
        task = make_task(demand=GpuDemand.full(1))
        decision = select(cluster, task, PolicyConfig.parse("pwr"), None, profile)
        assert not decision.scheduled
        assert decision.reason == "no feasible node"

    def test_alpha_endpoints_match_pure_policies(self, profile):
        rng = np.random.default_rng(37)
        workload = small_workload()
        for _ in range(60):
            nodes = [random_node(rng, f"n{i}") for i in range(5)]
            cluster = make_cluster(*nodes)
            task = random_task(rng)
            pure_pwr = select(cluster, task, PolicyConfig.parse("pwr"), workload, profile)
            combo_pwr = select(cluster, task, PolicyConfig.parse("pwr:1000+fgd:0"), workload, profile)
            assert pure_pwr.placement == combo_pwr.placement
            pure_fgd = select(cluster, task, PolicyConfig.parse("fgd"), workload, profile)
            combo_fgd = select(cluster, task, PolicyConfig.parse("pwr:0+fgd:1000"), workload, profile)
            assert pure_fgd.placement == combo_fgd.placement

    def test_determinism(self, profile):
        rng = np.random.default_rng(41)
        workload = small_workload()
        nodes = [random_node(rng, f"n{i}") for i in range(8)]
        cluster = make_cluster(*nodes)
        task = make_task(cpu=1000, demand=GpuDemand.partial(300))
        config = PolicyConfig.parse("pwr:300+fgd:700")
        first = select(cluster, task, config, workload, profile)
        for _ in range(5):
            again = select(cluster, task, config, workload, profile)
            assert again.placement == first.placement
            assert [s.combined for s in again.scores] == [s.combined for s in first.scores]

    def test_single_plugin_argmin_preservation(self, profile):
        rng = np.random.default_rng(43)
        workload = small_workload()
        for _ in range(50):
            nodes = [random_node(rng, f"n{i}") for i in range(6)]
            cluster = make_cluster(*nodes)
            task = random_task(rng)
            for name in ["bestfit", "dotprod", "gpupacking", "gpuclustering"]:
                decision = select(cluster, task, PolicyConfig.parse(name), workload, profile)
                if not decision.scheduled:
                    continue
                best = min(decision.scores, key=lambda s: (s.raw[name], s.node_id))
                assert decision.placement.node_id == best.node_id


class TestOracleEquivalence:
    def test_fgd_matches_exhaustive_fragmentation_minimization(self, profile):
        rng = np.random.default_rng(47)
        workload = small_workload()
        for _ in range(100):
            nodes = [random_node(rng, f"n{i:02d}") for i in range(int(rng.integers(2, 10)))]
            cluster = make_cluster(*nodes)
            task = random_task(rng)

            def objective(node, placement):
                hyp = hypothetical_apply(cluster, task, placement)
                return frag_node_expected(hyp, workload) - frag_node_expected(node, workload)

            expected = exhaustive_best(cluster, task, objective)
            decision = select(cluster, task, PolicyConfig.parse("fgd"), workload, profile)
            if expected is None:
                assert not decision.scheduled
            else:
                assert decision.placement.node_id == expected[1]
                assert decision.placement == expected[2]

    def test_pwr_matches_exhaustive_power_minimization(self, profile):
        rng = np.random.default_rng(53)
        for _ in range(100):
            nodes = [random_node(rng, f"n{i:02d}") for i in range(int(rng.integers(2, 10)))]
            cluster = make_cluster(*nodes)
            task = random_task(rng)

            def objective(node, placement):
                hyp = hypothetical_apply(cluster, task, placement)
                return node_power(hyp, profile) - node_power(node, profile)

            expected = exhaustive_best(cluster, task, objective)
            decision = select(cluster, task, PolicyConfig.parse("pwr"), None, profile)
            if expected is None:
                assert not decision.scheduled
            else:
                assert decision.placement.node_id == expected[1]
                assert decision.placement == expected[2]


class TestRawWrappers:
    def test_pwr_raw_equals_power_delta_examples(self, profile):
        node = make_node(gpus=(500, 1000), cpu_alloc=1000)
        cluster = make_cluster(node)
        task = make_task(cpu=1000, demand=GpuDemand.partial(500))
        assert pwr_raw(cluster, task, Placement("n1", (0,)), profile) == pytest.approx(0.0)
        assert pwr_raw(cluster, task, Placement("n1", (1,)), profile) == pytest.approx(60.0)

    def test_fgd_raw_equals_frag_delta_example(self):
        node = make_node(gpus=(1000,))
        cluster = make_cluster(node)
        workload = TargetWorkload((TaskClass(0, 0, GpuDemand.partial(999), frozenset(), 1.0),))
        task = make_task(cpu=0, mem=0, demand=GpuDemand.partial(999))
        assert fgd_raw(cluster, task, Placement("n1", (0,)), workload) == pytest.approx(1.0)
