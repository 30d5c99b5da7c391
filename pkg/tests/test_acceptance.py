"""Acceptance suite: every criterion printed as one PASS/FAIL line.

Exact closed-form checks run at 1e-9; scheduler-vs-oracle equivalences run
on randomized small instances; the experiment-level criteria run on the
bundled 1/10-scale mirrored cluster with the bundled Default-shaped
synthetic trace and therefore use the widened desk-scale bands.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from gpusched.cluster import (
    GPU_MILLI,
    GpuDemand,
    apply,
    candidate_placements,
    hypothetical_apply,
    load_cluster,
)
from gpusched.defaults import BUNDLED, DEFAULT_PROFILE, data_path
from gpusched.engine import RunConfig, run, run_many
from gpusched.fragmentation import (
    derive_target_workload,
    frag_delta,
    frag_node_expected,
    frag_node_for_class,
)
from gpusched.policies import PolicyConfig, select
from gpusched.power import (
    cpu_power,
    datacenter_power,
    gpu_power,
    load_profiles,
    node_power,
    power_delta,
)
from gpusched.reporting import aggregate, gpu_power_fraction, power_savings
from gpusched.workload import synth_trace

from conftest import make_cluster, make_node, make_task, random_node, random_task
from test_frag import cls
from test_policies import exhaustive_best


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS")


def mirrored_config(policy, seed, stop_ratio):
    return RunConfig(
        cluster_file=str(data_path(BUNDLED["cluster-mirrored"])),
        profile_file=str(data_path(BUNDLED["profiles-default"])),
        trace_file=str(data_path(BUNDLED["trace-default-synth"])),
        policy=policy,
        seed=seed,
        stop_ratio=stop_ratio,
    )


def toy_config(policy, seed=0, stop_ratio=1.0):
    return RunConfig(
        cluster_file=str(data_path(BUNDLED["cluster-toy"])),
        profile_file=str(data_path(BUNDLED["profiles-default"])),
        trace_file=str(data_path(BUNDLED["trace-default-synth"])),
        policy=policy,
        seed=seed,
        stop_ratio=stop_ratio,
    )


def test_eq1_eq2_exact_values(profile):
    with criterion("eq1-eq2-exact-values"):
        started = time.monotonic()
        tol = 1e-9
        assert abs(cpu_power(make_node(), profile) - 45.0) < tol
        assert abs(cpu_power(make_node(cpu_alloc=1000), profile) - 150.0) < tol
        assert abs(cpu_power(make_node(cpu_alloc=96000), profile) - 360.0) < tol
        assert abs(gpu_power(make_node(gpus=(1000,) * 8), profile) - 80.0) < tol
        three_active = make_node(gpus=(500, 999, 0, 1000, 1000, 1000, 1000, 1000))
        assert abs(gpu_power(three_active, profile) - 260.0) < tol
        assert abs(gpu_power(make_node(gpus=()), profile) - 0.0) < tol
        assert abs(node_power(make_node(gpus=(1000,) * 8), profile) - 125.0) < tol
        loaded = make_node(gpus=(0,) * 8, cpu_alloc=96000)
        assert abs(node_power(loaded, profile) - 920.0) < tol
        assert abs(node_power(make_node(gpus=(), cpu_capacity=32000), profile) - 15.0) < tol
        assert time.monotonic() - started < 1.0


def test_table2_profile_fidelity():
    with criterion("table2-profile-fidelity"):
        profile = load_profiles(data_path(BUNDLED["profiles-default"]))
        expected = {
            "V100M16": (30.0, 300.0),
            "V100M32": (30.0, 300.0),
            "P100": (25.0, 250.0),
            "T4": (10.0, 70.0),
            "A10": (30.0, 150.0),
            "G2": (30.0, 150.0),
            "G3": (50.0, 400.0),
        }
        assert set(profile.gpu_profiles) == set(expected)
        for model, (idle, tdp) in expected.items():
            assert profile.gpu_profiles[model].idle_w == idle
            assert profile.gpu_profiles[model].max_w == tdp
        cpu = profile.cpu_profiles["Xeon-ES-2682-V4"]
        assert (cpu.idle_w, cpu.max_w, cpu.ncores) == (15.0, 120.0, 16)


def test_select_oracle_equivalence(profile):
    with criterion("select-oracle-equivalence-200"):
        started = time.monotonic()
        rng = np.random.default_rng(2024)
        workload = derive_target_workload([random_task(rng, f"w{i}") for i in range(15)])
        checked = 0
        while checked < 200:
            nodes = [random_node(rng, f"n{i:02d}") for i in range(int(rng.integers(2, 11)))]
            cluster = make_cluster(*nodes)
            task = random_task(rng)

            def frag_objective(node, placement):
                hyp = hypothetical_apply(cluster, task, placement)
                return frag_node_expected(hyp, workload) - frag_node_expected(node, workload)

            def power_objective(node, placement):
                hyp = hypothetical_apply(cluster, task, placement)
                return node_power(hyp, profile) - node_power(node, profile)

            expected_fgd = exhaustive_best(cluster, task, frag_objective)
            got_fgd = select(cluster, task, PolicyConfig.parse("fgd"), workload, profile)
            expected_pwr = exhaustive_best(cluster, task, power_objective)
            got_pwr = select(cluster, task, PolicyConfig.parse("pwr"), None, profile)
            if expected_fgd is None:
                assert not got_fgd.scheduled and not got_pwr.scheduled
                continue
            assert got_fgd.placement == expected_fgd[2]
            assert got_pwr.placement == expected_pwr[2]
            checked += 1
        assert time.monotonic() - started < 30.0


def test_combination_endpoints_bit_match(tmp_path):
    with criterion("combination-endpoints-bit-match"):
        pairs = [("pwr:1000+fgd:0", "pwr"), ("pwr:0+fgd:1000", "fgd")]
        for combo, pure in pairs:
            combo_ledger = run(toy_config(combo))
            pure_ledger = run(toy_config(pure))
            combo_path = tmp_path / "combo.csv"
            pure_path = tmp_path / "pure.csv"
            combo_ledger.write_csv(combo_path)
            pure_ledger.write_csv(pure_path)
            assert combo_path.read_bytes() == pure_path.read_bytes()
            assert combo_ledger.outcomes == pure_ledger.outcomes


def test_table1_synthesis_shares():
    with criterion("table1-synthesis-shares"):
        trace = synth_trace(100_000, seed=314159)
        shares = {}
        for t in trace.tasks:
            d = t.gpu_demand
            key = "partial" if d.kind == "partial" else (d.value if d.kind == "full" else 0)
            shares[key] = shares.get(key, 0) + 100.0 / len(trace.tasks)
        expected = {0: 13.3, "partial": 37.8, 1: 48.0, 2: 0.2, 4: 0.2, 8: 0.5}
        for key, pct in expected.items():
            assert abs(shares.get(key, 0.0) - pct) <= 0.5


def test_gpu_power_fraction_band():
    with criterion("gpu-power-fraction-band"):
        started = time.monotonic()
        ledger = run(mirrored_config("fgd", seed=0, stop_ratio=1.0))
        curve = aggregate([ledger])
        for ratio, fraction in gpu_power_fraction(curve):
            if ratio >= 0.1:
                assert fraction is not None and 0.65 <= fraction <= 0.82, (ratio, fraction)
        assert time.monotonic() - started < 300.0


def test_directional_savings():
    with criterion("directional-savings-alpha100-vs-fgd"):
        started = time.monotonic()
        seeds = list(range(10))
        combo = "pwr:100+fgd:900"
        configs = [mirrored_config("fgd", s, 0.55) for s in seeds]
        configs += [mirrored_config(combo, s, 0.55) for s in seeds]
        ledgers = run_many(configs)
        fgd_curve = aggregate([l for l in ledgers if l.policy == "fgd"])
        combo_curve = aggregate([l for l in ledgers if l.policy == combo])
        savings = dict(power_savings(combo_curve, fgd_curve))
        assert savings[0.5] is not None and savings[0.5] >= 5.0, savings[0.5]
        assert time.monotonic() - started < 1200.0


def test_no_failure_region():
    with criterion("no-failure-region-grar"):
        policies = ["pwr", "fgd", "bestfit", "dotprod", "gpupacking", "gpuclustering", "pwr:100+fgd:900"]
        configs = [mirrored_config(p, s, 0.75) for p in policies for s in (0, 1)]
        for ledger in run_many(configs):
            for sample in ledger.samples:
                if sample.ratio <= 0.7 + 1e-9:
                    assert sample.grar == 1.0, (ledger.policy, ledger.seed, sample.ratio, sample.grar)


def test_determinism_byte_identical(tmp_path):
    with criterion("determinism-byte-identical"):
        config = mirrored_config("pwr:100+fgd:900", seed=4, stop_ratio=0.3)
        paths = []
        for tag in ("a", "b"):
            ledger = run(config)
            path = tmp_path / f"{tag}.csv"
            ledger.write_csv(path)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()


def test_invariant_suite_resource_conservation():
    with criterion("invariants-resource-conservation"):
        rng = np.random.default_rng(101)
        applied = 0
        while applied < 1000:
            node = make_node(gpus=(1000,) * int(rng.integers(1, 5)), cpu_capacity=64000, mem_capacity=131072)
            cluster = make_cluster(node)
            for i in range(40):
                task = random_task(rng, f"t{i}")
                placements = candidate_placements(node, task)
                if not placements:
                    continue
                apply(cluster, task, placements[int(rng.integers(len(placements)))])
                applied += 1
                assert 0 <= node.cpu_alloc_milli <= node.cpu_capacity_milli
                assert 0 <= node.mem_alloc_mib <= node.mem_capacity_mib
                assert all(0 <= r <= GPU_MILLI for r in node.gpu_unalloc_milli)
                assert node.cpu_unalloc_milli + node.cpu_alloc_milli == node.cpu_capacity_milli
                assert node.mem_unalloc_mib + node.mem_alloc_mib == node.mem_capacity_mib


def test_invariant_suite_power(profile):
    with criterion("invariants-power-additivity-monotonicity"):
        rng = np.random.default_rng(103)
        for _ in range(1000):
            nodes = [random_node(rng, f"n{i}") for i in range(int(rng.integers(1, 6)))]
            cluster = make_cluster(*nodes)
            breakdown = datacenter_power(cluster, profile)
            assert breakdown.total_w == pytest.approx(
                sum(node_power(n, profile) for n in nodes), abs=1e-6
            )
            assert breakdown.total_w == pytest.approx(breakdown.cpu_w + breakdown.gpu_w, abs=1e-9)
        checked = 0
        while checked < 1000:
            node = random_node(rng, "n1")
            task = random_task(rng)
            placements = candidate_placements(node, task)
            if not placements:
                continue
            placement = placements[int(rng.integers(len(placements)))]
            assert power_delta(make_cluster(node), task, placement, profile) >= 0
            checked += 1


def test_invariant_suite_fragmentation_bounds():
    with criterion("invariants-fragmentation-bounds"):
        rng = np.random.default_rng(107)
        for _ in range(1000):
            node = random_node(rng, "n1")
            t = random_task(rng)
            c = cls(t.gpu_demand, cpu=t.cpu_milli, mem=t.memory_mib, constraint=t.gpu_constraint)
            value = frag_node_for_class(node, c)
            assert 0 <= value <= node.gpu_unalloc_total
        workload = derive_target_workload([random_task(rng, f"w{i}") for i in range(12)])
        for _ in range(1000):
            node = random_node(rng, "n1")
            expected = frag_node_expected(node, workload)
            assert -1e-9 <= expected <= node.gpu_unalloc_total + 1e-9


def test_invariant_suite_frag_delta_oracle():
    with criterion("invariants-frag-delta-oracle"):
        rng = np.random.default_rng(109)
        workload = derive_target_workload([random_task(rng, f"w{i}") for i in range(12)])
        checked = 0
        while checked < 1000:
            node = random_node(rng, "n1")
            task = random_task(rng)
            placements = candidate_placements(node, task)
            if not placements:
                continue
            placement = placements[int(rng.integers(len(placements)))]
            cluster = make_cluster(node)
            before = frag_node_expected(node, workload)
            after = frag_node_expected(hypothetical_apply(cluster, task, placement), workload)
            assert frag_delta(cluster, task, placement, workload) == pytest.approx(after - before, abs=1e-9)
            checked += 1
