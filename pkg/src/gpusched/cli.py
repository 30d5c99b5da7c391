"""Command-line front end: single experiments, alpha sweeps, trace tools,
and report regeneration.

All randomness flows from explicit seeds; re-running any command with
identical inputs and output directory reproduces the outputs byte for
byte. Runs across seeds and alphas are dispatched concurrently, capped by
the GPUSCHED_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import defaults
from .engine import RunConfig, read_ledger_csv, run_many
from .errors import ConfigError, GpuSchedError
from .policies import PolicyConfig
from .reporting import aggregate, emit, policy_dirname, power_savings, write_curve, write_manifest, write_savings
from .workload import derive_constrained, derive_multigpu, derive_sharinggpu, parse_trace, synth_trace, write_trace

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _resolve(kind: str, value: str) -> str:
    """Resolve bundled-fixture shortcuts (e.g. ``toy``) to packaged files."""
    key = f"{kind}-{value}"
    if key in defaults.BUNDLED:
        return str(defaults.data_path(defaults.BUNDLED[key]))
    if not Path(value).exists():
        raise ConfigError(f"{kind} file not found: {value}")
    return value


def _parse_seeds(text: str) -> list[int]:
    """A comma list of seeds, or a bare count N meaning seeds 0..N-1.

    A single explicit seed is written with a trailing comma (e.g. ``7,``).
    """
    parts = [p for p in text.split(",") if p]
    if not parts:
        raise ConfigError("empty --seeds")
    values = []
    for p in parts:
        try:
            values.append(int(p))
        except ValueError:
            raise ConfigError(f"bad seed {p!r}") from None
    if len(values) == 1 and "," not in text:
        if values[0] < 1:
            raise ConfigError(f"seed count must be >= 1, got {values[0]}")
        return list(range(values[0]))
    return values


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cluster", required=True, help="cluster CSV, or: default | mirrored | toy")
    parser.add_argument("--profiles", required=True, help="hardware profile CSV, or: default")
    parser.add_argument("--trace", required=True, help="trace CSV, or: default-synth")
    parser.add_argument("--seeds", required=True, help="comma list of seeds, or a count N for 0..N-1")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--stop-ratio", type=float, default=1.0)
    parser.add_argument("--checkpoint-step", type=float, default=0.01)
    parser.add_argument("--workload", default=None, help="target-workload CSV (default: derived from the trace)")
    parser.add_argument("--strict-cond3", action="store_true", help="literal fractional feasibility rule")
    parser.add_argument(
        "--cpuonly-frag", choices=["all", "zero"], default="all",
        help="whether CPU-only classes fragment all unallocated GPU milli on hostable nodes",
    )


def _configs_for(args, policy: str, seeds: list[int]) -> list[RunConfig]:
    return [
        RunConfig(
            cluster_file=_resolve("cluster", args.cluster),
            profile_file=_resolve("profiles", args.profiles),
            trace_file=_resolve("trace", args.trace),
            policy=policy,
            seed=seed,
            checkpoint_step=args.checkpoint_step,
            stop_ratio=args.stop_ratio,
            strict_cond3=args.strict_cond3,
            cpuonly_frag_zero=args.cpuonly_frag == "zero",
            workload_file=args.workload,
        )
        for seed in seeds
    ]


def _manifest_base(args, seeds: list[int]) -> dict:
    return {
        "cluster": args.cluster,
        "profiles": args.profiles,
        "trace": args.trace,
        "seeds": ",".join(str(s) for s in seeds),
        "stop_ratio": args.stop_ratio,
        "checkpoint_step": args.checkpoint_step,
        "strict_cond3": args.strict_cond3,
        "cpuonly_frag": args.cpuonly_frag,
    }


def cmd_run(args) -> int:
    seeds = _parse_seeds(args.seeds)
    policies = [PolicyConfig.parse(p).canonical for p in args.policy]
    if len(set(policies)) != len(policies):
        raise ConfigError("duplicate policies after canonicalization")
    configs = []
    for policy in policies:
        configs.extend(_configs_for(args, policy, seeds))
    ledgers = run_many(configs)
    baseline = PolicyConfig.parse(args.baseline).canonical if args.baseline else None
    emit(args.out, ledgers, baseline=baseline, manifest=_manifest_base(args, seeds))
    return EXIT_OK


def cmd_sweep_alpha(args) -> int:
    seeds = _parse_seeds(args.seeds)
    alphas = sorted({int(a) for a in args.alphas.split(",") if a})
    if not alphas:
        raise ConfigError("empty --alphas")
    if 0 not in alphas:
        alphas.insert(0, 0)  # the plain-fragmentation baseline
    out = Path(args.out)
    curves = {}
    for alpha in alphas:
        policy = PolicyConfig.alpha_combo(alpha).canonical
        ledgers = run_many(_configs_for(args, policy, seeds))
        manifest = _manifest_base(args, seeds)
        manifest["alpha_permille"] = alpha
        curves[alpha] = emit(out / f"alpha_{alpha}", ledgers, manifest=manifest)[policy]
    baseline = curves[0]
    savings = {f"alpha_{alpha:04d}": power_savings(curves[alpha], baseline) for alpha in alphas if alpha != 0}
    if savings:
        write_savings(savings, "alpha_0000", out / "savings_by_alpha.csv")
    manifest = _manifest_base(args, seeds)
    manifest["alphas_permille"] = ",".join(str(a) for a in alphas)
    write_manifest(manifest, out / "manifest.txt")
    return EXIT_OK


def cmd_derive_trace(args) -> int:
    trace = parse_trace(_resolve("trace", args.trace))
    if args.kind == "multigpu":
        derived = derive_multigpu(trace, args.pct, args.seed)
    elif args.kind == "sharinggpu":
        derived = derive_sharinggpu(trace, args.pct, args.seed)
    else:
        if not args.cluster:
            raise ConfigError("--cluster is required for constrained derivation")
        from .cluster import load_cluster

        cluster = load_cluster(_resolve("cluster", args.cluster))
        derived = derive_constrained(trace, args.pct, args.seed, cluster)
    write_trace(derived, args.out)
    return EXIT_OK


def cmd_synth_trace(args) -> int:
    write_trace(synth_trace(args.tasks, args.seed), args.out)
    return EXIT_OK


def _warn_on_missing_seeds(root: Path, by_policy: dict) -> None:
    """Warn when ledgers cover fewer seeds than the original manifest."""
    manifest_path = root / "manifest.txt"
    if not manifest_path.exists():
        return
    recorded: dict[str, set[str]] = {}
    for line in manifest_path.read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition("=")
        if key.startswith("seeds."):
            recorded[key.removeprefix("seeds.")] = {s for s in value.split(",") if s}
    for policy, group in by_policy.items():
        expected = recorded.get(policy_dirname(policy))
        if expected is None:
            continue
        found = {str(ledger.seed) for ledger in group}
        missing = expected - found
        if missing:
            print(
                f"gpusched: warning: {policy}: missing ledgers for seeds "
                f"{','.join(sorted(missing))}; aggregating over the available ones",
                file=sys.stderr,
            )


def cmd_report(args) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        raise ConfigError(f"not a directory: {root}")
    out = Path(args.out) if args.out else root
    by_policy = {}
    for ledger_path in sorted(root.glob("*/ledger_seed*.csv")):
        ledger = read_ledger_csv(ledger_path)
        by_policy.setdefault(ledger.policy, []).append(ledger)
    if not by_policy:
        raise ConfigError(f"no ledgers found under {root}")
    _warn_on_missing_seeds(root, by_policy)
    out.mkdir(parents=True, exist_ok=True)
    curves = {}
    for policy, group in sorted(by_policy.items()):
        group.sort(key=lambda l: l.seed)
        curves[policy] = aggregate(group)
        pdir = out / policy_dirname(policy)
        pdir.mkdir(parents=True, exist_ok=True)
        write_curve(curves[policy], pdir / "curve.csv")
    if args.baseline:
        baseline = PolicyConfig.parse(args.baseline).canonical
        if baseline not in curves:
            raise ConfigError(f"baseline {baseline!r} has no ledgers under {root}")
        savings = {p: power_savings(c, curves[baseline]) for p, c in curves.items() if p != baseline}
        if savings:
            write_savings(savings, baseline, out / f"savings_vs_{policy_dirname(baseline)}.csv")
    manifest = {"source_dir": str(root)}
    for policy, group in sorted(by_policy.items()):
        manifest[f"policy.{policy_dirname(policy)}"] = policy
        manifest[f"seeds.{policy_dirname(policy)}"] = ",".join(str(l.seed) for l in group)
    write_manifest(manifest, out / "manifest.txt")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpusched", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one or more policies over seeds and emit curves")
    _add_run_flags(p_run)
    p_run.add_argument("--policy", action="append", required=True, help="policy spec (repeatable), e.g. pwr:100+fgd:900")
    p_run.add_argument("--baseline", default=None, help="policy to compute savings against")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep-alpha", help="sweep power/fragmentation combination weights")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--alphas", required=True, help="comma list of per-mille alpha values, e.g. 0,50,100,200")
    p_sweep.set_defaults(func=cmd_sweep_alpha)

    p_derive = sub.add_parser("derive-trace", help="derive a rescaled trace from a base trace")
    p_derive.add_argument("--trace", required=True)
    p_derive.add_argument("--kind", required=True, choices=["multigpu", "sharinggpu", "constrained"])
    p_derive.add_argument("--pct", type=int, required=True)
    p_derive.add_argument("--seed", type=int, required=True)
    p_derive.add_argument("--cluster", default=None, help="cluster CSV (constrained derivation only)")
    p_derive.add_argument("--out", required=True)
    p_derive.set_defaults(func=cmd_derive_trace)

    p_synth = sub.add_parser("synth-trace", help="generate a synthetic Default-shaped trace")
    p_synth.add_argument("--tasks", type=int, required=True)
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth_trace)

    p_report = sub.add_parser("report", help="re-aggregate existing ledgers without re-simulation")
    p_report.add_argument("--dir", required=True, help="experiment directory containing <policy>/ledger_seed*.csv")
    p_report.add_argument("--out", default=None, help="output directory (default: --dir)")
    p_report.add_argument("--baseline", default=None)
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"gpusched: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GpuSchedError as exc:
        print(f"gpusched: invariant violation: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
