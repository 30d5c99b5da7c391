"""Aggregation over repetitions and experiment file output.

All emitted files are byte-stable for fixed inputs: floats are written
with their shortest round-trip representation, undefined ratios as empty
cells, and manifests as sorted key=value lines.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

from .errors import ConfigError

if TYPE_CHECKING:
    from .engine import RunLedger


@dataclass(frozen=True)
class MetricSample:
    """Cluster-wide metrics at one requested-GPU-ratio checkpoint."""

    ratio: float
    eopc_w: float
    eopc_cpu_w: float
    eopc_gpu_w: float
    grar: float
    frag_milli: int

    def __post_init__(self):
        if abs(self.eopc_w - (self.eopc_cpu_w + self.eopc_gpu_w)) > 1e-6:
            raise ValueError("eopc_w must equal the sum of its CPU and GPU components")
        if not 0.0 <= self.grar <= 1.0:
            raise ValueError(f"grar must be in [0, 1], got {self.grar}")


@dataclass(frozen=True)
class CurvePoint:
    """Mean metrics at one checkpoint, averaged across repetitions."""

    ratio: float
    eopc_w: float
    eopc_cpu_w: float
    eopc_gpu_w: float
    grar: float
    frag_milli: float
    tasks_arrived: float
    tasks_failed: float


@dataclass(frozen=True)
class Curve:
    policy: str
    points: tuple[CurvePoint, ...]

    def ratios(self) -> tuple[float, ...]:
        return tuple(p.ratio for p in self.points)


def aggregate(ledgers: Sequence["RunLedger"]) -> Curve:
    """Arithmetic mean per checkpoint across repetitions of one policy."""
    if not ledgers:
        raise ConfigError("nothing to aggregate")
    policies = {ld.policy for ld in ledgers}
    if len(policies) != 1:
        raise ConfigError(f"cannot aggregate across policies: {sorted(policies)}")
    grid = ledgers[0].ratios()
    for ld in ledgers[1:]:
        if ld.ratios() != grid:
            raise ConfigError(f"checkpoint grids differ between seeds of {ld.policy}")
    n = len(ledgers)
    points = []
    for i, ratio in enumerate(grid):
        cpu = sum(ld.samples[i].eopc_cpu_w for ld in ledgers) / n
        gpu = sum(ld.samples[i].eopc_gpu_w for ld in ledgers) / n
        points.append(
            CurvePoint(
                ratio=ratio,
                eopc_w=cpu + gpu,
                eopc_cpu_w=cpu,
                eopc_gpu_w=gpu,
                grar=sum(ld.samples[i].grar for ld in ledgers) / n,
                frag_milli=sum(ld.samples[i].frag_milli for ld in ledgers) / n,
                tasks_arrived=sum(ld.checkpoint_counts[i][0] for ld in ledgers) / n,
                tasks_failed=sum(ld.checkpoint_counts[i][1] for ld in ledgers) / n,
            )
        )
    return Curve(ledgers[0].policy, tuple(points))


def power_savings(policy_curve: Curve, baseline_curve: Curve) -> list[tuple[float, float | None]]:
    """Per-checkpoint EOPC savings of a policy versus a baseline, in percent.

    Negative savings are reported as negative; a zero baseline yields an
    undefined marker (None) rather than a division error.
    """
    if policy_curve.ratios() != baseline_curve.ratios():
        raise ConfigError("savings require aligned checkpoint grids")
    out: list[tuple[float, float | None]] = []
    for p, b in zip(policy_curve.points, baseline_curve.points):
        if b.eopc_w == 0:
            out.append((p.ratio, None))
        else:
            out.append((p.ratio, 100.0 * (b.eopc_w - p.eopc_w) / b.eopc_w))
    return out


def gpu_power_fraction(curve: Curve) -> list[tuple[float, float | None]]:
    """Per-checkpoint share of the GPU component in the total EOPC."""
    return [
        (p.ratio, p.eopc_gpu_w / p.eopc_w if p.eopc_w != 0 else None)
        for p in curve.points
    ]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


CURVE_CSV_HEADER = [
    "policy",
    "ratio",
    "eopc_w",
    "eopc_cpu_w",
    "eopc_gpu_w",
    "grar",
    "frag_milli",
    "tasks_arrived",
    "tasks_failed",
]


def write_curve(curve: Curve, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_CSV_HEADER)
        for p in curve.points:
            writer.writerow(
                [
                    curve.policy,
                    _fmt(p.ratio),
                    _fmt(p.eopc_w),
                    _fmt(p.eopc_cpu_w),
                    _fmt(p.eopc_gpu_w),
                    _fmt(p.grar),
                    _fmt(p.frag_milli),
                    _fmt(p.tasks_arrived),
                    _fmt(p.tasks_failed),
                ]
            )


def read_curve(path: str | Path) -> Curve:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CURVE_CSV_HEADER:
            raise ConfigError(f"{path}: expected header {','.join(CURVE_CSV_HEADER)}")
        policy = None
        points = []
        for row in reader:
            if not row:
                continue
            policy = row[0]
            points.append(
                CurvePoint(
                    ratio=float(row[1]),
                    eopc_w=float(row[2]),
                    eopc_cpu_w=float(row[3]),
                    eopc_gpu_w=float(row[4]),
                    grar=float(row[5]),
                    frag_milli=float(row[6]),
                    tasks_arrived=float(row[7]),
                    tasks_failed=float(row[8]),
                )
            )
    if policy is None:
        raise ConfigError(f"{path}: empty curve")
    return Curve(policy, tuple(points))


def policy_dirname(policy: str) -> str:
    """Filesystem-friendly name for a policy spec string."""
    return policy.replace(":", "_").replace("+", "_")


def write_savings(
    savings: dict[str, list[tuple[float, float | None]]], baseline: str, path: str | Path
) -> None:
    policies = sorted(savings)
    grids = {tuple(r for r, _ in savings[p]) for p in policies}
    if len(grids) > 1:
        raise ConfigError("savings curves have mismatched grids")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["ratio"] + policies)
        for i, (ratio, _) in enumerate(savings[policies[0]]):
            writer.writerow([_fmt(ratio)] + [_fmt(savings[p][i][1]) for p in policies])


def write_manifest(entries: dict, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for key in sorted(entries):
            fh.write(f"{key}={entries[key]}\n")


def emit(
    out_dir: str | Path,
    ledgers: Iterable["RunLedger"],
    baseline: str | None = None,
    manifest: dict | None = None,
) -> dict[str, Curve]:
    """Write per-seed ledgers, per-policy mean curves, optional savings
    versus a baseline policy, and a manifest. Returns the curves."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_policy: dict[str, list[RunLedger]] = {}
    for ld in ledgers:
        by_policy.setdefault(ld.policy, []).append(ld)
    curves: dict[str, Curve] = {}
    for policy, group in sorted(by_policy.items()):
        pdir = out / policy_dirname(policy)
        pdir.mkdir(parents=True, exist_ok=True)
        for ld in sorted(group, key=lambda l: l.seed):
            ld.write_csv(pdir / f"ledger_seed{ld.seed}.csv")
        curves[policy] = aggregate(group)
        write_curve(curves[policy], pdir / "curve.csv")
    if baseline is not None:
        if baseline not in curves:
            raise ConfigError(f"baseline policy {baseline!r} not among emitted policies")
        savings = {
            p: power_savings(c, curves[baseline]) for p, c in curves.items() if p != baseline
        }
        if savings:
            write_savings(savings, baseline, out / f"savings_vs_{policy_dirname(baseline)}.csv")
    entries = dict(manifest or {})
    for policy, group in sorted(by_policy.items()):
        entries[f"policy.{policy_dirname(policy)}"] = policy
        entries[f"seeds.{policy_dirname(policy)}"] = ",".join(str(ld.seed) for ld in sorted(group, key=lambda l: l.seed))
    if baseline is not None:
        entries["baseline"] = baseline
    write_manifest(entries, out / "manifest.txt")
    return curves
