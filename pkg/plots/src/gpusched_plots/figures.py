"""Figure rendering for experiment curve and savings CSVs.

Reads only the documented CSV schemas (curve files keyed by policy and
ratio; savings files with one column per policy), never the simulator's
internals, so the two components evolve independently. Output images are
deterministic for fixed inputs: fixed size, default fonts, Agg backend.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

FIGSIZE = (8.0, 4.5)
DPI = 120

KINDS = ("stacked-eopc", "savings", "grar")


class FigureError(Exception):
    """Bad figure spec or malformed/incomplete input CSV."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[Path, ...]
    output: Path
    zoom: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not self.inputs:
            raise FigureError("at least one input CSV is required")
        if self.kind in ("stacked-eopc", "savings") and len(self.inputs) != 1:
            raise FigureError(f"{self.kind} takes exactly one input CSV")
        if self.zoom is not None and not self.zoom[0] < self.zoom[1]:
            raise FigureError(f"zoom range must satisfy a < b, got {self.zoom}")


@dataclass
class PlotResult:
    """What was drawn, for callers that want to verify the figure."""

    output: Path
    series: dict[str, list[float]] = field(default_factory=dict)
    xlim: tuple[float, float] = (0.0, 1.0)


def _read_rows(path: Path) -> tuple[list[str], list[dict[str, str]]]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FigureError(f"{path}: empty file")
        rows = [dict(zip(header, row)) for row in reader if row]
    return header, rows


def _require(path: Path, header: list[str], columns: tuple[str, ...]) -> None:
    missing = [c for c in columns if c not in header]
    if missing:
        raise FigureError(f"{path}: missing columns {', '.join(missing)}")


def _floats(rows: list[dict[str, str]], column: str) -> list[float]:
    return [float(r[column]) if r[column] != "" else float("nan") for r in rows]


def _finish(fig, ax, spec: FigureSpec, result: PlotResult) -> PlotResult:
    if spec.zoom is not None:
        ax.set_xlim(*spec.zoom)
    result.xlim = ax.get_xlim()
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output, dpi=DPI)
    plt.close(fig)
    return result


def _plot_stacked_eopc(spec: FigureSpec) -> PlotResult:
    path = spec.inputs[0]
    header, rows = _read_rows(path)
    _require(path, header, ("policy", "ratio", "eopc_w", "eopc_cpu_w", "eopc_gpu_w"))
    policy = rows[0]["policy"] if rows else ""
    ratios = _floats(rows, "ratio")
    cpu = _floats(rows, "eopc_cpu_w")
    gpu = _floats(rows, "eopc_gpu_w")
    total = _floats(rows, "eopc_w")
    fraction = [g / t if t else float("nan") for g, t in zip(gpu, total)]

    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.stackplot(ratios, cpu, gpu, labels=["CPU", "GPU"], colors=["#d9a354", "#5a87c5"], alpha=0.85)
    ax.plot(ratios, total, color="#20304d", linewidth=1.0)
    ax.set_xlabel("requested GPU ratio")
    ax.set_ylabel(f"estimated power (W), {policy}")
    ax.legend(loc="upper left")
    right = ax.twinx()
    right.plot(ratios, fraction, linestyle="--", color="#444444", label="GPU fraction")
    right.set_ylabel("GPU fraction of total power")
    right.set_ylim(0.0, 1.0)
    result = PlotResult(spec.output, series={"cpu": cpu, "gpu": gpu, "total": total, "gpu_fraction": fraction})
    return _finish(fig, ax, spec, result)


def _plot_savings(spec: FigureSpec) -> PlotResult:
    path = spec.inputs[0]
    header, rows = _read_rows(path)
    _require(path, header, ("ratio",))
    policies = [c for c in header if c != "ratio"]
    if not policies:
        raise FigureError(f"{path}: no policy columns")
    ratios = _floats(rows, "ratio")

    fig, ax = plt.subplots(figsize=FIGSIZE)
    result = PlotResult(spec.output)
    for policy in policies:
        values = _floats(rows, policy)
        ax.plot(ratios, values, label=policy, linewidth=1.4)
        result.series[policy] = values
    ax.axhline(0.0, color="#888888", linewidth=0.8)
    ax.set_xlabel("requested GPU ratio")
    ax.set_ylabel("power savings vs baseline (%)")
    ax.legend()
    return _finish(fig, ax, spec, result)


def _plot_grar(spec: FigureSpec) -> PlotResult:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    result = PlotResult(spec.output)
    for path in spec.inputs:
        header, rows = _read_rows(path)
        _require(path, header, ("policy", "ratio", "grar"))
        policy = rows[0]["policy"] if rows else path.stem
        ax.plot(_floats(rows, "ratio"), _floats(rows, "grar"), label=policy, linewidth=1.4)
        result.series[policy] = _floats(rows, "grar")
    ax.set_xlabel("requested GPU ratio")
    ax.set_ylabel("GPU resource allocation ratio")
    ax.legend()
    return _finish(fig, ax, spec, result)


def plot(spec: FigureSpec) -> PlotResult:
    """Render one figure to the spec's output path and report what was drawn."""
    if spec.kind == "stacked-eopc":
        return _plot_stacked_eopc(spec)
    if spec.kind == "savings":
        return _plot_savings(spec)
    return _plot_grar(spec)
