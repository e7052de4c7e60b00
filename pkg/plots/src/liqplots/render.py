"""Two-panel figures from comparison CSVs.

``convergence`` overlays the plain and ggi per-episode total shortfall
and variance series (trailing-window smoothed); ``distribution`` draws
grouped per-agent bars (medians across seeds).  Input columns must match
the documented schemas exactly.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

CONVERGENCE_COLUMNS = ["variant", "seed", "episode", "total_shortfall", "total_variance"]
DISTRIBUTION_COLUMNS = [
    "variant",
    "seed",
    "agent_index",
    "agent",
    "initial_shares",
    "mean_shortfall",
    "mean_variance",
    "per_share_shortfall",
]

KIND_COLUMNS = {"convergence": CONVERGENCE_COLUMNS, "distribution": DISTRIBUTION_COLUMNS}

VARIANT_COLORS = {"plain": "#1f77b4", "ggi": "#d62728"}

FIGSIZE = (11.0, 4.2)
DPI = 120


class SchemaError(ValueError):
    """The CSV does not match the documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    input_csv: str
    kind: str
    output_image: str
    smoothing_window: int = 100

    def __post_init__(self):
        if self.kind not in KIND_COLUMNS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of {sorted(KIND_COLUMNS)}")
        if self.smoothing_window < 1:
            raise SchemaError(f"smoothing window must be >= 1, got {self.smoothing_window}")


def load_rows(path: str, kind: str) -> list[dict]:
    """Read and schema-validate a comparison CSV."""
    expected = KIND_COLUMNS[kind]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {expected}") from None
        missing = [c for c in expected if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column {missing[0]!r}")
        unknown = [c for c in header if c not in expected]
        if unknown:
            raise SchemaError(f"{path}: unknown column {unknown[0]!r}")
        if header != expected:
            raise SchemaError(f"{path}: columns out of order, expected {expected}")
        rows = [dict(zip(header, row)) for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def smooth(values, window: int) -> list[float]:
    """Trailing moving average; a window of 1 returns the series as is."""
    out = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        out.append(acc / min(i + 1, window))
    return out


def _convergence_panels(rows: list[dict], window: int):
    series: dict = {}
    for row in rows:
        key = (row["variant"], row["seed"])
        series.setdefault(key, []).append(
            (int(row["episode"]), float(row["total_shortfall"]), float(row["total_variance"]))
        )
    panels = {"shortfall": {}, "variance": {}}
    for key, triples in series.items():
        triples.sort()
        episodes = [t[0] for t in triples]
        panels["shortfall"][key] = (episodes, smooth([t[1] for t in triples], window))
        panels["variance"][key] = (episodes, smooth([t[2] for t in triples], window))
    return panels


def _render_convergence(rows: list[dict], window: int, output: str) -> None:
    panels = _convergence_panels(rows, window)
    fig, axes = plt.subplots(1, 2, figsize=FIGSIZE, dpi=DPI)
    titles = {"shortfall": "Implementation Shortfall", "variance": "Variance"}
    for ax, (name, lines) in zip(axes, panels.items()):
        seen = set()
        for (variant, seed), (episodes, values) in sorted(lines.items()):
            label = variant if variant not in seen else None
            seen.add(variant)
            ax.plot(
                episodes,
                values,
                color=VARIANT_COLORS.get(variant, "gray"),
                alpha=0.8,
                linewidth=1.2,
                label=label,
            )
        ax.set_title(titles[name])
        ax.set_xlabel("episode")
        ax.set_ylabel(f"total {name}")
        ax.legend()
    fig.tight_layout()
    fig.savefig(output)
    plt.close(fig)


def _median(values):
    values = sorted(values)
    n = len(values)
    mid = n // 2
    return values[mid] if n % 2 else (values[mid - 1] + values[mid]) / 2.0


def _render_distribution(rows: list[dict], output: str) -> None:
    agents: list[str] = []
    per_variant: dict = {}
    for row in rows:
        agent = row["agent"]
        if agent not in agents:
            agents.append(agent)
        bucket = per_variant.setdefault(row["variant"], {})
        bucket.setdefault(agent, {"shortfall": [], "variance": []})
        bucket[agent]["shortfall"].append(float(row["mean_shortfall"]))
        bucket[agent]["variance"].append(float(row["mean_variance"]))

    variants = sorted(per_variant)
    fig, axes = plt.subplots(1, 2, figsize=FIGSIZE, dpi=DPI)
    x = range(len(agents))
    width = 0.8 / max(len(variants), 1)
    for ax, metric, title in (
        (axes[0], "shortfall", "Implementation Shortfall"),
        (axes[1], "variance", "Variance"),
    ):
        for k, variant in enumerate(variants):
            heights = [
                _median(per_variant[variant].get(agent, {metric: [0.0]})[metric])
                for agent in agents
            ]
            offsets = [i + (k - (len(variants) - 1) / 2.0) * width for i in x]
            ax.bar(
                offsets,
                heights,
                width=width,
                color=VARIANT_COLORS.get(variant, "gray"),
                label=variant,
            )
        ax.set_title(title)
        ax.set_xticks(list(x))
        ax.set_xticklabels(agents, rotation=30, ha="right")
        ax.set_ylabel(f"median {metric} (trailing window)")
        ax.legend()
    fig.tight_layout()
    fig.savefig(output)
    plt.close(fig)


def render(spec: FigureSpec) -> str:
    """Validate the CSV and write the figure; returns the output path."""
    rows = load_rows(spec.input_csv, spec.kind)
    out = Path(spec.output_image)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    if spec.kind == "convergence":
        _render_convergence(rows, spec.smoothing_window, str(out))
    else:
        _render_distribution(rows, str(out))
    return str(out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render", description="Render comparison figures from CSV logs."
    )
    parser.add_argument("--kind", required=True, choices=sorted(KIND_COLUMNS))
    parser.add_argument("--in", dest="input_csv", required=True, help="input CSV path")
    parser.add_argument("--out", dest="output_image", required=True, help="output image path")
    parser.add_argument("--window", type=int, default=100, help="smoothing window (episodes)")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(
            input_csv=args.input_csv,
            kind=args.kind,
            output_image=args.output_image,
            smoothing_window=args.window,
        )
        render(spec)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
