"""Command-line entry point.

Subcommands: ``emit-scenario`` writes a scenario file, ``train`` runs one
variant on one seed, ``baseline`` evaluates the analytical reference,
``compare`` trains both variants across seeds and emits the figure CSVs,
``evaluate`` replays a trained run greedily.  Every run directory gets a
manifest holding the exact configuration, so identical invocations
produce byte-identical outputs.

Exit codes: 0 success, 2 input error, 3 numeric failure during training.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, rl_core
from .experiment import (
    ComparisonReport,
    Scenario,
    ScenarioError,
    analytical_baseline,
    convergence_series,
    desk_scenario,
    paper_scenario,
    run_comparison,
    summarize_log,
)
from .maddpg import AgentRuntime, TrainingDivergenceError, evaluation_rollout, train

MANIFEST_SCHEMA_VERSION = 1

FIG1_COLUMNS = ["variant", "seed", "episode", "total_shortfall", "total_variance"]
FIG2_COLUMNS = [
    "variant",
    "seed",
    "agent_index",
    "agent",
    "initial_shares",
    "mean_shortfall",
    "mean_variance",
    "per_share_shortfall",
]
BASELINE_COLUMNS = [
    "agent_index",
    "agent",
    "initial_shares",
    "expected_shortfall",
    "variance",
    "realized_shortfall",
    "per_share_shortfall",
]
EVAL_COLUMNS = [
    "episode",
    "agent",
    "realized_shortfall",
    "expected_shortfall",
    "variance",
]

BUILTIN_SCENARIOS = {"paper": paper_scenario, "desk": desk_scenario}


def _parse_override_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(data: dict, overrides: list) -> dict:
    """Apply dotted key=value pairs to a scenario dictionary; unknown
    paths are rejected."""
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override {item!r} is not of the form key=value")
        dotted, raw = item.split("=", 1)
        keys = dotted.split(".")
        node = data
        for key in keys[:-1]:
            if isinstance(node, list):
                try:
                    node = node[int(key)]
                    continue
                except (ValueError, IndexError):
                    raise ScenarioError(f"unknown override path {dotted!r}") from None
            if not isinstance(node, dict) or key not in node:
                raise ScenarioError(f"unknown override path {dotted!r}")
            node = node[key]
        leaf = keys[-1]
        if isinstance(node, list):
            try:
                node[int(leaf)] = _parse_override_value(raw)
                continue
            except (ValueError, IndexError):
                raise ScenarioError(f"unknown override path {dotted!r}") from None
        if not isinstance(node, dict) or leaf not in node:
            raise ScenarioError(f"unknown override key {dotted!r}")
        node[leaf] = _parse_override_value(raw)
    return data


def load_scenario(path: str, overrides: list) -> Scenario:
    data = Scenario.load(path).to_dict()
    apply_overrides(data, overrides)
    return Scenario.from_dict(data)


def _write_manifest(out_dir: Path, command: str, scenario: Scenario | None, extra: dict) -> None:
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "package_version": __version__,
        "command": command,
        "scenario": scenario.to_dict() if scenario is not None else None,
    }
    manifest.update(extra)
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, columns: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_emit_scenario(args) -> int:
    scenario = BUILTIN_SCENARIOS[args.name]()
    data = apply_overrides(scenario.to_dict(), args.set or [])
    scenario = Scenario.from_dict(data)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    scenario.save(out)
    print(f"wrote scenario {scenario.name!r} to {out}")
    return 0


def cmd_train(args) -> int:
    scenario = load_scenario(args.scenario, args.set or [])
    fairness_on = args.fairness == "on"
    config = replace(scenario.train, fairness_enabled=fairness_on, seed=args.seed)
    out = _out_dir(args)
    log, agents = train(scenario.market, scenario.agents, config)
    log.to_jsonl(out / "log.jsonl")
    nets = {}
    for agent in agents:
        for name, net in agent.networks().items():
            nets[f"{agent.spec.label}/{name}"] = net
    rl_core.save_networks(out / "checkpoint.json", nets)
    _write_manifest(
        out,
        "train",
        scenario,
        {
            "fairness": fairness_on,
            "seed": args.seed,
            "reward_scales": log.reward_scales,
        },
    )
    summary = summarize_log(log, scenario.agents, window=scenario.metrics_window)
    print(
        f"trained {config.episodes} episodes "
        f"(fairness {'on' if fairness_on else 'off'}, seed {args.seed}); "
        f"trailing total shortfall {summary.total_shortfall:.2f}"
    )
    return 0


def cmd_baseline(args) -> int:
    scenario = load_scenario(args.scenario, args.set or [])
    out = _out_dir(args)
    summary = analytical_baseline(scenario)
    from .analytics import expected_shortfall as planned_shortfall
    from .analytics import optimal_trajectory

    rows = []
    for i, (label, spec) in enumerate(zip(summary.agent_labels, scenario.agents)):
        plan = optimal_trajectory(
            spec.initial_shares, scenario.market.num_trades, scenario.market, spec.risk_aversion
        )
        rows.append(
            [
                i,
                label,
                float(summary.initial_shares[i]),
                float(planned_shortfall(plan, scenario.market)),
                float(summary.mean_variance[i]),
                float(summary.mean_realized_shortfall[i]),
                float(summary.per_share_shortfall[i]),
            ]
        )
    _write_csv(out / "baseline_metrics.csv", BASELINE_COLUMNS, rows)
    with open(out / "baseline_summary.json", "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, "baseline", scenario, {})
    print(f"baseline total shortfall {summary.total_shortfall:.2f} -> {out}")
    return 0


def cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario, args.set or [])
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    out = _out_dir(args)
    report = run_comparison(scenario, seeds=seeds, workers=args.workers)
    report.save(out / "report.json")

    fig1_rows = []
    for run in report.runs:
        for ep, sf, vr in zip(
            run.episodes, run.episode_total_shortfall, run.episode_total_variance
        ):
            fig1_rows.append([run.variant, run.seed, ep, float(sf), float(vr)])
    _write_csv(out / "fig1_convergence.csv", FIG1_COLUMNS, fig1_rows)

    fig2_rows = []
    for run in report.runs:
        s = run.summary
        for i, label in enumerate(s.agent_labels):
            fig2_rows.append(
                [
                    run.variant,
                    run.seed,
                    i,
                    label,
                    float(s.initial_shares[i]),
                    float(s.mean_realized_shortfall[i]),
                    float(s.mean_variance[i]),
                    float(s.per_share_shortfall[i]),
                ]
            )
    _write_csv(out / "fig2_distribution.csv", FIG2_COLUMNS, fig2_rows)
    _write_manifest(out, "compare", scenario, {"seeds": seeds or scenario.replication_seeds})
    print(f"compared {len(report.runs)} runs -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    run_dir = Path(args.run)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise ScenarioError(f"{run_dir} does not contain manifest.json")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    scenario = Scenario.from_dict(manifest["scenario"])
    nets = rl_core.load_networks(run_dir / "checkpoint.json")
    config = replace(scenario.train, seed=args.seed)
    seed_seqs = np.random.SeedSequence(args.seed).spawn(len(scenario.agents))
    agents = []
    for spec, seq in zip(scenario.agents, seed_seqs):
        agent = AgentRuntime(spec, config, seq)
        agent.load_networks(
            {
                name: nets[f"{spec.label}/{name}"]
                for name in ("actor", "critic", "target_actor", "target_critic")
            }
        )
        agents.append(agent)
    eval_seeds = list(range(args.seed, args.seed + args.episodes))
    log = evaluation_rollout(
        scenario.market, agents, eval_seeds, scenario.train.window_length
    )
    out = _out_dir(args)
    rows = [
        [
            rec.episode,
            rec.agent,
            float(rec.realized_shortfall),
            float(rec.expected_shortfall),
            float(rec.variance),
        ]
        for rec in log.records
    ]
    _write_csv(out / "eval_metrics.csv", EVAL_COLUMNS, rows)
    _write_manifest(
        out, "evaluate", scenario, {"seed": args.seed, "episodes": args.episodes}
    )
    summary = summarize_log(log, scenario.agents, window=args.episodes)
    print(f"evaluated {args.episodes} episodes; total shortfall {summary.total_shortfall:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairliq",
        description="Multi-agent liquidation training, baselines and comparisons.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("emit-scenario", help="write a built-in scenario file")
    p.add_argument("name", choices=sorted(BUILTIN_SCENARIOS))
    p.add_argument("--out", required=True, help="output scenario path")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted override")
    p.set_defaults(func=cmd_emit_scenario)

    p = sub.add_parser("train", help="train one variant on one seed")
    p.add_argument("scenario", help="scenario file")
    p.add_argument("--fairness", choices=["on", "off"], default="off")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted override")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("baseline", help="analytical reference execution")
    p.add_argument("scenario")
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted override")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("compare", help="train plain and ggi variants across seeds")
    p.add_argument("scenario")
    p.add_argument("--seeds", help="comma-separated seed list (default: scenario seeds)")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1, help="parallel runs (results identical)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted override")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("evaluate", help="greedy rollouts from a trained run directory")
    p.add_argument("run", help="directory produced by `fairliq train`")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDivergenceError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
