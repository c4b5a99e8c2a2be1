"""Experiment harness: config handling, runs, aggregate table, and plots.

A run is fully determined by its config (including the seed): it trains one
agent (or sweeps the fixed-threshold baseline), writes a learning-curve CSV
plus a JSON summary into the output directory, and reports final metrics as
the mean of the last five evaluation records.

CLI subcommands: run, sweep, table, plot.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import mc_oracle
from .agents import DEFAULT_EPISODES, EvalRecord, RngStreams, evaluate, make_agent, train
from .autodiff import save_parameters

AGENT_KINDS = ("mc_oracle", "a2c_rnn", "threshold", "joint")

# overridable learner settings, with per-agent defaults applied in make_agent
HYPER_KEYS = (
    "lr", "beta_entropy", "gamma", "eta",
    "lr_evidence", "lr_threshold", "lr_critic",
    "beta_entropy_evidence", "beta_entropy_threshold",
)

FINAL_METRIC_WINDOW = 5


@dataclass
class ExperimentConfig:
    agent_kind: str
    epsilon: float
    seed: int = 0
    episodes: int | None = None
    eval_interval: int = 500
    eval_episodes: int = 500
    sensitivity: float | None = None
    mc_rollouts: int = 10_000
    initial_eval: bool = False
    save_params: bool = False
    out_dir: str = "runs/experiment"
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.agent_kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {self.agent_kind!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.episodes is None:
            self.episodes = DEFAULT_EPISODES.get(self.agent_kind, 0)
        unknown = set(self.hyperparams) - set(HYPER_KEYS)
        if unknown:
            raise ValueError(f"unknown hyperparameter keys: {sorted(unknown)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        hp = d.pop("hyperparams")
        d.update(hp)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        hp = {k: d.pop(k) for k in list(d) if k in HYPER_KEYS}
        hp.update(d.pop("hyperparams", {}))
        return cls(hyperparams=hp, **d)


def curve_to_csv(curve: list[EvalRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episodes_trained", "accuracy", "mean_decision_time", "mean_reward"])
        for rec in curve:
            writer.writerow([rec.episodes_trained, repr(rec.accuracy),
                             repr(rec.mean_decision_time), repr(rec.mean_reward)])


def read_curve_csv(path) -> list[EvalRecord]:
    expected = ["episodes_trained", "accuracy", "mean_decision_time", "mean_reward"]
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty curve file") from None
        if header != expected:
            raise ValueError(f"{path}: row 1: bad header {header}")
        for i, row in enumerate(reader, start=2):
            try:
                records.append(EvalRecord(int(row[0]), float(row[1]),
                                          float(row[2]), float(row[3])))
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}: row {i}: malformed: {row}") from exc
    if not records:
        raise ValueError(f"{path}: no data rows")
    return records


def _final_metrics(curve: list[EvalRecord]) -> dict:
    window = curve[-FINAL_METRIC_WINDOW:]
    return {
        "final_reward": float(np.mean([r.mean_reward for r in window])),
        "final_accuracy": float(np.mean([r.accuracy for r in window])),
        "final_decision_time": float(np.mean([r.mean_decision_time for r in window])),
    }


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute one run and write curve.csv / sweep.csv plus summary.json."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary: dict = {"config": config.to_dict()}

    if config.agent_kind == "mc_oracle":
        rng = np.random.default_rng(np.random.SeedSequence(config.seed))
        result = mc_oracle.sweep(config.epsilon, n=config.mc_rollouts, rng=rng)
        mc_oracle.write_sweep_csv([result], out / "sweep.csv")
        best = next(c for c in result.cells if c.tau == result.best_tau)
        summary.update({
            "best_tau": result.best_tau,
            "best_mean_reward": result.best_mean_reward,
            "final_reward": result.best_mean_reward,
            "final_accuracy": best.mean_accuracy,
            "final_decision_time": best.mean_decision_time,
            "cells": [asdict(c) for c in result.cells],
        })
    else:
        streams = RngStreams.from_seed(config.seed)
        overrides = dict(config.hyperparams)
        if config.sensitivity is not None:
            overrides["sensitivity"] = config.sensitivity
        agent = make_agent(config.agent_kind, config.epsilon, streams.init, **overrides)
        curve = train(agent, config.episodes, config.eval_interval,
                      config.eval_episodes, streams, config.initial_eval)
        curve_to_csv(curve, out / "curve.csv")
        summary.update(_final_metrics(curve))
        summary["curve_rows"] = len(curve)
        if config.save_params:
            for name, store in agent.parameter_stores().items():
                save_parameters(store, out / f"params_{name}.bin")

    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


TABLE_ROW_ORDER = ("mc_oracle", "a2c_rnn", "threshold", "joint")
TABLE_ROW_LABELS = {
    "mc_oracle": "Monte-Carlo sweep",
    "a2c_rnn": "A2C-RNN",
    "threshold": "Threshold learner",
    "joint": "Joint evidence+threshold",
}


def emit_table(summaries: list[dict]) -> str:
    """Final-reward grid (agents x noise levels) with deltas vs the sweep row.

    A cell fed several summaries (multiple seeds of one setting) shows their
    mean.
    """
    groups: dict[tuple[str, float], list[float]] = {}
    for s in summaries:
        kind = s["config"]["agent_kind"]
        eps = float(s["config"]["epsilon"])
        groups.setdefault((kind, eps), []).append(float(s["final_reward"]))
    cells = {key: float(np.mean(vals)) for key, vals in groups.items()}
    eps_values = sorted({eps for _, eps in cells})
    kinds = [k for k in TABLE_ROW_ORDER if any(kk == k for kk, _ in cells)]

    label_w = max(len(TABLE_ROW_LABELS[k]) for k in kinds) + 2
    col_w = 9
    lines = []
    header = "agent".ljust(label_w) + "".join(
        f"eps={e:g}".rjust(col_w) for e in eps_values)
    lines.append(header)
    lines.append("-" * len(header))
    for kind in kinds:
        row = TABLE_ROW_LABELS[kind].ljust(label_w)
        for e in eps_values:
            v = cells.get((kind, e))
            row += (f"{v:.1f}".rjust(col_w) if v is not None else " " * col_w)
        lines.append(row)
    if "mc_oracle" in kinds and len(kinds) > 1:
        lines.append("")
        lines.append("delta vs Monte-Carlo sweep")
        for kind in kinds:
            if kind == "mc_oracle":
                continue
            row = TABLE_ROW_LABELS[kind].ljust(label_w)
            for e in eps_values:
                v = cells.get((kind, e))
                m = cells.get(("mc_oracle", e))
                row += (f"{v - m:+.1f}".rjust(col_w)
                        if v is not None and m is not None else " " * col_w)
            lines.append(row)
    return "\n".join(lines) + "\n"


def _load_run_dir(path: Path) -> tuple[dict, list[EvalRecord] | None]:
    if path.is_file():
        path = path.parent
    summary_path = path / "summary.json"
    if not summary_path.exists():
        raise ValueError(f"{path}: no summary.json")
    with open(summary_path, encoding="utf-8") as fh:
        summary = json.load(fh)
    curve_path = path / "curve.csv"
    curve = read_curve_csv(curve_path) if curve_path.exists() else None
    return summary, curve


METRICS = (
    ("accuracy", "accuracy"),
    ("mean_decision_time", "decision time"),
    ("mean_reward", "reward"),
)


def emit_curves(run_paths: list, out_dir) -> list[Path]:
    """Per-noise-level charts of each metric vs training episodes (SVG).

    Learning runs are overlaid as lines; sweep-baseline runs contribute a
    dashed horizontal reference. All inputs are validated before the first
    file is written.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    runs = []
    for p in run_paths:
        summary, curve = _load_run_dir(Path(p))
        kind = summary["config"]["agent_kind"]
        if kind != "mc_oracle" and curve is None:
            raise ValueError(f"{p}: learning run without curve.csv")
        runs.append((summary, curve))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eps_values = sorted({float(s["config"]["epsilon"]) for s, _ in runs})
    written = []
    for eps in eps_values:
        group = [(s, c) for s, c in runs if float(s["config"]["epsilon"]) == eps]
        for metric_key, metric_label in METRICS:
            fig, ax = plt.subplots(figsize=(5, 3.5))
            for summary, curve in group:
                kind = summary["config"]["agent_kind"]
                if kind == "mc_oracle":
                    ref = {"accuracy": summary["final_accuracy"],
                           "mean_decision_time": summary["final_decision_time"],
                           "mean_reward": summary["final_reward"]}[metric_key]
                    ax.axhline(ref, linestyle="--", color="red",
                               label=TABLE_ROW_LABELS[kind])
                else:
                    xs = [r.episodes_trained for r in curve]
                    ys = [getattr(r, metric_key) for r in curve]
                    ax.plot(xs, ys, label=TABLE_ROW_LABELS[kind])
            ax.set_xlabel("training episodes")
            ax.set_ylabel(metric_label)
            ax.set_title(f"{metric_label}, eps={eps:g}")
            ax.legend(fontsize=7)
            fig.tight_layout()
            out_path = out / f"eps_{eps:g}_{metric_key}.svg"
            fig.savefig(out_path)
            plt.close(fig)
            written.append(out_path)
    return written


def _build_config(args) -> ExperimentConfig:
    file_cfg: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
    flags = {
        "agent_kind": getattr(args, "agent", None),
        "epsilon": args.epsilon,
        "seed": args.seed,
        "episodes": getattr(args, "episodes", None),
        "eval_interval": getattr(args, "eval_interval", None),
        "eval_episodes": getattr(args, "eval_episodes", None),
        "sensitivity": getattr(args, "sensitivity", None),
        "mc_rollouts": getattr(args, "rollouts", None),
        "initial_eval": getattr(args, "initial_eval", None) or None,
        "save_params": getattr(args, "save_params", None) or None,
        "out_dir": args.out,
    }
    merged = dict(file_cfg)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return ExperimentConfig.from_dict(merged)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="evacc",
        description="Evidence-accumulation decision agents on a noisy guessing task.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train one agent and write its outputs")
    run_p.add_argument("--agent", choices=AGENT_KINDS)
    run_p.add_argument("--epsilon", type=float)
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--episodes", type=int)
    run_p.add_argument("--eval-interval", dest="eval_interval", type=int)
    run_p.add_argument("--eval-episodes", dest="eval_episodes", type=int)
    run_p.add_argument("--sensitivity", type=float)
    run_p.add_argument("--initial-eval", dest="initial_eval", action="store_true")
    run_p.add_argument("--save-params", dest="save_params", action="store_true")
    run_p.add_argument("--config", help="JSON config file; flags override it")
    run_p.add_argument("--out", help="output directory")

    sweep_p = sub.add_parser("sweep", help="fixed-threshold Monte-Carlo baseline")
    sweep_p.add_argument("--epsilon", type=float)
    sweep_p.add_argument("--seed", type=int)
    sweep_p.add_argument("--rollouts", type=int)
    sweep_p.add_argument("--config", help="JSON config file; flags override it")
    sweep_p.add_argument("--out", help="output directory")

    table_p = sub.add_parser("table", help="aggregate run summaries into a grid")
    table_p.add_argument("runs", nargs="+", help="run directories")
    table_p.add_argument("--out", help="also write the table to this file")

    plot_p = sub.add_parser("plot", help="render learning-curve charts")
    plot_p.add_argument("runs", nargs="+", help="run directories")
    plot_p.add_argument("--out", required=True, help="chart output directory")

    args = parser.parse_args(argv)
    try:
        if args.command in ("run", "sweep"):
            if args.command == "sweep":
                args.agent = "mc_oracle"
            config = _build_config(args)
            summary = run_experiment(config)
            print(f"wrote {config.out_dir}/summary.json "
                  f"(final reward {summary['final_reward']:.2f})")
        elif args.command == "table":
            summaries = [_load_run_dir(Path(p))[0] for p in args.runs]
            text = emit_table(summaries)
            print(text, end="")
            if args.out:
                Path(args.out).write_text(text, encoding="utf-8")
        elif args.command == "plot":
            written = emit_curves(args.runs, args.out)
            print(f"wrote {len(written)} charts to {args.out}")
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
