"""Command-line entry point: training runs, policy comparisons, and the
preconfigured experiments, each emitting CSV tables, SVG figures and a
manifest sufficient to reproduce the run.

Exit codes: 0 success, 1 usage error, 2 config/validation error, 3 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (ConfigError, ScenarioConfig, ValidationError,
                     apply_overrides, config_to_text, load_config, save_config)
from .engine import (EpisodeRecord, build_policy, export_diagnostics_csv,
                     export_trace_csv, run_evaluation, run_training,
                     step_response_summary, POLICY_NAMES)
from .metrics import (compare_policies, dexterity_sensitivity, moving_average,
                      summarize)
from .svgplot import ChartSpec, Series, render_svg

EXPERIMENTS = ("two-step-dex", "dex-sensitivity", "drl-compare")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse default exits with 2
        raise UsageError(message)


def _load_cfg(args: argparse.Namespace) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value
    return apply_overrides(cfg, overrides) if overrides else cfg


class RunDir:
    """Output directory plus the manifest of everything written into it."""

    def __init__(self, out: str, run_id: str, cfg: ScenarioConfig,
                 command: list[str]):
        self.path = Path(out)
        self.path.mkdir(parents=True, exist_ok=True)
        self.run_id = run_id
        self.cfg = cfg
        self.command = command
        self.outputs: list[str] = []
        self.write_text("config.txt", config_to_text(cfg))

    def file(self, name: str) -> Path:
        self.outputs.append(name)
        return self.path / name

    def write_text(self, name: str, text: str) -> None:
        self.file(name).write_text(text)

    def finalize(self) -> None:
        manifest = {
            "run_id": self.run_id,
            "command": self.command,
            "version": __version__,
            "seed": self.cfg.master_seed,
            "config_snapshot": "config.txt",
            "outputs": sorted(set(self.outputs)),
        }
        (self.path / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _series(ys, label: str) -> Series:
    return Series(label=label, points=tuple((float(i), float(y))
                                            for i, y in enumerate(ys)))


def _write_training_figures(run: RunDir, records: list[EpisodeRecord],
                            cfg: ScenarioConfig, prefix: str = "") -> None:
    summ = summarize(records, cfg)
    run.write_text(f"{prefix}return_curve.svg", render_svg(ChartSpec(
        kind="line", title="Episodic return",
        series=(_series(summ.returns, "raw"),
                _series(summ.returns_smoothed, "smoothed")),
        x_label="episode", y_label="return")))
    run.write_text(f"{prefix}queues.svg", render_svg(ChartSpec(
        kind="line", title="Mean queue backlog per episode",
        series=(_series(summ.mean_queue_embb, "eMBB"),
                _series(summ.mean_queue_hrllc, "HRLLC")),
        x_label="episode", y_label="packets")))
    run.write_text(f"{prefix}drift.svg", render_svg(ChartSpec(
        kind="line", title="Mean per-slice drift per episode",
        series=(_series(summ.mean_drift_embb, "eMBB"),
                _series(summ.mean_drift_hrllc, "HRLLC")),
        x_label="episode", y_label="drift")))


def cmd_train(args: argparse.Namespace, argv: list[str]) -> int:
    cfg = _load_cfg(args)
    run = RunDir(args.out, f"train-{args.agent}-{cfg.master_seed}", cfg, argv)
    records, policy = run_training(cfg, args.agent)
    if hasattr(policy, "save"):
        policy.save(run.file("checkpoint.bin"))
    export_diagnostics_csv(records, args.agent, run.file("training.csv"))
    export_trace_csv(records, cfg, run.file("trace.csv"))
    _write_training_figures(run, records, cfg)
    run.finalize()
    return 0


def cmd_compare(args: argparse.Namespace, argv: list[str]) -> int:
    cfg = _load_cfg(args)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    for p in policies:
        if p not in POLICY_NAMES:
            raise UsageError(f"unknown policy {p!r}; choose from {POLICY_NAMES}")
    needs_ckpt = [p for p in policies if p in ("a2c", "dqn")]
    if needs_ckpt and not args.checkpoint:
        raise ValidationError(
            f"policies {needs_ckpt} need --checkpoint with trained parameters")
    run = RunDir(args.out, f"compare-{cfg.master_seed}", cfg, argv)
    eval_seed = args.eval_seed if args.eval_seed is not None \
        else cfg.master_seed + 1
    records_by_policy: dict[str, list[EpisodeRecord]] = {}
    for name in policies:
        policy = build_policy(name, cfg, eval_seed)
        if name in ("a2c", "dqn"):
            policy.load(args.checkpoint)
        records_by_policy[name] = run_evaluation(cfg, policy, eval_seed)
    table = compare_policies(records_by_policy, cfg)

    lines = ["policy,reliability_at_dmax"]
    for name in policies:
        lines.append(f"{name},{table['reliability'][name]!r}")
    run.write_text("reliability.csv", "\n".join(lines) + "\n")

    header = "episode," + ",".join(policies)
    rows = [header]
    n_eps = len(next(iter(records_by_policy.values())))
    for e in range(n_eps):
        rows.append(",".join([str(e)] + [repr(float(table["returns"][p][e]))
                                         for p in policies]))
    run.write_text("returns.csv", "\n".join(rows) + "\n")

    cdf_series = tuple(
        Series(label=name, points=tuple(table["cdf"][name]))
        for name in policies if table["cdf"][name])
    if cdf_series:
        run.write_text("delay_cdf.svg", render_svg(ChartSpec(
            kind="cdf", title="HRLLC delay CDF", series=cdf_series,
            x_label="delay (s)", y_label="cumulative fraction",
            v_refs=(cfg.d_max_s,), h_refs=(cfg.chi_h,))))
    run.finalize()
    return 0


def _experiment_two_step(args, argv, cfg: ScenarioConfig) -> int:
    cfg = cfg.replace(dexterity_profile="two_step")
    run = RunDir(args.out, f"two-step-dex-{cfg.master_seed}", cfg, argv)
    records, policy = run_training(cfg, "a2c")
    summary = step_response_summary(records, cfg)
    run.write_text("step_response.json", json.dumps(summary, indent=2,
                                                    sort_keys=True) + "\n")
    export_trace_csv(records, cfg, run.file("trace.csv"))
    _write_training_figures(run, records, cfg)
    user = cfg.num_embb + cfg.dxi_step_user
    slots = [s for r in records for s in r.slots]
    stride = max(len(slots) // 2000, 1)  # decimate for plotting
    run.write_text("step_rate.svg", render_svg(ChartSpec(
        kind="line", title="Stepped user: achieved rate and DXI",
        series=(Series("rate (Mbit/s)",
                       tuple((float(s.slot), s.rates[user] / 1e6)
                             for s in slots[::stride])),
                Series("DXI", tuple((float(s.slot),
                                     float(s.dxi[cfg.dxi_step_user]))
                                    for s in slots[::stride]))),
        x_label="slot", y_label="value")))
    run.finalize()
    return 0


def _experiment_dex_sensitivity(args, argv, cfg: ScenarioConfig) -> int:
    cfg = cfg.replace(num_hrllc=5, dexterity_profile="per_user",
                      dxi_values=(0.0, 2.5, 5.0, 7.5, 10.0),
                      lambda_embb=min(cfg.lambda_embb, 1.0))
    run = RunDir(args.out, f"dex-sensitivity-{cfg.master_seed}", cfg, argv)
    records, _ = run_training(cfg, "a2c")
    final = records[len(records) // 2:]  # steady-state half
    table = dexterity_sensitivity(final, cfg)
    lines = ["user,dxi,mean_arrivals,mean_departures,mean_prbs"]
    for row in table["rows"]:
        lines.append(",".join([str(row["user"])] +
                              [repr(row[k]) for k in
                               ("dxi", "mean_arrivals", "mean_departures",
                                "mean_prbs")]))
    lines.append(f"# rank_correlation_dxi_prbs,"
                 f"{table['rank_correlation_dxi_prbs']!r}")
    run.write_text("sensitivity.csv", "\n".join(lines) + "\n")
    run.write_text("sensitivity.svg", render_svg(ChartSpec(
        kind="bar", title="Per-user arrivals / departures / PRBs vs DXI",
        series=(Series("arrivals", tuple((r["dxi"], r["mean_arrivals"])
                                         for r in table["rows"])),
                Series("departures", tuple((r["dxi"], r["mean_departures"])
                                           for r in table["rows"])),
                Series("PRBs", tuple((r["dxi"], r["mean_prbs"])
                                     for r in table["rows"]))),
        x_label="dexterity index", y_label="mean per slot")))
    run.finalize()
    return 0


def _experiment_drl_compare(args, argv, cfg: ScenarioConfig) -> int:
    run = RunDir(args.out, f"drl-compare-{cfg.master_seed}", cfg, argv)
    curves = {}
    for kind in ("a2c", "dqn"):
        records, _ = run_training(cfg, kind)
        curves[kind] = moving_average(
            [r.episodic_return for r in records], cfg.smooth_window)
        export_diagnostics_csv(records, kind, run.file(f"{kind}_training.csv"))
    run.write_text("drl_returns.svg", render_svg(ChartSpec(
        kind="line", title="Smoothed episodic return",
        series=tuple(_series(curves[k], k.upper()) for k in ("a2c", "dqn")),
        x_label="episode", y_label="return")))
    header = "episode,a2c,dqn"
    rows = [header] + [
        ",".join([str(i), repr(float(curves["a2c"][i])),
                  repr(float(curves["dqn"][i]))])
        for i in range(len(curves["a2c"]))]
    run.write_text("drl_returns.csv", "\n".join(rows) + "\n")
    run.finalize()
    return 0


def cmd_experiment(args: argparse.Namespace, argv: list[str]) -> int:
    cfg = _load_cfg(args)
    if args.name == "two-step-dex":
        return _experiment_two_step(args, argv, cfg)
    if args.name == "dex-sensitivity":
        return _experiment_dex_sensitivity(args, argv, cfg)
    if args.name == "drl-compare":
        return _experiment_drl_compare(args, argv, cfg)
    raise UsageError(f"unknown experiment {args.name!r}; "
                     f"choose from {EXPERIMENTS}")


def build_parser() -> _Parser:
    parser = _Parser(prog="slicesched",
                     description="PRB slicing simulator and schedulers")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value scenario file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--out", required=True, help="output directory")

    p_train = sub.add_parser("train", help="train a scheduling agent")
    common(p_train)
    p_train.add_argument("--agent", choices=("a2c", "dqn"), default="a2c")

    p_cmp = sub.add_parser("compare", help="evaluate policies on shared seeds")
    common(p_cmp)
    p_cmp.add_argument("--policies", default="a2c,rr,pf",
                       help="comma list from: a2c,dqn,rr,pf")
    p_cmp.add_argument("--checkpoint", help="trained parameters for a2c/dqn")
    p_cmp.add_argument("--eval-seed", type=int, default=None)

    p_exp = sub.add_parser("experiment", help="run a preconfigured scenario")
    common(p_exp)
    p_exp.add_argument("--name", required=True,
                       help="one of: " + ", ".join(EXPERIMENTS))
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "train":
            return cmd_train(args, argv)
        if args.command == "compare":
            return cmd_compare(args, argv)
        return cmd_experiment(args, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
