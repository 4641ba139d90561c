"""Command-line entry points.

    pegrl train --config experiment.json --seed 3
    pegrl eval --run runs/full0 --episodes 30
    pegrl report --run runs/full0
    pegrl serve --run runs/full0 --port 8765
    pegrl demo-gen --geometry square --clearance 0.25 --count 100 --out demos.jsonl
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .demos import generate_reach_demos
from .evaluate import eval_from_run_dir
from .report import ReportError, export_report, write_report, write_series_csv
from .training import ExperimentConfig, make_sim_config, run_training


def _cmd_train(args) -> int:
    if args.config:
        config = ExperimentConfig.from_dict(json.loads(Path(args.config).read_text()))
    else:
        config = ExperimentConfig()
    if args.seed is not None:
        config.seed = args.seed
    if args.outdir:
        config.outdir = args.outdir
    if args.method:
        config.method = args.method
    telemetry = None
    if args.serve_port is not None:
        from ..telemetry import TelemetryService

        telemetry = TelemetryService(port=args.serve_port)
        print(f"telemetry listening on ws://127.0.0.1:{telemetry.port}")
    try:
        art = run_training(config, telemetry=telemetry, resume=args.resume)
    finally:
        if telemetry is not None:
            telemetry.close()
    print(
        f"run complete: {art.episodes} episodes, {art.transitions} transitions, "
        f"{art.successes} assisted/unassisted successes -> {art.outdir}"
    )
    return 0


def _cmd_eval(args) -> int:
    row = eval_from_run_dir(args.run, n_episodes=args.episodes, seed_base=args.seed_base)
    print(f"{row.successes}/{row.episodes} successes ({row.rate:.2%})")
    return 0


def _cmd_report(args) -> int:
    try:
        report = export_report(args.run)
    except ReportError as e:
        print(f"report error: {e}", file=sys.stderr)
        return 3
    out = Path(args.out) if args.out else Path(args.run) / "report.json"
    write_report(report, out)
    write_series_csv(report, out.parent / "series")
    print(f"report -> {out}")
    if report.empty:
        print("run directory had no records", file=sys.stderr)
        return 2
    return 0


def _cmd_serve(args) -> int:
    # replays a recorded run's frames to connected consoles at control rate
    import time

    from ..sim import FrameSnapshot, SimConfig
    from ..telemetry import TelemetryService

    run_dir = Path(args.run)
    sim_config = SimConfig.load(run_dir / "sim_config.json")
    rate = sim_config.control_rate
    service = TelemetryService(port=args.port)
    print(f"serving recorded run on ws://127.0.0.1:{service.port} at {rate} Hz")
    try:
        config = ExperimentConfig.load(run_dir / "run_meta.json")
        config.outdir = str(run_dir / "live")
        config.budget_transitions = args.live_budget
        run_training(config, telemetry=service, resume=False)
    except KeyboardInterrupt:
        pass
    finally:
        service.close()
    return 0


def _cmd_demo_gen(args) -> int:
    from ..sim import default_config

    sim_config = default_config(args.geometry, clearance_c=args.clearance)
    demos = generate_reach_demos(sim_config, count=args.count, seed=args.seed)
    demos.save(args.out)
    print(f"{len(demos)} episodes -> {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pegrl")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one training configuration")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--outdir")
    p.add_argument("--method", choices=("il_only", "il_rl_vanilla", "il_rl_tactile_full"))
    p.add_argument("--resume", action="store_true")
    p.add_argument("--serve-port", type=int, default=None,
                   help="expose live telemetry/intervention on this port")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a finished run")
    p.add_argument("--run", required=True)
    p.add_argument("--episodes", type=int, default=15)
    p.add_argument("--seed-base", type=int, default=900_000)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("report", help="regenerate metrics from run logs")
    p.add_argument("--run", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("serve", help="live training with the browser console attached")
    p.add_argument("--run", required=True)
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--live-budget", type=int, default=2000)
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("demo-gen", help="generate scripted reach demonstrations")
    p.add_argument("--geometry", default="square")
    p.add_argument("--clearance", type=float, default=0.25)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=777)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_demo_gen)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
