"""Command-line entry points.

    retnav bench nav       --goals 50 --noise 0.0 --seed 0 --out report.json
    retnav bench localize  --samples 30 --seed 0
    retnav bench vessel    --waypoints 5 --seed 0
    retnav serve           --addr 127.0.0.1:7464 --log session.jsonl
    retnav replay          session.jsonl
    retnav config-template

`--golden FILE` compares the canonical machine-readable report against a
previous run byte-for-byte and fails on any difference. `--config FILE`
loads the shared key-value configuration; CLI flags win over file values.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import cost_params_from_config, example_config, load_config, oracle_from_config
from .oracle import OracleConfig
from .report import RunReport
from .scenario import benchmark_grid, default_scenario, localization_pixels
from .server import SessionServer, replay_log
from .tasks import VesselPath, run_localization, run_navigation_benchmark, run_vessel_following


def _default_vessel_pixels(n: int) -> np.ndarray:
    # gentle arc across the cap center
    ts = np.linspace(0.0, 1.0, n)
    return np.column_stack([280.0 + 80.0 * ts, 200.0 + 70.0 * np.sin(1.1 * ts) / np.sin(1.1)])


def _finish_report(report: RunReport, args) -> int:
    print(report.to_table())
    if args.out:
        report.save(args.out)
        print(f"report written to {args.out}")
    if args.golden:
        if report.matches_golden(args.golden):
            print(f"golden match: {args.golden}")
        else:
            print(f"GOLDEN MISMATCH against {args.golden}", file=sys.stderr)
            return 1
    return 0


def _load_cfg(args) -> dict:
    return load_config(args.config) if args.config else {}


def cmd_bench_nav(args) -> int:
    cfg = _load_cfg(args)
    scenario = default_scenario(eye_jitter_mm=float(cfg.get("sim.eye_jitter_mm", 0.30)))
    cp = cost_params_from_config(cfg, sclera_point=scenario.sclera_point, eye=None)
    pixels = benchmark_grid(scenario.camera, args.goals)
    report = run_navigation_benchmark(
        scenario,
        pixels,
        cp,
        noise_sigma=args.noise,
        seed=args.seed,
        replan_hz=float(cfg.get("sim.replan_hz", 5.0)),
    )
    return _finish_report(report, args)


def cmd_bench_localize(args) -> int:
    cfg = _load_cfg(args)
    scenario = default_scenario(eye_jitter_mm=float(cfg.get("sim.eye_jitter_mm", 0.30)))
    spec, _ = oracle_from_config(cfg)
    oc = OracleConfig(noise_sigma=np.full(3, args.noise), seed=args.seed)
    pixels = localization_pixels(scenario, args.samples, seed=args.seed)
    _, report = run_localization(scenario, pixels, oracle_cfg=oc, ransac_seed=args.seed, spec=spec)
    return _finish_report(report, args)


def cmd_bench_vessel(args) -> int:
    cfg = _load_cfg(args)
    scenario = default_scenario(eye_jitter_mm=float(cfg.get("sim.eye_jitter_mm", 0.30)))
    spec, _ = oracle_from_config(cfg)
    cp = cost_params_from_config(cfg, sclera_point=scenario.sclera_point, eye=None)
    fit, _ = run_localization(scenario, ransac_seed=args.seed, spec=spec)
    path = VesselPath(_default_vessel_pixels(args.waypoints))
    report = run_vessel_following(scenario, path, fit, cp)
    return _finish_report(report, args)


def cmd_serve(args) -> int:
    cfg = _load_cfg(args)
    addr = args.addr or os.environ.get("RETNAV_ADDR", "127.0.0.1:7464")
    host, _, port = addr.partition(":")
    init_payload = {
        "session_config": {
            "seed": args.seed,
            "noise_sigma": args.noise,
            "replan_hz": float(cfg.get("sim.replan_hz", 5.0)),
            "tick_hz": float(cfg.get("service.tick_hz", 100.0)),
        },
        "config_values": cfg,
    }
    server = SessionServer(
        host=host or "127.0.0.1", port=int(port or 7464), init_payload=init_payload, log_path=args.log
    )
    print(f"listening on {server.host}:{server.port}", flush=True)
    server.serve_forever()
    return 0


def cmd_replay(args) -> int:
    identical, compared, mismatches = replay_log(args.logfile)
    if identical:
        print(f"replay identical ({compared} events)")
        return 0
    print(f"replay mismatch: {mismatches} differing events of {compared}", file=sys.stderr)
    return 1


def cmd_config_template(args) -> int:
    print(example_config(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="retnav", description="Retinal navigation simulator and benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run a benchmark task")
    bench_sub = bench.add_subparsers(dest="task", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--noise", type=float, default=0.0, help="oracle noise sigma, mm")
    common.add_argument("--out", help="write the machine-readable report here")
    common.add_argument("--golden", help="compare byte-for-byte against a stored report")
    common.add_argument("--config", help="key-value config file")

    nav = bench_sub.add_parser("nav", parents=[common], help="navigation benchmark")
    nav.add_argument("--goals", type=int, default=50, choices=[10, 50, 100])
    nav.set_defaults(func=cmd_bench_nav)

    loc = bench_sub.add_parser("localize", parents=[common], help="eye localization")
    loc.add_argument("--samples", type=int, default=30)
    loc.set_defaults(func=cmd_bench_localize)

    ves = bench_sub.add_parser("vessel", parents=[common], help="vessel following")
    ves.add_argument("--waypoints", type=int, default=5)
    ves.set_defaults(func=cmd_bench_vessel)

    serve = sub.add_parser("serve", help="run the session service")
    serve.add_argument("--addr", help="host:port (default RETNAV_ADDR or 127.0.0.1:7464)")
    serve.add_argument("--log", help="append the event log to this JSONL file")
    serve.add_argument("--seed", type=int, default=0)
    serve.add_argument("--noise", type=float, default=0.0)
    serve.add_argument("--config", help="key-value config file")
    serve.set_defaults(func=cmd_serve)

    replay = sub.add_parser("replay", help="verify a recorded event log")
    replay.add_argument("logfile")
    replay.set_defaults(func=cmd_replay)

    tmpl = sub.add_parser("config-template", help="print a documented config template")
    tmpl.set_defaults(func=cmd_config_template)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
