"""Command line entry point: ``rampmerge {plan,simulate,compare,bench}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .grid import PhysicalState
from .sim import (
    PLANNERS,
    bench,
    compare,
    export_bench_csv,
    export_csv,
    local_scene,
    plan_log,
    run_scenario,
    vehicle_tracks,
)
from .solver import plan_cycle

# published solve times (8-thread laptop CPU), printed for orientation only
REFERENCE_MS = {"min_ms": 3.1, "max_ms": 23.3, "avg_ms": 8.1}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="scenario YAML file or bundled name (scenario1, scenario2)")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--seed", type=int, default=None, help="reserved; every component is deterministic")
    p.add_argument("--threads", type=int, default=None, help="solver threads (default: from config)")
    p.add_argument("--no-timing", action="store_true", help="write solve_ms as 0 for reproducible CSVs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rampmerge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="solve once from the scenario's initial state and write the plan CSV")
    _common(p)

    p = sub.add_parser("simulate", help="closed-loop run with one planner")
    _common(p)
    p.add_argument("--planner", choices=PLANNERS, default="mdp")

    p = sub.add_parser("compare", help="run the MDP and IDM planners on the same scenario")
    _common(p)

    p = sub.add_parser("bench", help="time the solver")
    _common(p)
    p.add_argument("--repeat", type=int, default=20)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    cfg = load_config(args.config)
    threads = args.threads or cfg.threads
    out = Path(args.out)
    timing = not args.no_timing

    if args.command == "plan":
        grid = cfg.build_grid()
        rp = cfg.reward_params(grid)
        scene = local_scene(cfg, vehicle_tracks(cfg, 0.0), cfg.ego0.pos, buffered=False)
        ego = PhysicalState(0.0, cfg.ego0.accel, cfg.ego0.vel, 0.0)
        plan = plan_cycle(grid, scene, rp, ego, threads=threads)
        if not plan.feasible:
            print("infeasible: no safe plan from the initial state", file=sys.stderr)
            return 1
        path = export_csv(plan_log(plan, cfg, rp), out / f"{cfg.name}_plan.csv", timing)
        print(f"plan: {len(plan.steps)} steps, value {plan.value:.4f}, {plan.solve_ms:.1f} ms -> {path}")

    elif args.command == "simulate":
        sim = run_scenario(cfg, args.planner, threads)
        path = export_csv(sim, out / f"{cfg.name}_{args.planner}.csv", timing)
        print(f"{args.planner}: {len(sim)} cycles, merged={sim.meta['merged']} -> {path}")

    elif args.command == "compare":
        result = compare(cfg, threads)
        export_csv(result.mdp, out / f"{cfg.name}_mdp.csv", timing)
        export_csv(result.idm, out / f"{cfg.name}_idm.csv", timing)
        metrics_path = out / f"{cfg.name}_metrics.json"
        metrics_path.write_text(json.dumps(result.metrics, indent=2))
        for planner, m in result.metrics.items():
            print(planner, " ".join(f"{k}={v:.3f}" for k, v in m.items()))
        print(f"-> {out}")

    elif args.command == "bench":
        reports = bench(cfg, args.repeat, threads)
        path = export_bench_csv(reports, out / f"{cfg.name}_bench.csv")
        for r in reports:
            print(
                f"{r.case:>8}: cells={r.cells} reps={r.repetitions} threads={r.threads} "
                f"min={r.min_ms:.1f} max={r.max_ms:.1f} avg={r.avg_ms:.1f} ms"
            )
        ref = REFERENCE_MS
        print(f"reference: min={ref['min_ms']} max={ref['max_ms']} avg={ref['avg_ms']} ms -> {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
