import argparse
import json
import sys
from pathlib import Path as FilePath
from typing import List, Optional

import pandas as pd

from src.app.settings import get_app_settings
from src.common.exceptions import handle_error
from src.common.logger import setup_logger
from src.evalcli.acceptance import run_checks
from src.evalcli.schemas import PROFILE_ALIASES, PROFILES, Cell, SweepSpec
from src.evalcli.service import cell_run_config, prepare_output, run_sweep
from src.sim.scenario import build_t_intersection, load_scenario_file
from src.sim.schemas import EpisodeTrace, HeadwayModel, PlannerKind, RunConfig
from src.sim.service import behaviour_parameter, simulate_episode

logger = setup_logger("cli")

EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2


def build_parser() -> argparse.ArgumentParser:
    settings = get_app_settings()
    parser = argparse.ArgumentParser(
        prog="mergesim",
        description="Risk-optimal merge-in planner and IDM baselines at a T-intersection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    planners = [k.value for k in PlannerKind]
    headway_models = [m.value for m in HeadwayModel]

    episode = sub.add_parser("episode", help="Run a single episode and write its trace")
    episode.add_argument("--planner", choices=planners, default=PlannerKind.ROPT.value)
    episode.add_argument("--lambda", dest="lam", type=float, help="Mean headway λ (s)")
    episode.add_argument("--p", type=float, help="IIDM politeness factor")
    episode.add_argument("--bt", type=float, help="ROPT travel benefit b^t (€/km)")
    episode.add_argument("--headway-model", choices=headway_models, help="Headway distribution around λ")
    episode.add_argument("--seed", type=int, default=settings.BASE_SEED)
    episode.add_argument("--scenario", default=settings.SCENARIO_FILE, help="Scenario JSON file")
    episode.add_argument("--out", default=settings.OUT_DIR, help="Output directory")
    episode.add_argument("--diagnostics", action="store_true",
                         help="Write per-candidate optimizer diagnostics (ROPT)")

    sweep = sub.add_parser("sweep", help="Run a parameter sweep and write the statistics")
    sweep.add_argument("--profile", choices=sorted([*PROFILES, *PROFILE_ALIASES]), default=settings.PROFILE)
    sweep.add_argument("--planner", choices=planners, nargs="+")
    sweep.add_argument("--lambda", dest="lam", type=float, nargs="+")
    sweep.add_argument("--p", type=float, nargs="+")
    sweep.add_argument("--bt", type=float, nargs="+")
    sweep.add_argument("--headway-model", choices=headway_models,
                       help="Headway distribution around λ (default: the profile's)")
    sweep.add_argument("--runs", type=int)
    sweep.add_argument("--seed", type=int, default=settings.BASE_SEED)
    sweep.add_argument("--scenario", default=settings.SCENARIO_FILE)
    sweep.add_argument("--out", default=settings.OUT_DIR)
    sweep.add_argument("--workers", type=int, help="Worker processes (default MERGESIM_WORKERS)")

    check = sub.add_parser("check", help="Run the acceptance suite at desk scale")
    check.add_argument("--runs", type=int, help="Episodes per cell (default: desk profile)")
    check.add_argument("--seed", type=int, default=settings.BASE_SEED)
    check.add_argument("--out", default=settings.OUT_DIR)
    check.add_argument("--workers", type=int)
    return parser


def _episode_param(args, run: RunConfig, planner: PlannerKind) -> float:
    value = args.bt if planner is PlannerKind.ROPT else args.p
    return behaviour_parameter(run, planner) if value is None else value


def write_trace(trace: EpisodeTrace, out_dir: FilePath, diagnostics: bool) -> List[FilePath]:
    files = [out_dir / "trace.csv", out_dir / "events.csv"]
    pd.DataFrame({
        "time": trace.times,
        "longitudinal": trace.ego_longitudinal,
        "velocity": trace.ego_velocity,
        "acceleration": trace.ego_acceleration,
        "min_distance": trace.min_distance,
    }).to_csv(files[0], index=False)
    pd.DataFrame(
        [{"time": e.time, "name": e.name, "detail": e.detail} for e in trace.events],
        columns=["time", "name", "detail"],
    ).to_csv(files[1], index=False)
    if diagnostics:
        files.append(out_dir / "diagnostics.csv")
        pd.DataFrame(trace.diagnostics).to_csv(files[-1], index=False)
    return files


def run_episode_command(args) -> int:
    planner = PlannerKind(args.planner)
    if args.scenario:
        scene, run = load_scenario_file(args.scenario)
    else:
        run = RunConfig()
        scene = None
    cell = Cell(
        planner=planner,
        lam=run.scenario.mean_headway if args.lam is None else args.lam,
        param=_episode_param(args, run, planner),
    )
    run = cell_run_config(run, cell)
    if args.headway_model:
        scenario = run.scenario.model_copy(update={"headway_model": HeadwayModel(args.headway_model)})
        run = run.model_copy(update={"scenario": scenario})
    scene = scene or build_t_intersection(run.scenario)
    out_dir = prepare_output(args.out)

    record, trace = simulate_episode(run, planner, args.seed, scene, record_diagnostics=args.diagnostics)
    files = write_trace(trace, out_dir, args.diagnostics)

    sys.stdout.write(json.dumps(record.to_row(), default=str) + "\n")
    for event in trace.events:
        sys.stdout.write(f"  {event.time:8.2f} s  {event.name} {event.detail}\n")
    logger.info(f"Trace written: {', '.join(str(f) for f in files)}")
    return 0


def run_sweep_command(args) -> int:
    spec = SweepSpec.from_profile(
        args.profile,
        planners=args.planner,
        lambdas=args.lam,
        p_values=args.p,
        bt_values=args.bt,
        runs=args.runs,
        base_seed=args.seed,
        headway_model=args.headway_model,
    )
    summary = run_sweep(spec, args.out, scenario_file=args.scenario, workers=args.workers)
    sys.stdout.write(
        f"{summary.episodes} episodes in {summary.cells} cells, {summary.crashes} crashes\n"
    )
    for name, path in sorted(summary.files.items()):
        sys.stdout.write(f"  {name}: {path}\n")
    return 0


def run_check_command(args) -> int:
    results = run_checks(FilePath(args.out), runs=args.runs, workers=args.workers, base_seed=args.seed)
    for result in results:
        sys.stdout.write(f"{'PASS' if result.passed else 'FAIL'}  {result.name}: {result.detail}\n")
    return 0 if all(r.passed for r in results) else EXIT_CHECK_FAILED


COMMANDS = {
    "episode": run_episode_command,
    "sweep": run_sweep_command,
    "check": run_check_command,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point of the `mergesim` console script."""
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        sys.stderr.write("\nStopped by user.\n")
        return EXIT_ERROR
    except Exception as e:
        sys.stderr.write(handle_error(e) + "\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
