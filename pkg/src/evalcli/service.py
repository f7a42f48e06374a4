import asyncio
import math
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from functools import lru_cache
from pathlib import Path as FilePath
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.common.custom_exceptions import ContractViolationError, OutputPathError
from src.common.decorators import monitor_run
from src.common.logger import setup_logger
from src.common.settings import get_settings
from src.evalcli.schemas import Cell, CellStats, SweepSpec, SweepSummary
from src.sim.scenario import build_t_intersection, load_scenario_file
from src.sim.schemas import (
    EpisodeRecord,
    EpisodeStatus,
    PlannerKind,
    RunConfig,
    Scene,
    ScenarioConfig,
)
from src.sim.service import run_episode

logger = setup_logger(__name__)

EPISODE_COLUMNS = list(EpisodeRecord.model_fields)
PLOT_COLUMNS = ["indicator", "planner", "lambda", "param", "value"]
RISK_INDICATORS = ["d_back_mean", "d_front_mean", "d_back_lower", "crash_rate"]
UTILITY_INDICATORS = ["n_gap_mean", "t_gap_mean", "starvation_rate"]

EPISODES_FILE = "episodes.csv"
CELLS_FILE = "cells.csv"
RISK_FILE = "risk_indicators.csv"
UTILITY_FILE = "utility_indicators.csv"


def sweep_run_config(run: RunConfig, spec: SweepSpec) -> RunConfig:
    """Run config with the sweep-wide traffic model and optimizer overrides applied."""
    data = run.model_dump()
    if spec.headway_model is not None:
        data["scenario"]["headway_model"] = spec.headway_model
    data["ropt"]["optimizer"].update(spec.ropt_optimizer)
    return RunConfig.model_validate(data)


def cell_run_config(run: RunConfig, cell: Cell) -> RunConfig:
    """Run config with the cell's λ and behaviour parameter applied."""
    data = run.model_dump()
    data["scenario"]["mean_headway"] = cell.lam
    if cell.planner is PlannerKind.ROPT:
        data["ropt"]["benefit"]["travel_per_km"] = cell.param
    else:
        data["iidm"]["p"] = cell.param
    return RunConfig.model_validate(data)


@lru_cache(maxsize=8)
def _scene(scenario_file: Optional[str], config_json: str) -> Scene:
    if scenario_file is not None:
        return load_scenario_file(scenario_file)[0]
    return build_t_intersection(ScenarioConfig.model_validate_json(config_json))


def _episode_job(run_json: str, scenario_file: Optional[str], planner: str, lam: float,
                 param: float, seed: int) -> dict:
    """One seeded episode; module-level so worker processes can import it."""
    cell = Cell(planner=PlannerKind(planner), lam=lam, param=param)
    run = cell_run_config(RunConfig.model_validate_json(run_json), cell)
    scene = _scene(scenario_file, run.scenario.model_dump_json())
    return run_episode(run, cell.planner, seed, scene).to_row()


def _timed_out(planner: str, lam: float, param: float, seed: int, timeout: float) -> dict:
    return EpisodeRecord(
        seed=seed, planner=PlannerKind(planner), lam=lam, param=param,
        status=EpisodeStatus.ABORTED, merged=False, crash=False,
        error=f"worker timed out after {timeout:.0f} s",
    ).to_row()


async def _run_jobs(jobs: List[tuple], workers: int, timeout: float) -> List[dict]:
    """Bounded fan-out; results come back in submission order."""
    semaphore = asyncio.Semaphore(workers)
    loop = asyncio.get_running_loop()
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else nullcontext()

    with pool as executor:
        async def bounded(job: tuple) -> dict:
            async with semaphore:
                try:
                    return await asyncio.wait_for(
                        loop.run_in_executor(executor, _episode_job, *job), timeout=timeout
                    )
                except (asyncio.TimeoutError, TimeoutError):
                    _, _, planner, lam, param, seed = job
                    logger.error(
                        f"Episode {planner} seed={seed} timed out",
                        extra={"planner": planner, "seed": seed, "status": "aborted"},
                    )
                    return _timed_out(planner, lam, param, seed, timeout)

        return await asyncio.gather(*(bounded(job) for job in jobs))


def prepare_output(out_dir: Union[str, FilePath]) -> FilePath:
    out_dir = FilePath(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / EPISODES_FILE).open("a", encoding="utf-8"):
            pass
    except OSError as e:
        raise OutputPathError(f"{out_dir}: {e}") from e
    return out_dir


@monitor_run
def run_sweep(spec: SweepSpec, out_dir: Union[str, FilePath], scenario_file: Optional[str] = None,
              workers: Optional[int] = None, timeout: Optional[float] = None) -> SweepSummary:
    """
    Runs every (planner, λ, parameter) cell of the sweep and writes
    episodes.csv, cells.csv and the plot-data files into `out_dir`.
    """
    settings = get_settings()
    out_dir = prepare_output(out_dir)
    workers = max(1, workers or settings.WORKERS)
    timeout = timeout or settings.EPISODE_TIMEOUT_SECONDS

    if scenario_file is not None:
        _, run = load_scenario_file(scenario_file)
        scenario_file = str(FilePath(scenario_file).resolve())
    else:
        run = RunConfig()
    run = sweep_run_config(run, spec)
    run_json = run.model_dump_json()

    cells = spec.cells()
    jobs = [
        (run_json, scenario_file, cell.planner.value, cell.lam, cell.param, cell.seed(spec.base_seed, i))
        for cell in cells
        for i in range(spec.runs)
    ]
    logger.info(
        f"Sweep: {len(cells)} cells x {spec.runs} runs on {workers} worker(s)",
        extra={"event": "sweep_start"},
    )
    rows = asyncio.run(_run_jobs(jobs, workers, timeout))

    episodes = pd.DataFrame(rows, columns=EPISODE_COLUMNS)
    episodes.to_csv(out_dir / EPISODES_FILE, index=False)

    stats = [
        aggregate(episodes.iloc[i * spec.runs:(i + 1) * spec.runs])
        for i in range(len(cells))
    ]
    write_cells(stats, out_dir / CELLS_FILE)
    files = emit_plotdata(stats, out_dir)
    files.update({"episodes": out_dir / EPISODES_FILE, "cells": out_dir / CELLS_FILE})

    return SweepSummary(
        out_dir=out_dir,
        episodes=len(episodes),
        cells=len(stats),
        crashes=int(episodes["crash"].sum()),
        files=files,
    )


def _frame(rows: Union[pd.DataFrame, Sequence[Union[EpisodeRecord, dict]]]) -> pd.DataFrame:
    if isinstance(rows, pd.DataFrame):
        return rows
    records = [r.to_row() if isinstance(r, EpisodeRecord) else r for r in rows]
    return pd.DataFrame(records, columns=EPISODE_COLUMNS)


def _mean(series: pd.Series) -> Optional[float]:
    values = pd.to_numeric(series, errors="coerce").astype(float)
    values = values[np.isfinite(values)]
    return float(values.mean()) if len(values) else None


def aggregate(rows: Union[pd.DataFrame, Sequence[Union[EpisodeRecord, dict]]]) -> CellStats:
    """
    Cell statistics. Distance and gap means use merged runs without crash;
    the d_back lower bound counts a crash as distance 0; rates use all runs.
    """
    frame = _frame(rows)
    if frame.empty:
        raise ContractViolationError("Cannot aggregate an empty set of episodes.")

    crash = frame["crash"].astype(bool)
    merged = frame["merged"].astype(bool)
    safe = frame[merged & ~crash]
    n = len(frame)

    back = pd.to_numeric(safe["d_back_min"], errors="coerce").dropna().tolist()
    bounds = back + [0.0] * int(crash.sum())
    first = frame.iloc[0]
    return CellStats(
        planner=PlannerKind(first["planner"]),
        lam=float(first["lam"]),
        param=float(first["param"]),
        runs=n,
        d_back_mean=_mean(safe["d_back_min"]),
        d_front_mean=_mean(safe["d_front_min"]),
        d_back_lower=float(min(bounds)) if bounds else None,
        n_gap_mean=_mean(safe["n_gap"]),
        t_gap_mean=_mean(safe["t_gap"]),
        crash_rate=float(crash.sum()) / n,
        starvation_rate=float((frame["status"] == EpisodeStatus.TIMEOUT.value).sum()) / n,
    )


def write_cells(stats: Iterable[CellStats], file_path: FilePath) -> None:
    frame = pd.DataFrame([s.model_dump(mode="json") for s in stats])
    frame.to_csv(file_path, index=False)


def _long_format(stats: Sequence[CellStats], indicators: List[str]) -> pd.DataFrame:
    rows = [
        {"indicator": name, "planner": s.planner.value, "lambda": s.lam, "param": s.param,
         "value": getattr(s, name)}
        for name in indicators
        for s in stats
    ]
    return pd.DataFrame(rows, columns=PLOT_COLUMNS)


def emit_plotdata(stats: Sequence[CellStats], out_dir: Union[str, FilePath]) -> Dict[str, FilePath]:
    """Long-format CSVs (indicator, planner, lambda, param, value) for any plotting tool."""
    out_dir = FilePath(out_dir)
    files = {"risk": out_dir / RISK_FILE, "utility": out_dir / UTILITY_FILE}
    try:
        _long_format(stats, RISK_INDICATORS).to_csv(files["risk"], index=False)
        _long_format(stats, UTILITY_INDICATORS).to_csv(files["utility"], index=False)
    except OSError as e:
        raise OutputPathError(f"{out_dir}: {e}") from e
    return files


def load_episode_rows(file_path: Union[str, FilePath]) -> List[EpisodeRecord]:
    frame = pd.read_csv(file_path, float_precision="round_trip")
    frame = frame.astype(object).where(frame.notna(), None)
    return [EpisodeRecord.model_validate(row) for row in frame.to_dict(orient="records")]


def load_cell_stats(file_path: Union[str, FilePath]) -> List[CellStats]:
    frame = pd.read_csv(file_path, float_precision="round_trip")
    frame = frame.astype(object).where(frame.notna(), None)
    return [CellStats.model_validate(row) for row in frame.to_dict(orient="records")]


def is_finite(value: Optional[float]) -> bool:
    return value is not None and math.isfinite(value)
