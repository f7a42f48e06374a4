from pathlib import Path as FilePath
from typing import Dict, Optional, Tuple

import numpy as np

from src.common.custom_exceptions import InvalidInputError
from src.common.logger import setup_logger
from src.geometry.loader import dump_path_set, load_model
from src.geometry.schemas import Path
from src.geometry.service import DISCRETIZATION_STEP, build_path, find_intersection
from src.sim.schemas import RunConfig, Scene, ScenarioConfig, ScenarioFile

logger = setup_logger(__name__)


def t_intersection_points(config: ScenarioConfig,
                          step: float = DISCRETIZATION_STEP) -> Dict[str, np.ndarray]:
    """
    Ego turn path and main road sampled at `step` or finer.

    The ego drives north on x = -r, turns right on a quarter circle around
    (0, -r) and joins the main road (y = 0, heading east) at the origin.
    """
    r = config.turn_radius
    approach_n = int(np.ceil(config.approach_length / step))
    approach_y = np.linspace(-(r + config.approach_length), -r, approach_n + 1)
    approach = np.column_stack((np.full_like(approach_y, -r), approach_y))

    arc_n = int(np.ceil(0.5 * np.pi * r / step))
    angles = np.linspace(np.pi, 0.5 * np.pi, arc_n + 1)[1:]
    arc = np.column_stack((r * np.cos(angles), -r + r * np.sin(angles)))
    arc[-1] = (0.0, 0.0)

    main_length = config.upstream_length + config.downstream_length
    main_n = int(np.ceil(main_length / step))
    main_x = np.linspace(-config.upstream_length, config.downstream_length, main_n + 1)
    main = np.column_stack((main_x, np.zeros_like(main_x)))

    return {"ego": np.vstack((approach, arc)), "main": main}


def build_scene(paths: Dict[str, Path], config: ScenarioConfig) -> Scene:
    """Joins the ego turn path with the main road downstream of their crossing."""
    turn, main = paths["ego"], paths["main"]
    crossing = find_intersection(turn, main)
    if crossing is None:
        raise InvalidInputError("Ego path does not reach the main road.")

    ahead = main.cumulative_arclength > crossing.arclength_b + 1e-6
    head = turn.points[turn.cumulative_arclength <= crossing.arclength_a + 1e-9]
    route = build_path(np.vstack((head, main.points[ahead])), name="route")
    intersection = find_intersection(route, main)
    if intersection is None:
        raise InvalidInputError("Route does not meet the main road.")

    if not 0.0 <= config.stop_line < intersection.arclength_a:
        raise InvalidInputError(
            f"Stop line {config.stop_line:.1f} m must lie before the conflict point "
            f"at {intersection.arclength_a:.1f} m."
        )
    despawn = min(intersection.arclength_b + config.despawn_distance, main.length)
    return Scene(
        turn=turn,
        main=main,
        route=route,
        intersection=intersection,
        stop_line=config.stop_line,
        spawn_main=0.0,
        despawn_main=despawn,
    )


def build_t_intersection(config: Optional[ScenarioConfig] = None) -> Scene:
    config = config or ScenarioConfig()
    points = t_intersection_points(config)
    paths = {name: build_path(pts, name=name) for name, pts in points.items()}
    return build_scene(paths, config)


def load_scenario_file(file_path: str | FilePath) -> Tuple[Scene, RunConfig]:
    scenario = load_model(ScenarioFile, file_path)
    run = scenario.run_config()
    scene = build_scene(scenario.build(), run.scenario)
    logger.info(
        f"Loaded scenario {file_path}: conflict point at {scene.conflict_point:.2f} m",
        extra={"event": "scenario_loaded"},
    )
    return scene, run


def dump_scenario_file(file_path: str | FilePath, config: Optional[ScenarioConfig] = None,
                       run: Optional[dict] = None) -> ScenarioFile:
    """Writes the analytic T-intersection (or any config's geometry) as a scenario file."""
    config = config or ScenarioConfig()
    points = t_intersection_points(config)
    scenario = ScenarioFile(
        paths={name: [tuple(p) for p in pts.tolist()] for name, pts in points.items()},
        config=config,
        run=run or {},
    )
    dump_path_set(scenario, file_path)
    return scenario
