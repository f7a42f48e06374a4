import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np

from src.common.custom_exceptions import PlannerFailureError
from src.common.decorators import monitor_run
from src.common.logger import setup_logger
from src.geometry.service import pose_at, poses_along
from src.profiles.schemas import VehicleState
from src.sim.controllers import make_controller
from src.sim.scenario import build_t_intersection
from src.sim.schemas import (
    EpisodeRecord,
    EpisodeStatus,
    EpisodeTrace,
    PlannerKind,
    RunConfig,
    Scene,
    finite_or_none,
)
from src.sim.traffic import generate_traffic

logger = setup_logger(__name__)

# a braking ego that ends this close past the stop line is held on it
STOP_LINE_SNAP = 0.05


def gap_accounting(arrivals: Sequence[float], merge_start: Optional[float],
                   crossing_time: float) -> Tuple[int, float]:
    """
    Gaps are the headways between consecutive arrivals at the conflict point.

    n_gap counts gaps that closed after the episode start and no later than
    `merge_start`, the moment the ego committed to its merge. t_gap is the gap
    the ego actually enters, i.e. the one containing `crossing_time`. Before
    the first arrival the gap is open (inf) and is not counted.
    """
    merge_start = crossing_time if merge_start is None else min(merge_start, crossing_time)
    times = np.sort(np.asarray(arrivals, dtype=float))
    ends = times[1:]
    n_gap = int(np.count_nonzero((ends > 0.0) & (ends <= merge_start)))
    index = int(np.searchsorted(times, crossing_time, side="right"))
    if index == 0 or index >= times.size:
        return n_gap, math.inf
    return n_gap, float(times[index] - times[index - 1])


def front_and_back(distances: np.ndarray, arrivals: np.ndarray, crossing_time: float) -> Tuple[float, float]:
    """
    Smallest distances to the cars in front and behind. A car is in front when
    it passes the conflict point no later than the ego; everything after the
    ego's crossing is behind.
    """
    front = arrivals <= crossing_time
    d_front = float(distances[front].min()) if front.any() else math.inf
    d_back = float(distances[~front].min()) if (~front).any() else math.inf
    return d_front, d_back


def behaviour_parameter(run: RunConfig, planner: PlannerKind) -> float:
    if planner is PlannerKind.ROPT:
        return run.ropt.benefit.travel_per_km
    return run.iidm.p


@monitor_run(level=logging.DEBUG)
def simulate_episode(run: RunConfig, planner: PlannerKind, seed: Optional[int] = None,
                     scene: Optional[Scene] = None,
                     record_diagnostics: bool = False) -> Tuple[EpisodeRecord, EpisodeTrace]:
    """
    Runs one merge-in episode at a fixed step and returns its record and trace.

    Cross traffic is non-reactive at constant velocity. The ego is controlled
    by the chosen planner and integrated semi-implicitly
    (v <- max(0, v + a·δt), then l <- l + v·δt).

    Distances to other cars count from the merge start on (the merge decision,
    or passing the stop line for ROPT) and are split into front and back by
    whether the car passes the conflict point before or after the ego.
    """
    config = run.scenario
    seed = config.seed if seed is None else seed
    scene = scene or build_t_intersection(config)
    traffic_config = config.model_copy(update={
        "upstream_length": scene.conflict_main - scene.spawn_main,
        "despawn_distance": scene.despawn_main - scene.conflict_main,
    })
    spawns = generate_traffic(traffic_config, seed, until=config.timeout)
    spawn_times = np.array([s.spawn_time for s in spawns])
    car_speed = np.array([s.velocity for s in spawns])
    arrivals = np.array([s.arrival_time for s in spawns])
    closest = np.full(len(spawns), math.inf)

    controller = make_controller(planner, scene, run, record_diagnostics)
    trace = EpisodeTrace()
    dt = config.dt
    l = config.stop_line - config.start_before_stop_line
    v = config.start_velocity

    status = None
    error = None
    merge_start = None
    crossing_time = None
    merge_end = None
    hold_start, hold_front, hold_back = None, math.inf, math.inf
    stopped_flagged = False

    def traffic_at(t: float) -> Tuple[np.ndarray, np.ndarray]:
        positions = scene.spawn_main + car_speed * (t - spawn_times)
        return (spawn_times <= t + 1e-9) & (positions <= scene.despawn_main), positions

    steps = int(round(config.timeout / dt))
    t = 0.0
    for k in range(steps):
        t = k * dt
        active, positions = traffic_at(t)
        ego = VehicleState(scene.route, l, v)
        traffic = [VehicleState(scene.main, float(p), float(s))
                   for p, s in zip(positions[active], car_speed[active])]

        try:
            output = controller.command(ego, traffic, dt)
            if not math.isfinite(output.accel):
                raise PlannerFailureError(f"{planner.value} returned a non-finite command at t={t:.1f} s.")
        except PlannerFailureError as e:
            status, error = EpisodeStatus.ABORTED, str(e)
            logger.error(str(e), extra={"planner": planner.value, "seed": seed, "status": "aborted",
                                        "error_type": type(e).__name__})
            break

        for name in output.events:
            trace.add_event(t, name)
            if name == "merge_decision" and crossing_time is None:
                merge_start = t
        for row in output.diagnostics:
            trace.diagnostics.append({"time": round(t, 9), **row})

        before = l
        v = max(0.0, v + output.accel * dt)
        l = min(l + v * dt, scene.route.length)
        if (output.accel <= 0.0 and v * dt <= STOP_LINE_SNAP
                and before <= scene.stop_line < l <= scene.stop_line + STOP_LINE_SNAP):
            l, v = scene.stop_line, 0.0
        t = (k + 1) * dt

        trace.times.append(round(t, 9))
        trace.ego_longitudinal.append(l)
        trace.ego_velocity.append(v)
        trace.ego_acceleration.append(output.accel)

        # geometry of the new state
        active, positions = traffic_at(t)
        distances = np.full(len(spawns), math.inf)
        if active.any():
            ego_pose = pose_at(scene.route, l)
            cars = poses_along(scene.main, positions[active])
            distances[active] = np.hypot(cars.x - ego_pose.world_position[0],
                                         cars.y - ego_pose.world_position[1])
        nearest = float(distances.min()) if distances.size else math.inf
        trace.min_distance.append(nearest)

        if before <= scene.stop_line < l:
            trace.add_event(t, "passed_stop_line")
            if planner is PlannerKind.ROPT:
                merge_start = t
        if before <= scene.conflict_point < l:
            crossing_time = t
            trace.add_event(t, "crossed_conflict_point")

        if merge_start is not None and l > scene.stop_line:
            np.minimum(closest, distances, out=closest)

        if nearest < config.crash_distance:
            status = EpisodeStatus.CRASH
            trace.add_event(t, "crash", f"distance {nearest:.2f} m")
            break

        in_conflict_zone = scene.stop_line < l < scene.conflict_point + config.crash_distance
        if v == 0.0 and in_conflict_zone:
            if not stopped_flagged:
                trace.add_event(t, "stopped_in_conflict_zone")
                stopped_flagged = True
        else:
            stopped_flagged = False

        # completion: matched into the flow with stable neighbour distances
        tol = config.completion_tolerance
        if crossing_time is not None and abs(v - config.traffic_speed) < tol:
            d_front, d_back = front_and_back(distances, arrivals, crossing_time)
            if hold_start is None or d_front < hold_front - tol or d_back < hold_back - tol:
                hold_start, hold_front, hold_back = t, d_front, d_back
            elif t - hold_start >= config.completion_hold - 1e-9:
                status, merge_end = EpisodeStatus.COMPLETED, t
                trace.add_event(t, "merge_complete")
                break
        else:
            hold_start = None

        if l >= scene.route.length and crossing_time is not None:
            status, merge_end = EpisodeStatus.COMPLETED, t
            trace.add_event(t, "merge_complete", "end of route")
            break

    if status is None:
        status = EpisodeStatus.TIMEOUT
        trace.add_event(t, "timeout")

    d_front_min, d_back_min = front_and_back(closest, arrivals, t if crossing_time is None else crossing_time)
    n_gap, t_gap = None, None
    if crossing_time is not None:
        n_gap, t_gap = gap_accounting(arrivals, merge_start, crossing_time)

    record = EpisodeRecord(
        seed=seed,
        planner=planner,
        lam=config.mean_headway,
        param=behaviour_parameter(run, planner),
        status=status,
        merged=status is EpisodeStatus.COMPLETED,
        crash=status is EpisodeStatus.CRASH,
        d_back_min=finite_or_none(d_back_min),
        d_front_min=finite_or_none(d_front_min),
        n_gap=n_gap,
        t_gap=t_gap,
        merge_start_time=merge_start,
        merge_end_time=merge_end,
        duration=round(t, 9),
        error=error,
    )
    logger.info(
        f"Episode {planner.value} seed={seed}: {status.value}",
        extra={"planner": planner.value, "seed": seed, "status": status.value, "event": "episode"},
    )
    return record, trace


def run_episode(run: RunConfig, planner: PlannerKind, seed: Optional[int] = None,
                scene: Optional[Scene] = None) -> EpisodeRecord:
    record, _ = simulate_episode(run, planner, seed, scene)
    return record
