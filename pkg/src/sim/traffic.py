from itertools import chain, repeat
from typing import Iterator, List, Optional

import numpy as np

from src.sim.schemas import HeadwayModel, ScenarioConfig, SpawnEvent


def headway_stream(config: ScenarioConfig, rng: np.random.Generator) -> Iterator[float]:
    """
    Explicit headways (last one repeated) or noisy headways around λ truncated
    at the minimum. The uniform model draws λ + U(-noise, noise); the Poisson
    model draws an integer Poisson(λ) headway and adds the same uniform offset.
    """
    if config.headways:
        return chain(config.headways, repeat(config.headways[-1]))
    if config.headway_model is HeadwayModel.POISSON:
        return (
            max(rng.poisson(config.mean_headway) + rng.uniform(-config.noise, config.noise),
                config.min_headway)
            for _ in repeat(None)
        )
    return (
        max(config.mean_headway + rng.uniform(-config.noise, config.noise), config.min_headway)
        for _ in repeat(None)
    )


def generate_traffic(config: ScenarioConfig, seed: Optional[int] = None,
                     until: Optional[float] = None, main_path: str = "main") -> List[SpawnEvent]:
    """
    Cross traffic as spawn events, ordered by time. Cars spawn `upstream_length`
    before the conflict point. Unless `first_arrival` is set, the first car is
    placed so the road is already populated at t = 0.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    until = config.timeout if until is None else until
    v = config.traffic_speed
    to_conflict = config.upstream_length / v
    headways = headway_stream(config, rng)

    if config.first_arrival is not None:
        arrival = config.first_arrival
    else:
        phase = config.headways[0] if config.headways else config.mean_headway
        arrival = -config.despawn_distance / v + rng.uniform(0.0, phase)

    events = []
    while arrival - to_conflict <= until:
        events.append(SpawnEvent(spawn_time=arrival - to_conflict, arrival_time=arrival,
                                 path_id=main_path, velocity=v))
        arrival += float(next(headways))
    return events
