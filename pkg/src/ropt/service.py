from dataclasses import replace
from typing import List, Optional, Sequence, Union

import numpy as np

from src.common.custom_exceptions import DomainError, InvalidInputError
from src.common.logger import setup_logger
from src.geometry.service import pose_at
from src.profiles.schemas import FixedProfile, RampProfile, Trajectory, VehicleState
from src.profiles.service import (
    accelerate_profile,
    constant_profile,
    extrapolate_other,
    make_ramp_profile,
    rollout,
    stop_profile,
    velocity_at,
)
from src.risk.schemas import TrafficPrediction
from src.risk.service import evaluate_trajectory
from src.ropt.optimizer import nelder_mead
from src.ropt.schemas import (
    CandidateDiagnostic,
    OptimizerConfig,
    PlannerState,
    PlanningScene,
    PlanResult,
    RoptParams,
)

logger = setup_logger(__name__)

Profile = Union[RampProfile, FixedProfile]


def seed_velocities(config: OptimizerConfig) -> np.ndarray:
    return np.linspace(config.seed_v_min, config.v_max, config.k)


def candidate_profiles(v0: float, state: PlannerState, config: OptimizerConfig) -> List[Profile]:
    """
    k double-ramp seeds followed by the constant, stop and accelerate profiles.

    The seed of the previously selected ramp candidate is replaced by its
    last optimum, time-shifted by the planner offset. Once its first free
    ramp has been executed, a new ramp is inserted so two ramps stay
    adjustable.
    """
    if v0 < 0 or not np.isfinite(v0):
        raise InvalidInputError(f"Start velocity must be >= 0, got {v0}.")
    s_d = config.ramp_duration
    profiles: List[Profile] = []
    for j, v_seed in enumerate(seed_velocities(config)):
        if state.active_candidate == j and state.active_profile is not None:
            profile = replace(state.active_profile, offset=state.offset)
            if profile.penultimate_completed():
                profile = profile.rebased().with_inserted_ramp(s_d)
        else:
            profile = make_ramp_profile(v0, [v_seed, v_seed], [0.0, s_d], s_d)
        profiles.append(profile)

    profiles.append(constant_profile(v0))
    profiles.append(stop_profile(v0))
    profiles.append(accelerate_profile(v0, config.v_max))
    return profiles


def penalty(trajectory: Trajectory, config: OptimizerConfig,
            scene: Optional[PlanningScene] = None) -> float:
    """
    Constraint penalty in €: weight times the time-integrated violation of the
    velocity and acceleration limits. With a scene, a trajectory that starts
    before the stop line and crosses it without getting past the conflict
    point plus the clearance is penalised by the distance it falls short.
    """
    n = trajectory.steps
    v = trajectory.velocity[:n]
    a = trajectory.acceleration[:n]
    violation = (np.maximum(v - config.v_max, 0.0) + np.maximum(-v, 0.0)
                 + np.maximum(a - config.a_max, 0.0) + np.maximum(config.a_min - a, 0.0))
    total = float(np.sum(violation) * trajectory.dt)

    if scene is not None and scene.stop_line is not None and scene.conflict_point is not None:
        l = trajectory.longitudinal
        if l[0] <= scene.stop_line < l[-1]:
            shortfall = scene.conflict_point + config.conflict_clearance - l[-1]
            total += max(shortfall, 0.0)
    return config.penalty_weight * total


def predict_traffic(others: Sequence[VehicleState], params: RoptParams) -> TrafficPrediction:
    prediction = params.prediction
    trajectories = [
        extrapolate_other(other.path, pose_at(other.path, other.longitudinal), other.velocity, prediction)
        for other in others
    ]
    return TrafficPrediction.stack(trajectories, prediction.dt, prediction.steps)


def evaluate_candidate(profile: Profile, ego: VehicleState, traffic: TrafficPrediction,
                       scene: PlanningScene, params: RoptParams):
    trajectory = rollout(profile, scene.route, ego.longitudinal, params.prediction)
    breakdown = evaluate_trajectory(trajectory, traffic, params.risk, params.benefit)
    return trajectory, breakdown, penalty(trajectory, params.optimizer, scene)


class _RampObjective:
    """C + penalty of a ramp candidate as a function of normalised free parameters."""

    def __init__(self, profile: RampProfile, ego: VehicleState, traffic: TrafficPrediction,
                 scene: PlanningScene, params: RoptParams):
        self.profile = profile
        self.ego = ego
        self.traffic = traffic
        self.scene = scene
        self.params = params
        horizon = params.prediction.horizon
        v_max = params.optimizer.v_max
        self.scale = np.array([v_max, v_max, horizon])
        lower_s = max(profile.last_start_lower_bound(), 0.0) / horizon
        self.lower = np.array([0.0, 0.0, min(lower_s, 1.0)])
        self.upper = np.array([1.0, 1.0, 1.0])

    def initial_point(self) -> np.ndarray:
        return np.clip(np.array(self.profile.free_parameters()) / self.scale, self.lower, self.upper)

    def profile_at(self, x: np.ndarray) -> RampProfile:
        v_a, v_b, s_b = np.clip(x, self.lower, self.upper) * self.scale
        return self.profile.with_free_parameters(float(v_a), float(v_b), float(s_b))

    def __call__(self, x: np.ndarray) -> float:
        clipped = np.clip(x, self.lower, self.upper)
        outside = float(np.sum(np.abs(x - clipped)))
        _, breakdown, pen = evaluate_candidate(self.profile_at(clipped), self.ego, self.traffic,
                                               self.scene, self.params)
        return breakdown.cost + pen + self.params.optimizer.box_weight * outside


def plan_step(ego: VehicleState, others: Sequence[VehicleState], scene: PlanningScene,
              state: PlannerState, params: RoptParams) -> PlanResult:
    """Optimises the ramp candidates, evaluates the fixed ones and selects the cheapest."""
    try:
        pose_at(scene.route, ego.longitudinal)
    except DomainError as e:
        raise InvalidInputError(f"Ego is off its route: {e}") from e

    config = params.optimizer
    traffic = predict_traffic(others, params)
    profiles = candidate_profiles(ego.velocity, state, config)

    evaluated = []
    for index, profile in enumerate(profiles):
        iterations = 0
        if isinstance(profile, RampProfile):
            objective = _RampObjective(profile, ego, traffic, scene, params)
            result = nelder_mead(objective, objective.initial_point(),
                                 max_iterations=config.max_iterations, tolerance=config.tolerance)
            profile = objective.profile_at(result.x)
            iterations = result.iterations
            kind = "ramp"
            free = tuple(float(p) for p in profile.free_parameters())
        else:
            kind = profile.kind.value
            free = None
        trajectory, breakdown, pen = evaluate_candidate(profile, ego, traffic, scene, params)
        diagnostic = CandidateDiagnostic(
            index=index, kind=kind, params=free, risk=breakdown.risk, benefit=breakdown.benefit,
            cost=breakdown.cost, penalty=pen, iterations=iterations,
        )
        evaluated.append((profile, trajectory, diagnostic))

    totals = np.array([d.total for _, _, d in evaluated])
    selected = int(np.argmin(totals))  # first index on ties
    profile, trajectory, diagnostic = evaluated[selected]

    if isinstance(profile, RampProfile):
        offset = profile.offset if state.active_candidate == selected else 0.0
        new_state = PlannerState(active_candidate=selected, active_params=diagnostic.params,
                                 active_profile=replace(profile, offset=offset), offset=offset)
    else:
        offset = state.offset if state.active_candidate == selected else 0.0
        new_state = PlannerState(active_candidate=selected, offset=offset)

    if state.active_candidate is not None and state.active_candidate != selected:
        logger.debug(
            f"ROPT switched candidate {state.active_candidate} -> {selected} ({diagnostic.kind})",
            extra={"event": "candidate_switch", "planner": "ropt"},
        )
    return PlanResult(selected=selected, trajectory=trajectory, profile=profile,
                      state=new_state, diagnostics=[d for _, _, d in evaluated])


class RoptPlanner:
    """Stateful wrapper: replans every step and keeps the continuation state."""

    name = "ropt"

    def __init__(self, scene: PlanningScene, params: Optional[RoptParams] = None):
        self.scene = scene
        self.params = params or RoptParams()
        self.state = PlannerState()
        self.last_result: Optional[PlanResult] = None

    def plan(self, ego: VehicleState, others: Sequence[VehicleState]) -> PlanResult:
        result = plan_step(ego, others, self.scene, self.state, self.params)
        self.state = result.state
        self.last_result = result
        return result

    def advance(self, elapsed: float) -> None:
        self.state = self.state.advanced(elapsed)

    def command(self, ego: VehicleState, others: Sequence[VehicleState], dt: float) -> float:
        """Acceleration that reaches the selected profile's velocity after dt."""
        result = self.plan(ego, others)
        target = velocity_at(result.profile, dt)
        self.advance(dt)
        return (target - ego.velocity) / dt
