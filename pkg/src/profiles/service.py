from typing import Sequence, Tuple, Union

import numpy as np

from src.common.custom_exceptions import DomainError, InvalidInputError
from src.geometry.schemas import Path, PathPose
from src.geometry.service import ARCLENGTH_TOLERANCE, poses_along
from src.profiles.schemas import (
    FixedKind,
    FixedProfile,
    PredictionConfig,
    Ramp,
    RampProfile,
    Trajectory,
)

VelocityProfile = Union[RampProfile, FixedProfile]

STOP_ANCHOR_FACTOR = 0.5     # s per m/s, stop anchor at v0 / 2
ACCELERATE_RATE = 2.0        # m/s^2


def velocity_at(profile: VelocityProfile, s: float) -> float:
    if s < 0 or not np.isfinite(s):
        raise DomainError(f"Profile time must be >= 0, got {s}.")
    return float(profile.velocities(np.array([s]))[0])


def make_ramp_profile(v0: float, end_velocities: Sequence[float], starts: Sequence[float],
                      ramp_duration: float) -> RampProfile:
    """Builds a fresh ramp profile (offset 0) from end velocities and start times."""
    if len(end_velocities) != len(starts) or len(starts) < 2:
        raise InvalidInputError("A ramp profile needs two or more ramps with matching starts.")
    if ramp_duration <= 0:
        raise InvalidInputError(f"Ramp duration must be positive, got {ramp_duration}.")
    ramps = tuple(
        Ramp(start=float(s), end_velocity=float(v), duration=ramp_duration)
        for s, v in zip(starts, end_velocities)
    )
    return RampProfile(v0=float(v0), ramps=ramps)


def constant_profile(v0: float) -> FixedProfile:
    return FixedProfile(kind=FixedKind.CONSTANT, v0=v0)


def stop_profile(v0: float) -> FixedProfile:
    return FixedProfile(kind=FixedKind.STOP, v0=v0,
                        anchor_time=STOP_ANCHOR_FACTOR * v0, anchor_velocity=0.0)


def accelerate_profile(v0: float, v_max: float) -> FixedProfile:
    anchor = max(v_max - v0, 0.0) / ACCELERATE_RATE
    return FixedProfile(kind=FixedKind.ACCELERATE, v0=v0,
                        anchor_time=anchor, anchor_velocity=max(v_max, v0))


def rollout(profile: VelocityProfile, path: Path, l0: float, config: PredictionConfig,
            sigma_lon0: float = None, sigma_lat0: float = None) -> Trajectory:
    """
    Integrates a velocity profile along `path` from arclength l0.

    l[k+1] = l[k] + v[k]·Δs and σ_lon[k+1] = σ_lon[k] + c·v[k]·Δs;
    σ_lat stays at its initial value. Positions past the path end continue
    straight along the last heading.
    """
    if not np.isfinite(l0) or l0 < -ARCLENGTH_TOLERANCE or l0 > path.length + ARCLENGTH_TOLERANCE:
        raise DomainError(f"Start arclength {l0:.3f} m outside path '{path.name}'.")
    sigma_lon0 = config.sigma_lon0 if sigma_lon0 is None else sigma_lon0
    sigma_lat0 = config.sigma_lat0 if sigma_lat0 is None else sigma_lat0

    dt = config.dt
    n = config.steps
    times = np.arange(n + 1) * dt
    velocity = profile.velocities(times)

    step = velocity[:-1] * dt
    longitudinal = np.cumsum(np.concatenate(([float(l0)], step)))
    sigma_lon = np.cumsum(np.concatenate(([float(sigma_lon0)], config.growth * step)))
    sigma_lat = np.full(n + 1, float(sigma_lat0))

    acceleration, jerk = _differences(velocity, dt)
    poses = poses_along(path, longitudinal)

    return Trajectory(
        dt=dt,
        times=times,
        longitudinal=longitudinal,
        velocity=velocity,
        acceleration=acceleration,
        jerk=jerk,
        x=poses.x,
        y=poses.y,
        heading=poses.heading,
        curvature=poses.curvature,
        sigma_lon=sigma_lon,
        sigma_lat=sigma_lat,
        path_id=path.name,
    )


def _differences(velocity: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    # forward differences, last entry padded by repetition
    acceleration = np.empty_like(velocity)
    acceleration[:-1] = np.diff(velocity) / dt
    acceleration[-1] = acceleration[-2]
    jerk = np.empty_like(velocity)
    jerk[:-1] = np.diff(acceleration) / dt
    jerk[-1] = 0.0
    return acceleration, jerk


def extrapolate_other(path: Path, pose: PathPose, velocity: float,
                      config: PredictionConfig) -> Trajectory:
    """Constant-velocity prediction of another road user along its path."""
    return rollout(constant_profile(max(float(velocity), 0.0)), path, pose.longitudinal, config)
