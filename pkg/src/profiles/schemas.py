from dataclasses import dataclass, replace
from enum import Enum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.geometry.schemas import Path


class PredictionConfig(BaseModel):
    horizon: float = Field(10.0, gt=0, description="Prediction horizon (s)")
    dt: float = Field(0.25, gt=0, description="Prediction step Δs (s)")
    sigma_lon0: float = Field(1.0, gt=0, description="Initial longitudinal std-dev (m)")
    sigma_lat0: float = Field(0.3, gt=0, description="Initial lateral std-dev (m)")
    growth: float = Field(0.04, ge=0, description="Velocity uncertainty factor c (unitless)")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class Ramp:
    start: float          # s, in the profile's own time frame
    end_velocity: float   # m/s
    duration: float       # s


@dataclass(frozen=True)
class RampProfile:
    """
    Piecewise-linear velocity course built from consecutive ramps.

    Ramp start times live in the profile's own frame (first ramp at 0). The
    offset is the time the profile has already been executed, so evaluation
    at prediction time s reads the course at s + offset.
    """
    v0: float
    ramps: Tuple[Ramp, ...]
    offset: float = 0.0

    def knots(self) -> Tuple[np.ndarray, np.ndarray]:
        times, values = [0.0], [self.v0]
        for ramp in self.ramps:
            start = max(ramp.start, times[-1])
            if start > times[-1]:
                times.append(start)
                values.append(values[-1])
            times.append(start + ramp.duration)
            values.append(ramp.end_velocity)
        return np.asarray(times), np.asarray(values)

    def velocities(self, times: np.ndarray) -> np.ndarray:
        knot_t, knot_v = self.knots()
        return np.maximum(np.interp(np.asarray(times, dtype=float) + self.offset, knot_t, knot_v), 0.0)

    def effective_starts(self) -> Tuple[float, ...]:
        """Ramp start times relative to now (prediction time 0)."""
        return tuple(ramp.start - self.offset for ramp in self.ramps)

    def shifted(self, elapsed: float) -> "RampProfile":
        return replace(self, offset=self.offset + elapsed)

    # --- continuation helpers ---

    def free_parameters(self) -> Tuple[float, float, float]:
        """(end velocity of the penultimate ramp, end velocity of the last ramp,
        start of the last ramp relative to now)."""
        penultimate, last = self.ramps[-2], self.ramps[-1]
        return penultimate.end_velocity, last.end_velocity, last.start - self.offset

    def with_free_parameters(self, v_a: float, v_b: float, s_b: float) -> "RampProfile":
        penultimate, last = self.ramps[-2], self.ramps[-1]
        earliest = penultimate.start + penultimate.duration
        ramps = self.ramps[:-2] + (
            replace(penultimate, end_velocity=v_a),
            replace(last, end_velocity=v_b, start=max(s_b + self.offset, earliest)),
        )
        return replace(self, ramps=ramps)

    def last_start_lower_bound(self) -> float:
        """Earliest relative start of the last ramp (end of the penultimate one)."""
        penultimate = self.ramps[-2]
        return penultimate.start + penultimate.duration - self.offset

    def penultimate_completed(self) -> bool:
        penultimate = self.ramps[-2]
        return self.offset >= penultimate.start + penultimate.duration - 1e-9

    def with_inserted_ramp(self, ramp_duration: float) -> "RampProfile":
        """
        Keeps two adjustable ramps ahead once the penultimate ramp has been
        executed: a new ramp goes after the last ramp if that one starts within
        one ramp duration from now, otherwise it goes in front of it.
        The velocity course is unchanged by the insertion.
        """
        last = self.ramps[-1]
        if last.start - self.offset < ramp_duration:
            new = Ramp(start=last.start + last.duration, end_velocity=last.end_velocity,
                       duration=ramp_duration)
            ramps = self.ramps + (new,)
        else:
            now_velocity = float(self.velocities(np.array([0.0]))[0])
            new = Ramp(start=self.offset, end_velocity=now_velocity, duration=ramp_duration)
            ramps = self.ramps[:-1] + (new, last)
        return replace(self, ramps=ramps)

    def rebased(self) -> "RampProfile":
        """Folds fully executed leading ramps into v0, keeping two or more ramps."""
        profile = self
        while len(profile.ramps) > 2:
            first = profile.ramps[0]
            end = first.start + first.duration
            if end > profile.offset:
                break
            # the second ramp may be clipped to start at `end`, which is now 0
            rest = tuple(replace(r, start=r.start - end) for r in profile.ramps[1:])
            profile = RampProfile(v0=first.end_velocity, ramps=rest, offset=profile.offset - end)
        return profile


class FixedKind(str, Enum):
    CONSTANT = "constant"
    STOP = "stop"
    ACCELERATE = "accelerate"


@dataclass(frozen=True)
class FixedProfile:
    """Constant velocity, or a linear change from v0 to an anchor (s, v) held afterwards."""
    kind: FixedKind
    v0: float
    anchor_time: float = 0.0       # s_b or s_a
    anchor_velocity: float = 0.0   # v_b = 0 or v_a

    def velocities(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.kind is FixedKind.CONSTANT:
            return np.full(times.shape, max(self.v0, 0.0))
        if self.anchor_time <= 0.0:
            return np.full(times.shape, max(self.anchor_velocity, 0.0))
        values = np.interp(times, [0.0, self.anchor_time], [self.v0, self.anchor_velocity])
        return np.maximum(values, 0.0)


@dataclass(frozen=True)
class TrajectoryState:
    time: float
    longitudinal: float
    velocity: float
    acceleration: float
    jerk: float
    position: Tuple[float, float]
    heading: float
    curvature: float
    sigma_lon: float
    sigma_lat: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Predicted states at times 0, Δs, ..., n·Δs. Each array has n + 1 entries;
    step k covers the interval [k·Δs, (k+1)·Δs).
    """
    dt: float
    times: np.ndarray
    longitudinal: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    jerk: np.ndarray
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    curvature: np.ndarray
    sigma_lon: np.ndarray
    sigma_lat: np.ndarray
    path_id: str = ""

    @property
    def steps(self) -> int:
        return int(self.times.shape[0]) - 1

    @property
    def horizon(self) -> float:
        return self.steps * self.dt

    def state(self, index: int) -> TrajectoryState:
        return TrajectoryState(
            time=float(self.times[index]),
            longitudinal=float(self.longitudinal[index]),
            velocity=float(self.velocity[index]),
            acceleration=float(self.acceleration[index]),
            jerk=float(self.jerk[index]),
            position=(float(self.x[index]), float(self.y[index])),
            heading=float(self.heading[index]),
            curvature=float(self.curvature[index]),
            sigma_lon=float(self.sigma_lon[index]),
            sigma_lat=float(self.sigma_lat[index]),
        )

    @property
    def states(self):
        return [self.state(i) for i in range(self.steps + 1)]


@dataclass(frozen=True)
class VehicleState:
    """A vehicle on a path: arclength (m), velocity (m/s), acceleration (m/s²)."""
    path: Path
    longitudinal: float
    velocity: float
    acceleration: float = 0.0
