from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.common.custom_exceptions import ContractViolationError
from src.profiles.schemas import Trajectory


class LateralAccelMode(str, Enum):
    DYNAMICS = "dynamics"   # a_y = κ·v²
    LITERAL = "literal"     # a_y = √(|κ|·v)


class DamageMode(str, Enum):
    INCREASING = "increasing"   # D_max / (1 + exp(−k(v − β)))
    LITERAL = "literal"         # D_max / (1 + exp(k(v − β)))


class DamageChannel(BaseModel):
    d_max: float = Field(..., ge=0, description="Saturation damage D_max (€)")
    k: float = Field(0.5, ge=0, description="Logistic steepness (s/m)")
    beta: float = Field(..., description="Logistic midpoint speed (m/s)")


class RiskParams(BaseModel):
    escape_rate: float = Field(0.2, ge=0, description="Constant escape rate τ0⁻¹ (1/s)")
    a_y_max: float = Field(4.0, gt=0, description="Maximum lateral acceleration (m/s²)")
    sigma_curve: float = Field(0.5, gt=0, description="Curve uncertainty σ_1 (m/s²)")
    collision: DamageChannel = Field(
        default_factory=lambda: DamageChannel(d_max=5e3, k=0.5, beta=8.0),
        description="Collision damage channel",
    )
    curve: DamageChannel = Field(
        default_factory=lambda: DamageChannel(d_max=5e3, k=0.5, beta=12.0),
        description="Curve damage channel",
    )
    event_interval: Optional[float] = Field(
        None, gt=0, description="Event interval Δt (s); defaults to the prediction step"
    )
    lateral_accel_mode: LateralAccelMode = LateralAccelMode.DYNAMICS
    damage_mode: DamageMode = DamageMode.INCREASING


class BenefitWeights(BaseModel):
    """Driver preferences; the travel weight is given in €/km and used in €/m."""
    travel_per_km: float = Field(1.0, ge=0, description="Travel benefit b^t (€/km)")
    comfort: float = Field(1e-4, ge=0, description="Acceleration weight b^c (€·s/m)")
    jerk: float = Field(1e-5, ge=0, description="Jerk weight b^j (€·s²/m)")

    @property
    def travel(self) -> float:
        return self.travel_per_km / 1000.0


def covariance_terms(heading, sigma_lon, sigma_lat) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Entries (xx, yy, xy) of the rotated position covariance, elementwise."""
    c, s = np.cos(heading), np.sin(heading)
    lon2, lat2 = np.square(sigma_lon), np.square(sigma_lat)
    xx = c * c * lon2 + s * s * lat2
    yy = s * s * lon2 + c * c * lat2
    xy = c * s * (lon2 - lat2)
    return xx, yy, xy


@dataclass(frozen=True)
class UncertaintyEllipse:
    mean: tuple        # (x, y) m
    sigma_lon: float   # m
    sigma_lat: float   # m
    heading: float     # rad

    def __post_init__(self):
        if not (self.sigma_lon >= self.sigma_lat > 0.0):
            raise ContractViolationError(
                f"Ellipse needs sigma_lon >= sigma_lat > 0, got {self.sigma_lon}, {self.sigma_lat}."
            )

    @property
    def covariance(self) -> np.ndarray:
        c, s = np.cos(self.heading), np.sin(self.heading)
        rotation = np.array([[c, -s], [s, c]])
        return rotation @ np.diag([self.sigma_lon ** 2, self.sigma_lat ** 2]) @ rotation.T


@dataclass(frozen=True, eq=False)
class TrafficPrediction:
    """Predicted trajectories of other cars stacked as (M, n + 1) arrays."""
    dt: float
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    velocity: np.ndarray
    sigma_lon: np.ndarray
    sigma_lat: np.ndarray

    @property
    def count(self) -> int:
        return int(self.x.shape[0])

    @property
    def steps(self) -> int:
        return int(self.x.shape[1]) - 1

    @cached_property
    def covariance_terms(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        # shared by every candidate evaluated against this prediction
        return covariance_terms(self.heading, self.sigma_lon, self.sigma_lat)

    @classmethod
    def stack(cls, trajectories: Sequence[Trajectory], dt: float, steps: int) -> "TrafficPrediction":
        for trajectory in trajectories:
            if trajectory.steps != steps or not np.isclose(trajectory.dt, dt):
                raise ContractViolationError(
                    f"Trajectory '{trajectory.path_id}' has {trajectory.steps} steps of "
                    f"{trajectory.dt} s, expected {steps} steps of {dt} s."
                )

        def gather(name: str) -> np.ndarray:
            if not trajectories:
                return np.empty((0, steps + 1))
            return np.vstack([getattr(t, name) for t in trajectories])

        return cls(
            dt=dt,
            x=gather("x"),
            y=gather("y"),
            heading=gather("heading"),
            velocity=gather("velocity"),
            sigma_lon=gather("sigma_lon"),
            sigma_lat=gather("sigma_lat"),
        )


@dataclass(frozen=True, eq=False)
class RiskBreakdown:
    """Per-interval terms (n entries, left end points) and the scalar integrals in €."""
    p_coll: np.ndarray
    p_curv: np.ndarray
    rate_coll: np.ndarray
    rate_curv: np.ndarray
    survival: np.ndarray
    damage_coll: np.ndarray
    damage_curv: np.ndarray
    risk: float
    benefit: float
    cost: float
