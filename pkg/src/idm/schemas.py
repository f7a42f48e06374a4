from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field


class IdmParams(BaseModel):
    a: float = Field(2.0, gt=0, description="Maximum acceleration (m/s²)")
    b: float = Field(2.0, gt=0, description="Desired deceleration (m/s²)")
    delta: float = Field(4.0, ge=1, description="Acceleration exponent")
    v_c: float = Field(12.0, gt=0, description="Cruising velocity (m/s)")
    d_0: float = Field(2.0, gt=0, description="Minimal distance (m)")
    T: float = Field(1.5, gt=0, description="Time headway (s)")
    a_y: float = Field(4.0, gt=0, description="Maximum lateral acceleration in curves (m/s²)")
    kappa_th: float = Field(0.05, gt=0, description="Curvature threshold (1/m)")


class IidmParams(BaseModel):
    p: float = Field(0.5, ge=0, description="Politeness factor")
    delta_a_th: float = Field(0.1, description="Incentive threshold Δa_th (m/s²)")
    b_safe: float = Field(-2.0, lt=0, description="Safe deceleration b_s (m/s²)")
    projection_window: float = Field(
        30.0, gt=0, description="Distance before the intersection where projection is active (m)"
    )
    stop_decel_floor: float = Field(-4.0, lt=0, description="Strongest stop deceleration (m/s²)")
    predictive: bool = Field(False, description="Check both criteria over a predicted horizon")
    horizon: float = Field(10.0, gt=0, description="Predictive horizon (s)")
    dt: float = Field(0.25, gt=0, description="Predictive step (s)")


class DriverPhase(str, Enum):
    APPROACH = "approach"
    WAITING = "waiting"
    MERGING = "merging"
    MERGED = "merged"


@dataclass(frozen=True)
class IidmDecision:
    merge: bool
    accel: float
    incentive: float
    safe: bool
    a_d_tilde: float
    a_d: float
    a_f_tilde: Optional[float]
    a_f: float
    cruise_velocity: float


@dataclass
class DriverCommand:
    accel: float
    phase: DriverPhase
    events: List[str] = field(default_factory=list)
    decision: Optional[IidmDecision] = None
