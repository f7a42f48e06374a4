from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple, Union

from pydantic import BaseModel, Field, model_validator

from src.geometry.schemas import Path
from src.profiles.schemas import FixedProfile, PredictionConfig, RampProfile, Trajectory
from src.risk.schemas import BenefitWeights, RiskParams


class OptimizerConfig(BaseModel):
    k: int = Field(5, ge=1, description="Number of optimised double-ramp candidates")
    v_max: float = Field(12.0, gt=2.0, description="Maximum velocity (m/s)")
    seed_v_min: float = Field(2.0, ge=0, description="Lowest seed velocity (m/s)")
    a_min: float = Field(-4.0, lt=0, description="Minimum acceleration (m/s²)")
    a_max: float = Field(3.0, gt=0, description="Maximum acceleration (m/s²)")
    ramp_duration: float = Field(2.5, gt=0, description="Ramp duration s_d (s)")
    max_iterations: int = Field(100, ge=1, description="Simplex iterations per candidate and step")
    tolerance: float = Field(1e-3, gt=0, description="Simplex diameter tolerance (normalised)")
    penalty_weight: float = Field(1e6, ge=0, description="Constraint penalty weight (€ per unit)")
    box_weight: float = Field(1.0, ge=0, description="Penalty for leaving the parameter box (€)")
    conflict_clearance: float = Field(
        5.0, ge=0, description="Distance past the conflict point a committed merge must reach (m)"
    )

    @model_validator(mode="after")
    def check_seed_range(self):
        if self.seed_v_min > self.v_max:
            raise ValueError("Error: seed_v_min must not exceed v_max.")
        return self


class RoptParams(BaseModel):
    prediction: PredictionConfig = Field(default_factory=PredictionConfig)
    risk: RiskParams = Field(default_factory=RiskParams)
    benefit: BenefitWeights = Field(default_factory=BenefitWeights)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)


@dataclass(frozen=True)
class PlanningScene:
    """Ego route with stop line and conflict point as route arclengths (m)."""
    route: Path
    stop_line: Optional[float] = None
    conflict_point: Optional[float] = None


@dataclass(frozen=True)
class PlannerState:
    active_candidate: Optional[int] = None
    active_params: Optional[Tuple[float, float, float]] = None
    active_profile: Optional[RampProfile] = None
    offset: float = 0.0

    def advanced(self, elapsed: float) -> "PlannerState":
        if self.active_candidate is None:
            return self
        return replace(self, offset=self.offset + elapsed)


@dataclass(frozen=True)
class CandidateDiagnostic:
    index: int
    kind: str
    params: Optional[Tuple[float, float, float]]
    risk: float
    benefit: float
    cost: float
    penalty: float
    iterations: int = 0

    @property
    def total(self) -> float:
        return self.cost + self.penalty


@dataclass(frozen=True)
class PlanResult:
    selected: int
    trajectory: Trajectory
    profile: Union[RampProfile, FixedProfile]
    state: PlannerState
    diagnostics: List[CandidateDiagnostic] = field(default_factory=list)

    @property
    def selected_diagnostic(self) -> CandidateDiagnostic:
        return self.diagnostics[self.selected]
