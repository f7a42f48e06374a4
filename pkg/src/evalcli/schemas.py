import zlib
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator

from src.sim.schemas import HeadwayModel, PlannerKind

PROFILES: Dict[str, Dict] = {
    "desk": {
        "runs": 50,
        "lambdas": [2.0, 3.5, 5.0],
        "p_values": [0.5, 1.0, 4.0],
        "bt_values": [0.1, 1.0, 10.0],
        "headway_model": "poisson",
        # coarser ROPT search for desk-sized runs
        "ropt_optimizer": {"k": 3, "max_iterations": 40, "tolerance": 1e-2},
    },
    "paper": {
        "runs": 200,
        "lambdas": [2.0, 3.0, 4.0, 5.0],
        "p_values": [0.5, 1.0, 2.0, 3.0, 4.0],
        "bt_values": [0.1, 1.0, 5.0, 10.0],
        "headway_model": "poisson",
    },
}
PROFILE_ALIASES = {"full": "paper"}


class SweepSpec(BaseModel):
    planners: List[PlannerKind] = Field(
        default_factory=lambda: list(PlannerKind), description="Planners to sweep"
    )
    lambdas: List[float] = Field(default_factory=lambda: [2.0, 3.5, 5.0], description="Mean headways λ (s)")
    p_values: List[float] = Field(default_factory=lambda: [0.5, 1.0, 4.0], description="IIDM politeness p")
    bt_values: List[float] = Field(
        default_factory=lambda: [0.1, 1.0, 10.0], description="ROPT travel benefit b^t (€/km)"
    )
    runs: int = Field(50, ge=1, description="Episodes per cell")
    base_seed: int = Field(0, description="Base seed")
    headway_model: Optional[HeadwayModel] = Field(None, description="Headway distribution; None keeps the scenario's")
    ropt_optimizer: Dict[str, Any] = Field(default_factory=dict, description="Overrides of the ROPT optimizer config")

    @field_validator("planners", "lambdas", "p_values", "bt_values")
    def validate_non_empty(cls, v: list):
        if not v:
            raise ValueError("Error: sweep value lists must not be empty.")
        return v

    @field_validator("lambdas")
    def validate_lambdas(cls, v: List[float]):
        if any(lam <= 0 for lam in v):
            raise ValueError("Error: λ values must be positive.")
        return v

    @classmethod
    def from_profile(cls, name: Literal["desk", "paper", "full"], **overrides) -> "SweepSpec":
        name = PROFILE_ALIASES.get(name, name)
        if name not in PROFILES:
            raise ValueError(f"Error: unknown sweep profile '{name}'.")
        values = {**PROFILES[name], **{k: v for k, v in overrides.items() if v is not None}}
        return cls(**values)

    def parameters_for(self, planner: PlannerKind) -> List[float]:
        return self.bt_values if planner is PlannerKind.ROPT else self.p_values

    def cells(self) -> List["Cell"]:
        return [
            Cell(planner=planner, lam=lam, param=param)
            for planner in self.planners
            for lam in self.lambdas
            for param in self.parameters_for(planner)
        ]


@dataclass(frozen=True)
class Cell:
    planner: PlannerKind
    lam: float
    param: float

    @property
    def key(self) -> str:
        return f"{self.planner.value}|{self.lam!r}|{self.param!r}"

    def seed(self, base_seed: int, run: int) -> int:
        """Stable per-cell seed, independent of which other cells are swept."""
        return base_seed + zlib.crc32(self.key.encode("utf-8")) + run


class CellStats(BaseModel):
    planner: PlannerKind
    lam: float
    param: float
    runs: int
    d_back_mean: Optional[float] = Field(None, description="Mean d_back_min over safe merges (m)")
    d_front_mean: Optional[float] = Field(None, description="Mean d_front_min over safe merges (m)")
    d_back_lower: Optional[float] = Field(None, description="Lower bound of d_back_min over runs (m)")
    n_gap_mean: Optional[float] = None
    t_gap_mean: Optional[float] = Field(None, description="Mean taken gap (s)")
    crash_rate: float = Field(..., ge=0, le=1)
    starvation_rate: float = Field(..., ge=0, le=1)


@dataclass(frozen=True)
class SweepSummary:
    out_dir: FilePath
    episodes: int
    cells: int
    crashes: int
    files: Dict[str, FilePath]
