import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from src.geometry.loader import PathSet
from src.geometry.schemas import IntersectionPoint, Path
from src.idm.schemas import IdmParams, IidmParams
from src.ropt.schemas import RoptParams


class PlannerKind(str, Enum):
    ROPT = "ropt"
    IIDM = "iidm"
    PREDICTIVE_IIDM = "predictive_iidm"


class EpisodeStatus(str, Enum):
    COMPLETED = "completed"
    CRASH = "crash"
    TIMEOUT = "timeout"
    ABORTED = "aborted"


class HeadwayModel(str, Enum):
    UNIFORM = "uniform"     # λ + U(-noise, noise)
    POISSON = "poisson"     # Poisson(λ) + U(-noise, noise)


class ScenarioConfig(BaseModel):
    # traffic
    traffic_speed: float = Field(10.0, gt=0, description="Cross-traffic speed v_f (m/s)")
    mean_headway: float = Field(3.0, gt=0, description="Mean headway λ (s)")
    headway_model: HeadwayModel = Field(HeadwayModel.UNIFORM, description="Headway distribution around λ")
    noise: float = Field(0.5, ge=0, description="Uniform headway noise half-width (s)")
    min_headway: float = Field(1.0, gt=0, description="Headways are truncated here (s)")
    headways: Optional[List[float]] = Field(
        None, description="Explicit headway sequence (s); the last value repeats"
    )
    first_arrival: Optional[float] = Field(
        None, description="Time the first car reaches the conflict point (s); random if unset"
    )
    seed: int = Field(0, description="Traffic seed")

    # geometry of the analytic T-intersection
    approach_length: float = Field(40.0, gt=0, description="Straight approach before the turn (m)")
    turn_radius: float = Field(10.0, gt=0, description="Radius of the 90° right turn (m)")
    upstream_length: float = Field(150.0, gt=0, description="Main road before the conflict point (m)")
    downstream_length: float = Field(150.0, gt=0, description="Main road after the conflict point (m)")
    despawn_distance: float = Field(100.0, gt=0, description="Cars leave this far past the conflict point (m)")
    stop_line: float = Field(40.0, ge=0, description="Stop line as arclength on the ego path (m)")
    start_before_stop_line: float = Field(2.0, ge=0, description="Ego start distance before the stop line (m)")
    start_velocity: float = Field(0.0, ge=0, description="Ego start velocity (m/s)")

    # episode
    dt: float = Field(0.1, gt=0, description="Simulation step δt (s)")
    timeout: float = Field(120.0, gt=0, description="Episode timeout (s)")
    crash_distance: float = Field(1.0, gt=0, description="Crash threshold (m)")
    completion_hold: float = Field(3.0, gt=0, description="Merge completion hold time (s)")
    completion_tolerance: float = Field(0.5, ge=0, description="Speed and distance tolerance for completion")

    @field_validator("headways")
    def validate_headways(cls, v: Optional[List[float]]):
        if v is not None:
            if not v:
                raise ValueError("Error: headways must not be empty.")
            if any(h <= 0 for h in v):
                raise ValueError("Error: headways must be positive.")
        return v

    @model_validator(mode="after")
    def check_noise(self):
        if self.headways is None and self.mean_headway <= self.noise:
            raise ValueError("Error: mean_headway must exceed the noise half-width.")
        return self


class RunConfig(BaseModel):
    """All model parameters of one episode; loadable from the scenario file."""
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    idm: IdmParams = Field(default_factory=IdmParams)
    iidm: IidmParams = Field(default_factory=IidmParams)
    ropt: RoptParams = Field(default_factory=RoptParams)


class ScenarioFile(PathSet):
    """
    Scenario JSON: the path set ("ego" turn path and "main" road) plus
    optional scenario config and run overrides::

        {"paths": {"ego": [...], "main": [...]},
         "config": {"traffic_speed": 10.0, "stop_line": 40.0, ...},
         "run": {"idm": {...}, "iidm": {...}, "ropt": {...}}}
    """
    config: ScenarioConfig = Field(default_factory=ScenarioConfig)
    run: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("paths")
    def require_named_paths(cls, v):
        missing = {"ego", "main"} - set(v)
        if missing:
            raise ValueError(f"Error: scenario paths missing {sorted(missing)}.")
        return v

    def run_config(self) -> RunConfig:
        return RunConfig.model_validate({**self.run, "scenario": self.config.model_dump()})


@dataclass(frozen=True)
class Scene:
    """Built scenario geometry. Arclengths are on the route unless named *_main."""
    turn: Path
    main: Path
    route: Path
    intersection: IntersectionPoint   # route (a) x main (b)
    stop_line: float
    spawn_main: float
    despawn_main: float

    @property
    def conflict_point(self) -> float:
        return self.intersection.arclength_a

    @property
    def conflict_main(self) -> float:
        return self.intersection.arclength_b


@dataclass(frozen=True)
class SpawnEvent:
    spawn_time: float     # s, car at the spawn point
    arrival_time: float   # s, car at the conflict point
    path_id: str
    velocity: float


class EpisodeRecord(BaseModel):
    seed: int
    planner: PlannerKind
    lam: float
    param: float
    status: EpisodeStatus
    merged: bool
    crash: bool
    d_back_min: Optional[float] = None
    d_front_min: Optional[float] = None
    n_gap: Optional[int] = None
    t_gap: Optional[float] = None
    merge_start_time: Optional[float] = None
    merge_end_time: Optional[float] = None
    duration: float = 0.0
    error: Optional[str] = None

    @property
    def starved(self) -> bool:
        return self.status is EpisodeStatus.TIMEOUT

    def to_row(self) -> Dict[str, Any]:
        """Flat CSV row; infinite gaps stay float('inf')."""
        row = self.model_dump()
        row["planner"] = self.planner.value
        row["status"] = self.status.value
        return row


@dataclass(frozen=True)
class TraceEvent:
    time: float
    name: str
    detail: str = ""


@dataclass
class EpisodeTrace:
    times: List[float] = field(default_factory=list)
    ego_longitudinal: List[float] = field(default_factory=list)
    ego_velocity: List[float] = field(default_factory=list)
    ego_acceleration: List[float] = field(default_factory=list)
    min_distance: List[float] = field(default_factory=list)
    events: List[TraceEvent] = field(default_factory=list)
    diagnostics: List[Dict[str, Any]] = field(default_factory=list)

    def add_event(self, time: float, name: str, detail: str = "") -> None:
        self.events.append(TraceEvent(time=round(time, 9), name=name, detail=detail))

    def event_names(self) -> List[str]:
        return [event.name for event in self.events]

    def first(self, name: str) -> Optional[TraceEvent]:
        return next((event for event in self.events if event.name == name), None)

    def has_sequence(self, names: List[str]) -> bool:
        """True if the events contain `names` in this order (not necessarily adjacent)."""
        position = 0
        for event in self.events:
            if position < len(names) and event.name == names[position]:
                position += 1
        return position == len(names)


def finite_or_none(value: float) -> Optional[float]:
    return None if value is None or not math.isfinite(value) else value
