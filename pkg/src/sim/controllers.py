from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence

from src.common.custom_exceptions import EvaluationError, PlannerFailureError
from src.idm.service import IidmDriver
from src.profiles.schemas import VehicleState
from src.ropt.schemas import PlanningScene
from src.ropt.service import RoptPlanner
from src.sim.schemas import PlannerKind, RunConfig, Scene


@dataclass
class ControlOutput:
    accel: float
    events: List[str] = field(default_factory=list)
    diagnostics: List[Dict[str, Any]] = field(default_factory=list)


class RoptController:
    kind = PlannerKind.ROPT

    def __init__(self, scene: Scene, run: RunConfig, record_diagnostics: bool = False):
        planning = PlanningScene(route=scene.route, stop_line=scene.stop_line,
                                 conflict_point=scene.conflict_point)
        self.planner = RoptPlanner(planning, run.ropt)
        self.record_diagnostics = record_diagnostics

    def command(self, ego: VehicleState, traffic: Sequence[VehicleState], dt: float) -> ControlOutput:
        try:
            accel = self.planner.command(ego, traffic, dt)
        except EvaluationError as e:
            raise PlannerFailureError(f"ROPT evaluation failed: {e}") from e
        rows = []
        if self.record_diagnostics and self.planner.last_result is not None:
            result = self.planner.last_result
            for d in result.diagnostics:
                rows.append({
                    "candidate": d.index, "kind": d.kind, "selected": d.index == result.selected,
                    "v_a": d.params[0] if d.params else None,
                    "v_b": d.params[1] if d.params else None,
                    "s_b": d.params[2] if d.params else None,
                    "risk": d.risk, "benefit": d.benefit, "cost": d.cost, "penalty": d.penalty,
                    "iterations": d.iterations,
                })
        return ControlOutput(accel=accel, diagnostics=rows)


class IidmController:
    def __init__(self, scene: Scene, run: RunConfig, predictive: bool):
        # the forward check integrates with the simulator's own step
        iidm = run.iidm.model_copy(update={"predictive": predictive, "dt": min(run.iidm.dt, run.scenario.dt)})
        self.kind = PlannerKind.PREDICTIVE_IIDM if predictive else PlannerKind.IIDM
        self.driver = IidmDriver(scene.route, scene.intersection, scene.stop_line, run.idm, iidm)

    def command(self, ego: VehicleState, traffic: Sequence[VehicleState], dt: float) -> ControlOutput:
        command = self.driver.step(ego, traffic)
        return ControlOutput(accel=command.accel, events=list(command.events))


def make_controller(kind: PlannerKind, scene: Scene, run: RunConfig, record_diagnostics: bool = False):
    if kind is PlannerKind.ROPT:
        return RoptController(scene, run, record_diagnostics)
    return IidmController(scene, run, predictive=kind is PlannerKind.PREDICTIVE_IIDM)
