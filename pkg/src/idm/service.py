import math
from dataclasses import replace
from typing import Optional, Sequence, Tuple

from src.common.custom_exceptions import DomainError, InvalidInputError
from src.common.logger import setup_logger
from src.geometry.schemas import IntersectionPoint, Path
from src.geometry.service import max_curvature_ahead, project_onto
from src.idm.schemas import DriverCommand, DriverPhase, IdmParams, IidmDecision, IidmParams
from src.profiles.schemas import VehicleState

logger = setup_logger(__name__)

MIN_GAP = 0.1  # m, gaps are clamped here once vehicles overlap


def idm_accel(v_f: float, v_l: Optional[float], d: Optional[float], params: IdmParams,
              v_c: Optional[float] = None) -> float:
    """Free term, minus the interaction term when a leader at gap d exists."""
    v_c = params.v_c if v_c is None else v_c
    free = params.a * (1.0 - (max(v_f, 0.0) / v_c) ** params.delta)
    if v_l is None or d is None:
        return free
    if d <= 0:
        raise DomainError(f"Gap to leader must be positive, got {d:.3f} m.")
    desired = params.d_0 + v_f * params.T + v_f * (v_f - v_l) / (2.0 * math.sqrt(params.a * params.b))
    return free - params.a * (desired / d) ** 2


def curve_cruise_velocity(path: Path, l: float, params: IdmParams) -> float:
    l = min(max(l, 0.0), path.length)
    kappa_max, found = max_curvature_ahead(path, l, params.kappa_th)
    if not found:
        return params.v_c
    return min(params.v_c, math.sqrt(params.a_y / kappa_max))


def stop_maneuver(v: float, distance: float, floor: float = -4.0) -> float:
    """Constant deceleration that stops exactly after `distance`, never below `floor`."""
    if distance > 0:
        return max(-(v * v) / (2.0 * distance), floor)
    return floor if v > 0 else 0.0


def neighbours(traffic: Sequence[VehicleState], l: float) -> Tuple[Optional[VehicleState], Optional[VehicleState]]:
    """(follower, leader) around arclength l on the traffic's path."""
    follower, leader = None, None
    for car in traffic:
        if car.longitudinal > l:
            if leader is None or car.longitudinal < leader.longitudinal:
                leader = car
        elif follower is None or car.longitudinal > follower.longitudinal:
            follower = car
    return follower, leader


def iidm_decide(driver: VehicleState, traffic: Sequence[VehicleState],
                intersection: Optional[IntersectionPoint], stop_line: float,
                idm: IdmParams, iidm: IidmParams) -> IidmDecision:
    """
    Merge decision by projecting the driver onto the other path.

    The driver is moved along its distance to the intersection onto the other
    path, then compared against a stop maneuver (incentive) and checked for the
    follower's deceleration (safety). `traffic` holds the vehicles on the
    other path; `stop_line` is an arclength on the driver's path.
    """
    if intersection is None:
        raise InvalidInputError("Driver path and traffic path do not intersect.")
    d_i = intersection.arclength_a - driver.longitudinal
    if d_i > iidm.projection_window:
        raise DomainError(
            f"Driver is {d_i:.1f} m before the intersection, outside the "
            f"{iidm.projection_window:.1f} m projection window."
        )

    v = driver.velocity
    cruise = curve_cruise_velocity(driver.path, driver.longitudinal, idm)
    projected = project_onto(intersection, driver.longitudinal)
    follower, leader = neighbours(traffic, projected)

    if leader is not None:
        a_d_tilde = idm_accel(v, leader.velocity, max(leader.longitudinal - projected, MIN_GAP), idm, cruise)
    else:
        a_d_tilde = idm_accel(v, None, None, idm, cruise)
    a_d = stop_maneuver(v, stop_line - driver.longitudinal, iidm.stop_decel_floor)

    if follower is not None:
        a_f_tilde = idm_accel(follower.velocity, v, max(projected - follower.longitudinal, MIN_GAP), idm)
        a_f = follower.acceleration
        follower_gain = a_f_tilde - a_f
        safe = a_f_tilde >= iidm.b_safe
    else:
        a_f_tilde, a_f, follower_gain, safe = None, 0.0, 0.0, True

    incentive = a_d_tilde - a_d + iidm.p * follower_gain
    merge = incentive > iidm.delta_a_th and safe
    return IidmDecision(
        merge=merge,
        accel=a_d_tilde if merge else a_d,
        incentive=incentive,
        safe=safe,
        a_d_tilde=a_d_tilde,
        a_d=a_d,
        a_f_tilde=a_f_tilde,
        a_f=a_f,
        cruise_velocity=cruise,
    )


def predictive_iidm_decide(driver: VehicleState, traffic: Sequence[VehicleState],
                           intersection: Optional[IntersectionPoint], stop_line: float,
                           idm: IdmParams, iidm: IidmParams) -> IidmDecision:
    """
    Merges only if both criteria hold at every step of a forward simulation:
    the driver follows its merge acceleration along its path, the others keep
    their velocity. Returns the decision at the current step with the merge
    flag of the whole horizon.
    """
    steps = int(round(iidm.horizon / iidm.dt))
    l, v = driver.longitudinal, driver.velocity
    first = None
    for k in range(steps + 1):
        t = k * iidm.dt
        predicted = [replace(car, longitudinal=car.longitudinal + car.velocity * t) for car in traffic]
        decision = iidm_decide(replace(driver, longitudinal=l, velocity=v), predicted,
                               intersection, stop_line, idm, iidm)
        if first is None:
            first = decision
        if not decision.merge:
            return replace(first, merge=False, accel=first.a_d)
        v = max(0.0, v + decision.a_d_tilde * iidm.dt)
        l = min(l + v * iidm.dt, driver.path.length)
    return first


class IidmDriver:
    """
    Ego driver for the merge-in: approaches the stop line, waits for a gap,
    commits to a merge, then follows on the main road. The plain driver
    re-checks safety while merging and may brake inside the conflict zone;
    the predictive driver keeps its commitment.
    """

    def __init__(self, route: Path, intersection: IntersectionPoint, stop_line: float,
                 idm: Optional[IdmParams] = None, iidm: Optional[IidmParams] = None):
        self.route = route
        self.intersection = intersection
        self.stop_line = stop_line
        self.idm = idm or IdmParams()
        self.iidm = iidm or IidmParams()
        self.phase = DriverPhase.APPROACH
        self.name = "predictive_iidm" if self.iidm.predictive else "iidm"
        self._curve_flagged = False

    @property
    def conflict_point(self) -> float:
        return self.intersection.arclength_a

    def _decide(self, ego: VehicleState, traffic: Sequence[VehicleState]) -> IidmDecision:
        decide = predictive_iidm_decide if self.iidm.predictive else iidm_decide
        return decide(ego, traffic, self.intersection, self.stop_line, self.idm, self.iidm)

    def step(self, ego: VehicleState, traffic: Sequence[VehicleState]) -> DriverCommand:
        events = []
        # on the main road there is nothing left to wait for, whatever the phase
        if self.phase is not DriverPhase.MERGED and ego.longitudinal >= self.conflict_point:
            self.phase = DriverPhase.MERGED

        if self.phase is DriverPhase.MERGED:
            return DriverCommand(accel=self._follow(ego, traffic), phase=self.phase)

        if self.phase is DriverPhase.APPROACH:
            if self.conflict_point - ego.longitudinal > self.iidm.projection_window:
                cruise = curve_cruise_velocity(self.route, ego.longitudinal, self.idm)
                # stationary obstacle d_0 past the stop line
                gap = max(self.stop_line + self.idm.d_0 - ego.longitudinal, MIN_GAP)
                return DriverCommand(accel=idm_accel(ego.velocity, 0.0, gap, self.idm, cruise),
                                     phase=self.phase)
            self.phase = DriverPhase.WAITING

        if self.phase is DriverPhase.WAITING:
            decision = self._decide(ego, traffic)
            if decision.merge:
                self.phase = DriverPhase.MERGING
                events.append("merge_decision")
                logger.debug(
                    f"{self.name} merge decision at l={ego.longitudinal:.2f} m",
                    extra={"event": "merge_decision", "planner": self.name},
                )
                self._flag_curve(decision, events)
            return DriverCommand(accel=decision.accel, phase=self.phase, events=events, decision=decision)

        # merging: committed. The plain driver brakes when the safety criterion
        # breaks; the predictive one already checked the whole horizon.
        decision = iidm_decide(ego, traffic, self.intersection, self.stop_line, self.idm, self.iidm)
        if not decision.safe and not self.iidm.predictive:
            self.phase = DriverPhase.WAITING
            events.append("safety_brake")
            return DriverCommand(accel=decision.a_d, phase=self.phase, events=events, decision=decision)
        self._flag_curve(decision, events)
        return DriverCommand(accel=decision.a_d_tilde, phase=self.phase, events=events, decision=decision)

    def _flag_curve(self, decision: IidmDecision, events: list) -> None:
        if not self._curve_flagged and decision.cruise_velocity < self.idm.v_c:
            self._curve_flagged = True
            events.append("curve_limited")

    def _follow(self, ego: VehicleState, traffic: Sequence[VehicleState]) -> float:
        cruise = curve_cruise_velocity(self.route, ego.longitudinal, self.idm)
        position = project_onto(self.intersection, ego.longitudinal)
        _, leader = neighbours(traffic, position)
        if leader is None:
            return idm_accel(ego.velocity, None, None, self.idm, cruise)
        return idm_accel(ego.velocity, leader.velocity, max(leader.longitudinal - position, MIN_GAP),
                         self.idm, cruise)
