from dataclasses import replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from src.common.custom_exceptions import ContractViolationError, EvaluationError
from src.profiles.schemas import Trajectory
from src.risk.schemas import (
    BenefitWeights,
    DamageChannel,
    DamageMode,
    LateralAccelMode,
    RiskBreakdown,
    RiskParams,
    TrafficPrediction,
    UncertaintyEllipse,
    covariance_terms,
)

Others = Union[Sequence[Trajectory], TrafficPrediction]

DET_FLOOR = 1e-18


def gaussian_overlap(dx, dy, heading_1, sigma_lon_1, sigma_lat_1,
                     heading_2, sigma_lon_2, sigma_lat_2) -> np.ndarray:
    """
    Closed-form integral of the product of two planar Gaussians,
    |2π(Σ1+Σ2)|^(−1/2)·exp(−½ dᵀ(Σ1+Σ2)⁻¹d), elementwise over broadcast arrays.
    Not clamped.
    """
    return _overlap(dx, dy, covariance_terms(heading_1, sigma_lon_1, sigma_lat_1),
                    covariance_terms(heading_2, sigma_lon_2, sigma_lat_2))


def _overlap(dx, dy, terms_1, terms_2) -> np.ndarray:
    xx, yy, xy = (t1 + t2 for t1, t2 in zip(terms_1, terms_2))
    det = xx * yy - xy * xy
    if np.any(det <= DET_FLOOR):
        raise EvaluationError("Combined position covariance is singular.")
    quad = (yy * dx * dx - 2.0 * xy * dx * dy + xx * dy * dy) / det
    return np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(det))


def collision_probability(e1: UncertaintyEllipse, e2: UncertaintyEllipse) -> float:
    dx = e2.mean[0] - e1.mean[0]
    dy = e2.mean[1] - e1.mean[1]
    value = gaussian_overlap(dx, dy, e1.heading, e1.sigma_lon, e1.sigma_lat,
                             e2.heading, e2.sigma_lon, e2.sigma_lat)
    return float(min(value, 1.0))


def lateral_acceleration(velocity, curvature, params: RiskParams):
    velocity = np.asarray(velocity, dtype=float)
    curvature = np.asarray(curvature, dtype=float)
    if params.lateral_accel_mode is LateralAccelMode.LITERAL:
        return np.sqrt(np.abs(curvature) * velocity)
    return curvature * velocity * velocity


def curve_probability(velocity, curvature, params: RiskParams):
    """Probability of exceeding the lateral acceleration limit; scalar in, scalar out."""
    a_y = lateral_acceleration(velocity, curvature, params)
    margin = np.maximum(params.a_y_max - np.abs(a_y), 0.0)
    sigma = params.sigma_curve
    value = np.exp(-margin ** 2 / (2.0 * sigma ** 2)) / np.sqrt(2.0 * np.pi * sigma ** 2)
    value = np.minimum(value, 1.0)
    return float(value) if np.ndim(value) == 0 else value


def damage(channel: str, relative_speed, params: RiskParams):
    """Logistic damage in € for channel "coll" or "curv"; scalar in, scalar out."""
    spec = _channel(channel, params)
    z = spec.k * (np.asarray(relative_speed, dtype=float) - spec.beta)
    if params.damage_mode is DamageMode.LITERAL:
        z = -z
    value = spec.d_max * expit(z)
    return float(value) if np.ndim(value) == 0 else value


def _channel(channel: str, params: RiskParams) -> DamageChannel:
    if channel == "coll":
        return params.collision
    if channel == "curv":
        return params.curve
    raise ContractViolationError(f"Unknown damage channel '{channel}'.")


def _as_prediction(ego: Trajectory, others: Others) -> TrafficPrediction:
    if isinstance(others, TrafficPrediction):
        if others.count and (others.steps != ego.steps or not np.isclose(others.dt, ego.dt)):
            raise ContractViolationError(
                f"Traffic prediction has {others.steps} steps of {others.dt} s, "
                f"ego has {ego.steps} steps of {ego.dt} s."
            )
        return others
    return TrafficPrediction.stack(list(others), ego.dt, ego.steps)


def evaluate_risk(ego: Trajectory, others: Others, params: RiskParams,
                  curvature: Optional[np.ndarray] = None) -> RiskBreakdown:
    """
    Risk integral R over the prediction horizon, summed over the n intervals
    [k·Δs, (k+1)·Δs) using their left end states. Benefit and cost of the
    returned breakdown are 0 and R; see `evaluate_trajectory`.
    """
    traffic = _as_prediction(ego, others)
    n, dt = ego.steps, ego.dt
    interval = params.event_interval or dt
    kappa = ego.curvature if curvature is None else np.asarray(curvature, dtype=float)
    if kappa.shape[0] < n:
        raise ContractViolationError("Curvature sequence shorter than the ego trajectory.")

    ego_v = ego.velocity[:n]
    if traffic.count:
        sl = slice(0, n)
        pairwise = _overlap(
            traffic.x[:, sl] - ego.x[sl], traffic.y[:, sl] - ego.y[sl],
            covariance_terms(ego.heading[sl], ego.sigma_lon[sl], ego.sigma_lat[sl]),
            tuple(term[:, sl] for term in traffic.covariance_terms),
        )
        pairwise = np.minimum(pairwise, 1.0)
        rel_vx = traffic.velocity[:, sl] * np.cos(traffic.heading[:, sl]) - ego_v * np.cos(ego.heading[sl])
        rel_vy = traffic.velocity[:, sl] * np.sin(traffic.heading[:, sl]) - ego_v * np.sin(ego.heading[sl])
        per_car_damage = damage("coll", np.hypot(rel_vx, rel_vy), params)

        total = pairwise.sum(axis=0)
        # probability-weighted damage across cars
        damage_coll = np.divide((pairwise * per_car_damage).sum(axis=0), total,
                                out=np.zeros(n), where=total > 0)
        p_coll = np.minimum(total, 1.0)
    else:
        p_coll = np.zeros(n)
        damage_coll = np.zeros(n)

    p_curv = np.asarray(curve_probability(ego_v, kappa[:n], params), dtype=float)
    damage_curv = np.asarray(damage("curv", np.abs(ego_v), params), dtype=float)

    rate_coll = p_coll / interval
    rate_curv = p_curv / interval
    rate_total = params.escape_rate + rate_coll + rate_curv
    survival = np.exp(-np.cumsum(rate_total * dt))

    risk = float(np.sum((rate_coll * damage_coll + rate_curv * damage_curv) * survival * dt))
    return RiskBreakdown(
        p_coll=p_coll,
        p_curv=p_curv,
        rate_coll=rate_coll,
        rate_curv=rate_curv,
        survival=survival,
        damage_coll=damage_coll,
        damage_curv=damage_curv,
        risk=risk,
        benefit=0.0,
        cost=risk,
    )


def evaluate_benefit(ego: Trajectory, survival: np.ndarray, weights: BenefitWeights) -> float:
    n = ego.steps
    survival = np.asarray(survival, dtype=float)
    if survival.shape[0] != n:
        raise ContractViolationError(f"Survival has {survival.shape[0]} entries, expected {n}.")
    gain = (weights.travel * np.abs(ego.velocity[:n])
            - weights.comfort * np.abs(ego.acceleration[:n])
            - weights.jerk * np.abs(ego.jerk[:n]))
    return float(np.sum(gain * survival * ego.dt))


def cost(risk: float, benefit: float) -> float:
    return risk - benefit


def evaluate_trajectory(ego: Trajectory, others: Others, params: RiskParams,
                        weights: BenefitWeights) -> RiskBreakdown:
    breakdown = evaluate_risk(ego, others, params)
    benefit = evaluate_benefit(ego, breakdown.survival, weights)
    return replace(breakdown, benefit=benefit, cost=cost(breakdown.risk, benefit))
