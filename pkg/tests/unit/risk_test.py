import math
from unittest.mock import patch

import numpy as np
import pytest
from scipy.integrate import dblquad

from src.common.custom_exceptions import ContractViolationError, EvaluationError
from src.profiles.schemas import PredictionConfig
from src.profiles.service import constant_profile, rollout
from src.risk.schemas import (
    BenefitWeights,
    DamageMode,
    LateralAccelMode,
    RiskParams,
    TrafficPrediction,
    UncertaintyEllipse,
    covariance_terms,
)
from src.risk.service import (
    collision_probability,
    cost,
    curve_probability,
    damage,
    evaluate_benefit,
    evaluate_risk,
    evaluate_trajectory,
    gaussian_overlap,
)


def _density_product(e1: UncertaintyEllipse, e2: UncertaintyEllipse) -> float:
    inv1, inv2 = np.linalg.inv(e1.covariance), np.linalg.inv(e2.covariance)
    norm = 1.0 / (4 * np.pi ** 2 * np.sqrt(np.linalg.det(e1.covariance) * np.linalg.det(e2.covariance)))
    m1, m2 = np.asarray(e1.mean), np.asarray(e2.mean)

    def integrand(y, x):
        p = np.array([x, y])
        return norm * np.exp(-0.5 * (p - m1) @ inv1 @ (p - m1) - 0.5 * (p - m2) @ inv2 @ (p - m2))

    value, _ = dblquad(integrand, -12.0, 12.0, -12.0, 12.0, epsabs=1e-14, epsrel=1e-10)
    return value


class TestCollisionProbability:

    def test_matches_quadrature(self):
        """Closed form equals the numerically integrated product of the two densities."""
        rng = np.random.default_rng(3)
        for _ in range(5):
            s = np.sort(rng.uniform(0.5, 2.0, size=(2, 2)), axis=1)[:, ::-1]
            e1 = UncertaintyEllipse((0.0, 0.0), s[0, 0], s[0, 1], rng.uniform(-np.pi, np.pi))
            e2 = UncertaintyEllipse(tuple(rng.uniform(-1, 1, 2)), s[1, 0], s[1, 1], rng.uniform(-np.pi, np.pi))
            assert collision_probability(e1, e2) == pytest.approx(_density_product(e1, e2), rel=1e-6)

    def test_isotropic_same_mean(self):
        e = UncertaintyEllipse((1.0, 2.0), 1.0, 1.0, 0.3)
        assert collision_probability(e, e) == pytest.approx(1.0 / (4.0 * np.pi))

    def test_symmetric(self):
        e1 = UncertaintyEllipse((0.0, 0.0), 2.0, 1.0, 0.2)
        e2 = UncertaintyEllipse((1.0, -0.5), 1.5, 0.4, 1.1)
        assert collision_probability(e1, e2) == pytest.approx(collision_probability(e2, e1))

    def test_clamped_to_one(self):
        e = UncertaintyEllipse((0.0, 0.0), 0.1, 0.1, 0.0)
        assert collision_probability(e, e) == 1.0

    def test_invalid_ellipse(self):
        with pytest.raises(ContractViolationError):
            UncertaintyEllipse((0.0, 0.0), 0.5, 1.0, 0.0)

    def test_singular_covariance(self):
        with pytest.raises(EvaluationError):
            gaussian_overlap(0.0, 0.0, 0.0, 1e-10, 1e-10, 0.0, 1e-10, 1e-10)


class TestCurveAndDamage:

    def test_curve_probability_saturates_at_limit(self):
        """At the lateral limit the margin is 0 and the density peak 1/√(2πσ²) applies."""
        params = RiskParams(sigma_curve=1.0)
        assert curve_probability(2.0, 1.0, params) == pytest.approx(1.0 / math.sqrt(2 * math.pi))

    def test_curve_probability_clamped(self):
        params = RiskParams(sigma_curve=0.2)
        assert curve_probability(10.0, 0.1, params) == 1.0

    def test_straight_road_floor(self):
        params = RiskParams()
        expected = math.exp(-16.0 / 0.5) / math.sqrt(2 * math.pi * 0.25)
        assert curve_probability(10.0, 0.0, params) == pytest.approx(expected)

    def test_literal_lateral_acceleration(self):
        params = RiskParams(sigma_curve=1.0, lateral_accel_mode=LateralAccelMode.LITERAL)
        # √(|κ|·v) = √(0.25·16) = 2 -> margin 2
        expected = math.exp(-2.0) / math.sqrt(2 * math.pi)
        assert curve_probability(16.0, 0.25, params) == pytest.approx(expected)

    def test_vectorised(self):
        values = curve_probability(np.array([0.0, 5.0]), np.array([0.0, 0.1]), RiskParams())
        assert values.shape == (2,)

    def test_damage_midpoint(self):
        params = RiskParams()
        assert damage("coll", 8.0, params) == pytest.approx(2.5e3)
        assert damage("curv", 12.0, params) == pytest.approx(2.5e3)

    def test_damage_direction(self):
        increasing = RiskParams()
        literal = RiskParams(damage_mode=DamageMode.LITERAL)
        assert damage("coll", 15.0, increasing) > damage("coll", 2.0, increasing)
        assert damage("coll", 15.0, literal) < damage("coll", 2.0, literal)

    def test_unknown_channel(self):
        with pytest.raises(ContractViolationError):
            damage("rain", 1.0, RiskParams())


class TestRiskIntegral:

    def test_free_road_risk_is_curve_floor_only(self, straight_road, prediction):
        # Setup
        params = RiskParams()
        ego = rollout(constant_profile(10.0), straight_road, 10.0, prediction)

        # Run
        breakdown = evaluate_risk(ego, [], params)

        # Verify
        n = ego.steps
        assert breakdown.p_coll.shape == (n,)
        assert np.allclose(breakdown.p_coll, 0.0)
        rate = curve_probability(10.0, 0.0, params) / prediction.dt
        survival = np.exp(-np.cumsum(np.full(n, params.escape_rate + rate) * prediction.dt))
        expected = np.sum(rate * damage("curv", 10.0, params) * survival * prediction.dt)
        assert breakdown.risk == pytest.approx(expected, rel=1e-12)

    def test_survival_monotone(self, straight_road, prediction):
        ego = rollout(constant_profile(8.0), straight_road, 50.0, prediction)
        other = rollout(constant_profile(8.0), straight_road, 44.0, prediction)
        breakdown = evaluate_risk(ego, [other], RiskParams())
        assert np.all(np.diff(breakdown.survival) <= 0)
        assert np.all((breakdown.survival > 0) & (breakdown.survival <= 1))

    def test_closer_car_more_risk(self, straight_road, prediction):
        ego = rollout(constant_profile(8.0), straight_road, 50.0, prediction)
        near = rollout(constant_profile(8.0), straight_road, 46.0, prediction)
        far = rollout(constant_profile(8.0), straight_road, 30.0, prediction)
        params = RiskParams()
        assert evaluate_risk(ego, [near], params).risk > evaluate_risk(ego, [far], params).risk

    def test_matches_step_loop(self, straight_road, prediction):
        """Vectorised integral equals a plain loop over the intervals."""
        params = RiskParams()
        ego = rollout(constant_profile(9.0), straight_road, 60.0, prediction)
        other = rollout(constant_profile(7.0), straight_road, 52.0, prediction)
        breakdown = evaluate_risk(ego, [other], params)

        total, exposure = 0.0, 0.0
        for k in range(ego.steps):
            e1 = UncertaintyEllipse((ego.x[k], ego.y[k]), ego.sigma_lon[k], ego.sigma_lat[k], ego.heading[k])
            e2 = UncertaintyEllipse((other.x[k], other.y[k]), other.sigma_lon[k], other.sigma_lat[k],
                                    other.heading[k])
            p_coll = collision_probability(e1, e2)
            p_curv = curve_probability(ego.velocity[k], ego.curvature[k], params)
            rate_coll, rate_curv = p_coll / ego.dt, p_curv / ego.dt
            exposure += (params.escape_rate + rate_coll + rate_curv) * ego.dt
            relative = abs(other.velocity[k] - ego.velocity[k])
            total += (rate_coll * damage("coll", relative, params)
                      + rate_curv * damage("curv", ego.velocity[k], params)) * math.exp(-exposure) * ego.dt
        assert breakdown.risk == pytest.approx(total, rel=1e-9)

    def test_event_interval(self, straight_road, prediction):
        ego = rollout(constant_profile(8.0), straight_road, 50.0, prediction)
        default = evaluate_risk(ego, [], RiskParams())
        longer = evaluate_risk(ego, [], RiskParams(event_interval=0.5))
        assert np.allclose(longer.rate_curv, default.rate_curv / 2.0)

    def test_mismatched_horizon(self, straight_road, prediction):
        ego = rollout(constant_profile(8.0), straight_road, 50.0, prediction)
        short = rollout(constant_profile(8.0), straight_road, 20.0, PredictionConfig(horizon=5.0))
        with pytest.raises(ContractViolationError):
            evaluate_risk(ego, [short], RiskParams())

    def test_stacked_prediction(self, straight_road, prediction):
        ego = rollout(constant_profile(8.0), straight_road, 50.0, prediction)
        other = rollout(constant_profile(6.0), straight_road, 40.0, prediction)
        stacked = TrafficPrediction.stack([other], prediction.dt, prediction.steps)
        params = RiskParams()
        assert evaluate_risk(ego, stacked, params).risk == pytest.approx(evaluate_risk(ego, [other], params).risk)

    def test_prediction_covariance_computed_once(self, straight_road, prediction):
        """Candidates scored against one prediction reuse its rotated covariances."""
        # Setup
        other = rollout(constant_profile(6.0), straight_road, 40.0, prediction)
        stacked = TrafficPrediction.stack([other], prediction.dt, prediction.steps)
        slow = rollout(constant_profile(4.0), straight_road, 50.0, prediction)
        fast = rollout(constant_profile(9.0), straight_road, 50.0, prediction)

        # Run
        with patch("src.risk.schemas.covariance_terms", wraps=covariance_terms) as mock_terms:
            evaluate_risk(slow, stacked, RiskParams())
            evaluate_risk(fast, stacked, RiskParams())

        # Verify
        assert mock_terms.call_count == 1
        xx, yy, xy = stacked.covariance_terms
        ellipse = UncertaintyEllipse((0.0, 0.0), float(other.sigma_lon[3]),
                                     float(other.sigma_lat[3]), float(other.heading[3]))
        assert [xx[0, 3], yy[0, 3], xy[0, 3]] == pytest.approx(
            [ellipse.covariance[0, 0], ellipse.covariance[1, 1], ellipse.covariance[0, 1]])


class TestBenefitAndCost:

    def test_benefit_travel_term(self, straight_road, prediction):
        """b^t in €/km is applied per metre travelled."""
        ego = rollout(constant_profile(10.0), straight_road, 0.0, prediction)
        survival = np.ones(ego.steps)
        benefit = evaluate_benefit(ego, survival, BenefitWeights(travel_per_km=2.0))
        assert benefit == pytest.approx(2.0 / 1000.0 * 10.0 * 10.0)

    def test_survival_length_checked(self, straight_road, prediction):
        ego = rollout(constant_profile(10.0), straight_road, 0.0, prediction)
        with pytest.raises(ContractViolationError):
            evaluate_benefit(ego, np.ones(ego.steps + 1), BenefitWeights())

    def test_cost_combines(self, straight_road, prediction):
        ego = rollout(constant_profile(10.0), straight_road, 0.0, prediction)
        breakdown = evaluate_trajectory(ego, [], RiskParams(), BenefitWeights())
        assert breakdown.cost == pytest.approx(cost(breakdown.risk, breakdown.benefit))
        assert breakdown.benefit > 0
        assert cost(3.0, 1.0) == 2.0

    def test_straight_road_curve_floor_below_smallest_travel_benefit(self, straight_road, prediction):
        """Cruising a straight road stays worth it even at the lowest swept b^t."""
        # Setup
        ego = rollout(constant_profile(10.0), straight_road, 0.0, prediction)

        # Run
        breakdown = evaluate_trajectory(ego, [], RiskParams(), BenefitWeights(travel_per_km=0.1))

        # Verify
        assert breakdown.risk < 1e-3 * breakdown.benefit
        assert breakdown.cost < 0.0
