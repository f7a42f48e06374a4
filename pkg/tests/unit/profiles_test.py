import numpy as np
import pytest

from src.common.custom_exceptions import DomainError, InvalidInputError
from src.geometry.service import pose_at
from src.profiles.schemas import FixedKind, PredictionConfig
from src.profiles.service import (
    accelerate_profile,
    constant_profile,
    extrapolate_other,
    make_ramp_profile,
    rollout,
    stop_profile,
    velocity_at,
)


@pytest.fixture
def double_ramp():
    """0 -> 5 m/s during [0, 2.5] s, then 5 -> 10 m/s during [5, 7.5] s."""
    return make_ramp_profile(0.0, [5.0, 10.0], [0.0, 5.0], 2.5)


class TestRampProfile:

    def test_velocity_course(self, double_ramp):
        assert velocity_at(double_ramp, 0.0) == 0.0
        assert velocity_at(double_ramp, 1.25) == pytest.approx(2.5)
        assert velocity_at(double_ramp, 4.0) == pytest.approx(5.0)
        assert velocity_at(double_ramp, 6.25) == pytest.approx(7.5)
        assert velocity_at(double_ramp, 20.0) == pytest.approx(10.0)

    def test_negative_time(self, double_ramp):
        with pytest.raises(DomainError):
            velocity_at(double_ramp, -0.1)

    def test_overlapping_ramp_starts_at_previous_end(self):
        """A last ramp starting inside the first one is clipped to the end of the first."""
        profile = make_ramp_profile(0.0, [5.0, 0.0], [0.0, 1.0], 2.5)
        assert velocity_at(profile, 2.5) == pytest.approx(5.0)
        assert velocity_at(profile, 5.0) == pytest.approx(0.0)

    def test_never_negative(self):
        profile = make_ramp_profile(2.0, [-3.0, -3.0], [0.0, 2.5], 2.5)
        assert np.all(profile.velocities(np.linspace(0, 10, 41)) >= 0.0)

    def test_invalid_ramps(self):
        with pytest.raises(InvalidInputError):
            make_ramp_profile(0.0, [5.0], [0.0], 2.5)
        with pytest.raises(InvalidInputError):
            make_ramp_profile(0.0, [5.0, 6.0], [0.0, 2.5], 0.0)

    def test_shift_reads_later_course(self, double_ramp):
        shifted = double_ramp.shifted(5.0)
        assert velocity_at(shifted, 1.25) == pytest.approx(velocity_at(double_ramp, 6.25))
        assert shifted.effective_starts() == (-5.0, 0.0)

    def test_free_parameters(self, double_ramp):
        assert double_ramp.free_parameters() == (5.0, 10.0, 5.0)
        changed = double_ramp.with_free_parameters(4.0, 8.0, 6.0)
        assert changed.free_parameters() == (4.0, 8.0, 6.0)

    def test_last_start_not_before_penultimate_end(self, double_ramp):
        changed = double_ramp.with_free_parameters(4.0, 8.0, 1.0)
        assert changed.free_parameters()[2] == pytest.approx(2.5)
        assert double_ramp.last_start_lower_bound() == pytest.approx(2.5)


class TestContinuation:

    def test_penultimate_completed(self, double_ramp):
        assert not double_ramp.shifted(2.0).penultimate_completed()
        assert double_ramp.shifted(2.5).penultimate_completed()

    def test_insert_in_front_of_distant_last_ramp(self, double_ramp):
        """Last ramp still more than one duration ahead: the new ramp goes in front of it."""
        profile = double_ramp.shifted(2.5)
        inserted = profile.with_inserted_ramp(2.5)
        times = np.linspace(0.0, 10.0, 41)
        assert len(inserted.ramps) == 3
        assert np.allclose(inserted.velocities(times), profile.velocities(times))
        assert inserted.ramps[1].start == pytest.approx(2.5)

    def test_append_after_near_last_ramp(self, double_ramp):
        profile = double_ramp.shifted(4.0)
        inserted = profile.with_inserted_ramp(2.5)
        times = np.linspace(0.0, 10.0, 41)
        assert inserted.ramps[-1].start == pytest.approx(7.5)
        assert np.allclose(inserted.velocities(times), profile.velocities(times))

    def test_rebase_keeps_course(self, double_ramp):
        profile = double_ramp.shifted(4.0).with_inserted_ramp(2.5)
        rebased = profile.rebased()
        times = np.linspace(0.0, 10.0, 41)
        assert len(rebased.ramps) == 2
        assert rebased.v0 == pytest.approx(5.0)
        assert np.allclose(rebased.velocities(times), profile.velocities(times))


class TestFixedProfiles:

    def test_constant(self):
        profile = constant_profile(7.0)
        assert profile.kind is FixedKind.CONSTANT
        assert np.allclose(profile.velocities(np.arange(5.0)), 7.0)

    def test_stop_decelerates_at_two(self):
        profile = stop_profile(8.0)
        assert profile.anchor_time == pytest.approx(4.0)
        assert velocity_at(profile, 2.0) == pytest.approx(4.0)
        assert velocity_at(profile, 6.0) == 0.0

    def test_stop_from_standstill(self):
        assert velocity_at(stop_profile(0.0), 3.0) == 0.0

    def test_accelerate_to_v_max(self):
        profile = accelerate_profile(4.0, 12.0)
        assert profile.anchor_time == pytest.approx(4.0)
        assert velocity_at(profile, 2.0) == pytest.approx(8.0)
        assert velocity_at(profile, 9.0) == pytest.approx(12.0)


class TestRollout:

    def test_constant_velocity(self, straight_road, prediction):
        trajectory = rollout(constant_profile(10.0), straight_road, 5.0, prediction)
        assert trajectory.steps == 40
        assert trajectory.horizon == pytest.approx(10.0)
        assert trajectory.longitudinal[-1] == pytest.approx(105.0)
        assert trajectory.x[4] == pytest.approx(15.0)
        assert np.allclose(trajectory.acceleration, 0.0)

    def test_left_endpoint_integration(self, straight_road, prediction, double_ramp):
        trajectory = rollout(double_ramp, straight_road, 0.0, prediction)
        expected = np.concatenate(([0.0], np.cumsum(trajectory.velocity[:-1] * prediction.dt)))
        assert np.allclose(trajectory.longitudinal, expected)

    def test_uncertainty_growth(self, straight_road):
        config = PredictionConfig(sigma_lon0=1.0, sigma_lat0=0.3, growth=0.1)
        trajectory = rollout(constant_profile(10.0), straight_road, 0.0, config)
        assert trajectory.sigma_lon[-1] == pytest.approx(1.0 + 0.1 * 100.0)
        assert np.allclose(trajectory.sigma_lat, 0.3)

    def test_jerk_and_acceleration(self, straight_road, prediction, double_ramp):
        trajectory = rollout(double_ramp, straight_road, 0.0, prediction)
        assert trajectory.acceleration[0] == pytest.approx(2.0)
        assert trajectory.jerk[-1] == 0.0
        assert trajectory.state(0).velocity == 0.0

    def test_start_off_path(self, straight_road, prediction):
        with pytest.raises(DomainError):
            rollout(constant_profile(1.0), straight_road, 250.0, prediction)

    def test_extrapolate_other(self, straight_road, prediction):
        trajectory = extrapolate_other(straight_road, pose_at(straight_road, 20.0), 5.0, prediction)
        assert trajectory.longitudinal[-1] == pytest.approx(70.0)
        assert trajectory.path_id == "road"
