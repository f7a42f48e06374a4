import numpy as np
import pytest
from pydantic import ValidationError

from src.sim.schemas import HeadwayModel, ScenarioConfig
from src.sim.traffic import generate_traffic, headway_stream


class TestHeadways:

    def test_explicit_sequence_repeats_last(self):
        config = ScenarioConfig(headways=[3.0, 10.0, 4.0])
        stream = headway_stream(config, np.random.default_rng(0))
        assert [next(stream) for _ in range(5)] == [3.0, 10.0, 4.0, 4.0, 4.0]

    def test_random_within_noise_band(self):
        config = ScenarioConfig(mean_headway=3.0, noise=0.5)
        stream = headway_stream(config, np.random.default_rng(1))
        values = [next(stream) for _ in range(500)]
        assert min(values) >= 2.5 and max(values) <= 3.5
        assert np.mean(values) == pytest.approx(3.0, abs=0.05)

    def test_truncated_at_minimum(self):
        config = ScenarioConfig(mean_headway=1.2, noise=1.0, min_headway=1.0)
        stream = headway_stream(config, np.random.default_rng(2))
        assert min(next(stream) for _ in range(200)) >= 1.0

    def test_poisson_headways_spread_around_lambda(self):
        """Poisson headways reach well past λ + noise, which uniform headways never do."""
        # Setup
        config = ScenarioConfig(mean_headway=5.0, headway_model=HeadwayModel.POISSON)
        stream = headway_stream(config, np.random.default_rng(3))

        # Run
        values = np.array([next(stream) for _ in range(5000)])

        # Verify
        assert values.min() >= config.min_headway
        assert values.max() > 9.0
        assert np.mean(values) == pytest.approx(5.0, abs=0.15)

    def test_poisson_dense_traffic_still_has_long_gaps(self):
        config = ScenarioConfig(mean_headway=2.0, headway_model=HeadwayModel.POISSON)
        stream = headway_stream(config, np.random.default_rng(4))
        values = np.array([next(stream) for _ in range(5000)])
        assert 0.02 < np.mean(values >= 4.5) < 0.15

    def test_noise_must_stay_below_mean(self):
        with pytest.raises(ValidationError):
            ScenarioConfig(mean_headway=0.5, noise=0.5)

    def test_empty_headways(self):
        with pytest.raises(ValidationError):
            ScenarioConfig(headways=[])


class TestGenerateTraffic:

    def test_fixed_schedule(self):
        config = ScenarioConfig(headways=[3.0, 10.0, 3.0], first_arrival=0.5)
        events = generate_traffic(config, until=20.0)
        arrivals = [e.arrival_time for e in events[:4]]
        assert arrivals == pytest.approx([0.5, 3.5, 13.5, 16.5])
        assert events[0].spawn_time == pytest.approx(0.5 - 150.0 / 10.0)
        assert all(e.path_id == "main" and e.velocity == 10.0 for e in events)

    def test_road_populated_at_start(self):
        """Without a fixed phase the first car is already past the conflict point at t = 0."""
        config = ScenarioConfig()
        first = generate_traffic(config, seed=4)[0]
        assert -10.0 <= first.arrival_time <= -10.0 + config.mean_headway

    def test_same_seed_same_traffic(self):
        config = ScenarioConfig()
        assert generate_traffic(config, seed=9) == generate_traffic(config, seed=9)
        assert generate_traffic(config, seed=9) != generate_traffic(config, seed=10)

    def test_spawns_until_horizon(self):
        config = ScenarioConfig()
        events = generate_traffic(config, seed=0, until=30.0)
        assert events[-1].spawn_time <= 30.0
        assert np.all(np.diff([e.spawn_time for e in events]) > 0)
