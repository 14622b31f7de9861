import json

import numpy as np
import pytest

from blrhac.env import (
    EMPTY,
    EnvError,
    EnvironmentSpec,
    apply_placement,
    episode_from_json,
    episode_to_json,
    new_episode,
    run_episode,
    step_turn,
    unplaced_objects,
    vacant_locations,
)


def lowest_vacant(a_h, vacant):
    return min(vacant)


def highest_vacant(a_h, vacant):
    return max(vacant)


class TestSpec:
    def test_presets(self):
        assert EnvironmentSpec.preset("small").num_objects == 5
        assert EnvironmentSpec.preset("medium").num_locations == 10
        large = EnvironmentSpec.preset("large")
        assert (large.num_objects, large.num_locations) == (25, 25)

    def test_invalid(self):
        with pytest.raises(EnvError):
            EnvironmentSpec(num_objects=0, num_locations=3)
        with pytest.raises(EnvError):
            EnvironmentSpec(num_objects=3, num_locations=3, capacity_per_location=2)
        with pytest.raises(EnvError):
            EnvironmentSpec(num_objects=101, num_locations=5)
        with pytest.raises(EnvError):
            EnvironmentSpec.preset("gigantic")


class TestNewEpisode:
    def test_small_uses_full_catalog(self):
        state = new_episode(EnvironmentSpec.preset("small"), seed=123)
        assert sorted(state.episode_objects) == [0, 1, 2, 3, 4]
        assert vacant_locations(state) == [0, 1, 2, 3, 4]

    def test_medium(self):
        state = new_episode(EnvironmentSpec.preset("medium"), seed=0)
        assert len(state.episode_objects) == 10
        assert len(vacant_locations(state)) == 10

    def test_seeded_subset_draw(self):
        spec = EnvironmentSpec(num_objects=25, num_locations=3)
        a = new_episode(spec, seed=7)
        b = new_episode(spec, seed=7)
        c = new_episode(spec, seed=8)
        assert len(set(a.episode_objects)) == 3
        assert all(0 <= o < 25 for o in a.episode_objects)
        assert a.episode_objects == b.episode_objects
        assert a.episode_objects != c.episode_objects

    def test_more_locations_than_objects(self):
        with pytest.raises(EnvError):
            new_episode(EnvironmentSpec(num_objects=2, num_locations=4), seed=0)


class TestPlacement:
    def setup_method(self):
        self.spec = EnvironmentSpec.preset("small")
        self.state = new_episode(self.spec, seed=1)

    def test_vacant_and_unplaced_track_placements(self):
        obj = self.state.episode_objects[0]
        after = apply_placement(self.state, obj, 2)
        assert vacant_locations(after) == [0, 1, 3, 4]
        assert obj not in unplaced_objects(after)
        # original state untouched
        assert vacant_locations(self.state) == [0, 1, 2, 3, 4]

    def test_occupied_location_rejected(self):
        o1, o2 = self.state.episode_objects[:2]
        after = apply_placement(self.state, o1, 0)
        with pytest.raises(EnvError):
            apply_placement(after, o2, 0)

    def test_double_place_rejected(self):
        obj = self.state.episode_objects[0]
        after = apply_placement(self.state, obj, 0)
        with pytest.raises(EnvError):
            apply_placement(after, obj, 1)

    def test_unknown_object_rejected(self):
        with pytest.raises(EnvError):
            apply_placement(self.state, 99, 0)


class TestStepTurn:
    def setup_method(self):
        self.spec = EnvironmentSpec.preset("small")
        self.state = new_episode(self.spec, seed=1)

    def test_agreement_keeps_robot_placement(self):
        a_h = self.state.episode_objects[0]
        rec = step_turn(self.state, a_h, lambda o, v: 3, lambda o, v: 3)
        assert rec.a_r == rec.a_c == 3
        assert rec.state_after.placement[a_h] == 3

    def test_correction_overrides(self):
        a_h = self.state.episode_objects[0]
        rec = step_turn(self.state, a_h, lambda o, v: 2, lambda o, v: 4)
        assert rec.state_after.placement[a_h] == 4
        assert rec.state_after.occupancy[2] == EMPTY

    def test_full_episode_completes(self):
        ep = run_episode(self.spec, seed=9, robot_policy=lowest_vacant, corrector=highest_vacant)
        assert len(ep.steps) == 5
        final = ep.steps[-1].state_after
        assert unplaced_objects(final) == []
        assert vacant_locations(final) == []

    def test_turn_index_counts_placements(self):
        ep = run_episode(self.spec, seed=9, robot_policy=lowest_vacant, corrector=lowest_vacant)
        for t, step in enumerate(ep.steps):
            occupied = sum(v != EMPTY for v in step.state_after.occupancy.values())
            assert step.state_after.turn_index == t + 1 == occupied


def test_determinism_bitwise():
    spec = EnvironmentSpec.preset("medium")
    a = run_episode(spec, seed=42, robot_policy=lowest_vacant, corrector=highest_vacant)
    b = run_episode(spec, seed=42, robot_policy=lowest_vacant, corrector=highest_vacant)
    assert json.dumps(episode_to_json(a)) == json.dumps(episode_to_json(b))


def test_episode_json_roundtrip():
    spec = EnvironmentSpec.preset("small")
    ep = run_episode(spec, seed=5, robot_policy=lowest_vacant, corrector=highest_vacant,
                     preference_id="p")
    back = episode_from_json(episode_to_json(ep))
    assert episode_to_json(back) == episode_to_json(ep)
