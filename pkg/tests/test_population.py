import itertools

import numpy as np
import pytest

from blrhac.env import EnvironmentSpec, vacant_locations, write_dataset, read_dataset
from blrhac.population import (
    PopulationConfig,
    collect_demonstrations,
    expert_placement,
    load_population,
    sample_population,
    save_population,
)

SMALL = EnvironmentSpec.preset("small")


def tiny_cfg(**kw):
    defaults = dict(
        prefs_per_split={"train": 8, "eval": 4, "test": 4},
        episodes_per_pref={"train": 2, "eval": 1, "test": 1},
        seed=3,
    )
    defaults.update(kw)
    return PopulationConfig(**defaults)


class TestSamplePopulation:
    def test_zero_noise_collapses_to_centers(self):
        pop = sample_population(tiny_cfg(within_mode_std=0.0), SMALL)
        train = pop["train"]
        # round-robin: prefs 0 and 4 share mode 0, so identical at zero noise
        np.testing.assert_array_equal(train[0].theta, train[4].theta)
        assert train[0].mode_id == train[4].mode_id == 0

    def test_round_robin_assignment(self):
        pop = sample_population(tiny_cfg(), SMALL)
        modes = [p.mode_id for p in pop["train"]]
        assert modes == [0, 1, 2, 3, 0, 1, 2, 3]

    def test_split_ids_disjoint(self):
        pop = sample_population(tiny_cfg(), SMALL)
        ids = [{p.preference_id for p in prefs} for prefs in pop.values()]
        for a, b in itertools.combinations(ids, 2):
            assert not a & b

    def test_mode_separation(self):
        # within-mode pairs are closer (Frobenius) than across-mode pairs
        pop = sample_population(tiny_cfg(prefs_per_split={"train": 40, "eval": 0, "test": 0}), SMALL)
        train = pop["train"]
        within, across = [], []
        for a, b in itertools.combinations(train, 2):
            d = np.linalg.norm(a.theta - b.theta)
            (within if a.mode_id == b.mode_id else across).append(d)
        assert np.mean(within) < np.mean(across)

    def test_splits_share_mode_centers(self):
        pop = sample_population(tiny_cfg(within_mode_std=0.0), SMALL)
        np.testing.assert_array_equal(pop["train"][0].theta, pop["test"][0].theta)


class TestExpertPlacement:
    def test_unique_argmax(self):
        theta = np.array([[0.1, 0.9, 0.3]])
        assert expert_placement(theta, 0, [0, 1, 2]) == 1

    def test_tie_goes_to_lowest_index(self):
        theta = np.array([[0.9, 0.9, 0.3]])
        assert expert_placement(theta, 0, [0, 1, 2]) == 0

    def test_masked_argmax(self):
        theta = np.array([[0.1, 0.9, 0.3]])
        assert expert_placement(theta, 0, [0, 2]) == 2

    def test_empty_vacancy(self):
        with pytest.raises(ValueError):
            expert_placement(np.zeros((1, 3)), 0, [])


class TestDemonstrations:
    def test_expert_self_agreement(self):
        pop = sample_population(tiny_cfg(), SMALL)
        ds = collect_demonstrations(pop["train"][:1], SMALL, 1, seed=0)
        assert len(ds.episodes) == 1
        assert len(ds.episodes[0].steps) == 5
        assert all(s.a_r == s.a_c for s in ds.episodes[0].steps)

    def test_counting(self):
        pop = sample_population(tiny_cfg(), SMALL)
        ds = collect_demonstrations(pop["train"][:3], SMALL, 2, seed=0)
        assert len(ds.episodes) == 6
        ids = sorted(ep.preference_id for ep in ds.episodes)
        assert ids == sorted(p.preference_id for p in pop["train"][:3] for _ in range(2))

    def test_replay_oracle_over_file(self, tmp_path):
        pop = sample_population(tiny_cfg(), SMALL)
        ds = collect_demonstrations(pop["train"], SMALL, 2, seed=0)
        path = tmp_path / "demos.ndjson"
        write_dataset(path, ds.episodes)
        thetas = {p.preference_id: p.theta for p in pop["train"]}
        for ep in read_dataset(path):
            theta = thetas[ep.preference_id]
            for step in ep.steps:
                vac = vacant_locations(step.state_before)
                assert step.a_c == expert_placement(theta, step.a_h, vac)

    def test_byte_identical_reproduction(self, tmp_path):
        paths = []
        for i in range(2):
            pop = sample_population(tiny_cfg(), SMALL)
            ds = collect_demonstrations(pop["train"], SMALL, 2, seed=0)
            path = tmp_path / f"demos{i}.ndjson"
            write_dataset(path, ds.episodes)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()


def test_population_file_roundtrip(tmp_path):
    cfg = tiny_cfg()
    pop = sample_population(cfg, SMALL)
    path = tmp_path / "pop.json"
    save_population(path, SMALL, cfg, pop)
    spec2, cfg2, pop2 = load_population(path)
    assert spec2 == SMALL
    assert cfg2 == cfg
    np.testing.assert_allclose(pop2["eval"][1].theta, pop["eval"][1].theta)
