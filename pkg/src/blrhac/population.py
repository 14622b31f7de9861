"""Synthetic preference population and expert demonstration collection.

Preferences are O x L weight matrices drawn from a small number of Gaussian
modes. The expert leader policy places each picked object at the vacant
location with the highest weight. Demonstrations pair an expert robot with an
expert corrector, so recorded proposals and corrections always agree.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .env import EnvironmentSpec, Episode, run_episode, write_dataset

SPLITS = ("train", "eval", "test")


@dataclass
class PreferenceMatrix:
    theta: np.ndarray  # (O, L)
    preference_id: str
    mode_id: int

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("preference weights must be finite")


@dataclass
class PopulationConfig:
    num_modes: int = 4
    prefs_per_split: dict = field(
        default_factory=lambda: {"train": 1000, "eval": 100, "test": 100}
    )
    episodes_per_pref: dict = field(
        default_factory=lambda: {"train": 100, "eval": 20, "test": 20}
    )
    mode_center_scale: float = 1.0
    within_mode_std: float = 0.1
    seed: int = 0


@dataclass
class DemonstrationDataset:
    split: str
    episodes: list[Episode]
    population: list[PreferenceMatrix]


def sample_population(
    cfg: PopulationConfig, spec: EnvironmentSpec
) -> dict[str, list[PreferenceMatrix]]:
    """Sample per-split preference lists sharing one set of mode centers.

    Mode centers are drawn once so that held-out preferences come from the
    same subpopulations the training split covers; splits differ only in
    their preference draws (ids are disjoint by construction).
    """
    shape = (spec.num_objects, spec.num_locations)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    centers = [
        rng.normal(0.0, cfg.mode_center_scale, size=shape) for _ in range(cfg.num_modes)
    ]
    out: dict[str, list[PreferenceMatrix]] = {}
    for split_idx, split in enumerate(SPLITS):
        split_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2, split_idx]))
        prefs = []
        for i in range(cfg.prefs_per_split.get(split, 0)):
            mode = i % cfg.num_modes
            theta = centers[mode] + split_rng.normal(0.0, cfg.within_mode_std, size=shape)
            prefs.append(
                PreferenceMatrix(theta=theta, preference_id=f"{split}-{i}", mode_id=mode)
            )
        out[split] = prefs
    return out


def expert_placement(theta: np.ndarray, a_h: int, vacant: Sequence[int]) -> int:
    """Highest-weight vacant location for the picked object; ties go to the lowest id."""
    if len(vacant) == 0:
        raise ValueError("no vacant locations")
    vacant = sorted(int(l) for l in vacant)
    row = np.asarray(theta)[a_h, vacant]
    return vacant[int(np.argmax(row))]


def episode_seed(base_seed: int, pref_index: int, episode_index: int) -> int:
    """Stable per-episode seed so rollouts are reproducible and order-free."""
    return int(np.random.SeedSequence([base_seed, pref_index, episode_index]).generate_state(1)[0])


def collect_demonstrations(
    population: Sequence[PreferenceMatrix],
    spec: EnvironmentSpec,
    episodes_per_pref: int,
    seed: int,
    split: str = "train",
) -> DemonstrationDataset:
    """Roll expert demonstrations: both proposal and correction come from theta."""
    episodes: list[Episode] = []
    for p, pref in enumerate(population):
        expert = lambda a_h, vacant: expert_placement(pref.theta, a_h, vacant)
        for e in range(episodes_per_pref):
            ep = run_episode(
                spec,
                episode_seed(seed, p, e),
                robot_policy=expert,
                corrector=expert,
                preference_id=pref.preference_id,
            )
            episodes.append(ep)
    return DemonstrationDataset(split=split, episodes=episodes, population=list(population))


def population_to_json(
    spec: EnvironmentSpec, cfg: PopulationConfig, population: dict[str, list[PreferenceMatrix]]
) -> dict:
    return {
        "spec": spec.to_json(),
        "config": dataclasses.asdict(cfg),
        "preferences": {
            split: [
                {
                    "id": p.preference_id,
                    "mode_id": p.mode_id,
                    "theta": [float(x) for x in p.theta.ravel()],
                }
                for p in prefs
            ]
            for split, prefs in population.items()
        },
    }


def population_from_json(obj: dict):
    spec = EnvironmentSpec.from_json(obj["spec"])
    cfg = PopulationConfig(**obj["config"])
    shape = (spec.num_objects, spec.num_locations)
    population = {
        split: [
            PreferenceMatrix(
                theta=np.asarray(p["theta"], dtype=np.float64).reshape(shape),
                preference_id=p["id"],
                mode_id=p["mode_id"],
            )
            for p in prefs
        ]
        for split, prefs in obj["preferences"].items()
    }
    return spec, cfg, population


def save_population(path, spec, cfg, population) -> None:
    with open(path, "w") as f:
        json.dump(population_to_json(spec, cfg, population), f, sort_keys=True)
        f.write("\n")


def load_population(path):
    with open(path) as f:
        return population_from_json(json.load(f))


def save_demonstrations(path, dataset: DemonstrationDataset) -> None:
    write_dataset(path, dataset.episodes)
