"""Named run profiles.

The desk profile is sized so the full pipeline (population, demos,
pretraining, adaptation experiments) runs in minutes on a single laptop
core while preserving the qualitative orderings of the full-scale setup.
"""

from __future__ import annotations

from .env import EnvironmentSpec
from .population import PopulationConfig

DESK_PROFILE = {
    "env": "small",
    "num_modes": 4,
    "prefs_per_split": {"train": 32, "eval": 16, "test": 16},
    "episodes_per_pref": {"train": 20, "eval": 10, "test": 10},
    "mode_center_scale": 1.0,
    "within_mode_std": 0.1,
    "hidden_dim": 64,
    "num_layers": 3,
    "num_heads": 4,
    "history_len": 20,
    "learning_rate": 0.1,
    "batch_size": 64,
    "max_epochs": 10,
    "early_stop_patience": 10,
    "alpha": 10.0,
    "online_lr": 1e-2,
    "episodes": 20,
    "switch_at": 10,
}

FULL_PROFILE = {
    "env": "small",
    "num_modes": 4,
    "prefs_per_split": {"train": 1000, "eval": 100, "test": 100},
    "episodes_per_pref": {"train": 100, "eval": 20, "test": 20},
    "mode_center_scale": 1.0,
    "within_mode_std": 0.1,
    "hidden_dim": 128,
    "num_layers": 3,
    "num_heads": 4,
    "history_len": 50,
    "learning_rate": 1e-3,
    "batch_size": 64,
    "max_epochs": 200,
    "early_stop_patience": 10,
    "alpha": 10.0,
    "online_lr": 1e-2,
    "episodes": 20,
    "switch_at": 10,
}

PROFILES = {"desk": DESK_PROFILE, "full": FULL_PROFILE}


def population_config(profile: dict, seed: int) -> PopulationConfig:
    return PopulationConfig(
        num_modes=profile["num_modes"],
        prefs_per_split=dict(profile["prefs_per_split"]),
        episodes_per_pref=dict(profile["episodes_per_pref"]),
        mode_center_scale=profile["mode_center_scale"],
        within_mode_std=profile["within_mode_std"],
        seed=seed,
    )


def environment(profile: dict) -> EnvironmentSpec:
    name = profile["env"]
    if name in ("small", "medium", "large"):
        return EnvironmentSpec.preset(name)
    return EnvironmentSpec(
        num_objects=profile["num_objects"], num_locations=profile["num_locations"], name="custom"
    )
