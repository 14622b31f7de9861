"""Turn-based simulator for assistive surface rearrangement.

Two agents arrange objects into unit-capacity locations: the leader picks an
object, the assistant proposes a location, and the leader corrects the
placement. Corrections are authoritative: the post-step state always reflects
the corrected location.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

VACANT = -1
EMPTY = -1

_PRESETS = {
    "small": (5, 5),
    "medium": (10, 10),
    "large": (25, 25),
}

# Token vocabulary admits at most 100 location ids and 100 object ids.
MAX_OBJECTS = 100
MAX_LOCATIONS = 100


class EnvError(ValueError):
    """Invalid environment configuration or illegal placement."""


@dataclass(frozen=True)
class EnvironmentSpec:
    num_objects: int
    num_locations: int
    capacity_per_location: int = 1
    name: str = "custom"

    def __post_init__(self):
        if self.num_objects < 1 or self.num_locations < 1:
            raise EnvError("need at least one object and one location")
        if self.capacity_per_location != 1:
            raise EnvError("locations have unit capacity")
        if self.num_objects > MAX_OBJECTS or self.num_locations > MAX_LOCATIONS:
            raise EnvError("catalog exceeds the 100-object / 100-location vocabulary range")

    @staticmethod
    def preset(name: str) -> "EnvironmentSpec":
        if name not in _PRESETS:
            raise EnvError(f"unknown preset {name!r}; expected one of {sorted(_PRESETS)}")
        o, l = _PRESETS[name]
        return EnvironmentSpec(num_objects=o, num_locations=l, name=name)

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_json(obj: dict) -> "EnvironmentSpec":
        return EnvironmentSpec(**obj)


@dataclass
class WorldState:
    spec: EnvironmentSpec
    episode_objects: tuple[int, ...]
    placement: dict[int, int]  # object id -> location id, VACANT if unplaced
    occupancy: dict[int, int]  # location id -> object id, EMPTY if free
    turn_index: int = 0

    def copy(self) -> "WorldState":
        return WorldState(
            spec=self.spec,
            episode_objects=self.episode_objects,
            placement=dict(self.placement),
            occupancy=dict(self.occupancy),
            turn_index=self.turn_index,
        )


@dataclass
class StepRecord:
    state_before: WorldState
    a_h: int
    a_r: int
    a_c: int
    state_after: WorldState


@dataclass
class Episode:
    spec: EnvironmentSpec
    preference_id: str
    seed: int
    steps: list[StepRecord] = field(default_factory=list)


PlacementChooser = Callable[[int, Sequence[int]], int]


def new_episode(spec: EnvironmentSpec, seed: int) -> WorldState:
    """Draw L distinct objects from the catalog and start with every location vacant."""
    L = spec.num_locations
    if L > spec.num_objects:
        raise EnvError("cannot draw more episode objects than the catalog holds")
    rng = np.random.default_rng(seed)
    objects = rng.choice(spec.num_objects, size=L, replace=False)
    return WorldState(
        spec=spec,
        episode_objects=tuple(int(o) for o in objects),
        placement={int(o): VACANT for o in objects},
        occupancy={l: EMPTY for l in range(L)},
        turn_index=0,
    )


def vacant_locations(state: WorldState) -> list[int]:
    return [l for l in range(state.spec.num_locations) if state.occupancy[l] == EMPTY]


def unplaced_objects(state: WorldState) -> list[int]:
    return sorted(o for o in state.episode_objects if state.placement[o] == VACANT)


def apply_placement(state: WorldState, obj: int, location: int) -> WorldState:
    """Return a new state with obj placed at location; the input state is untouched."""
    if obj not in state.placement:
        raise EnvError(f"object {obj} is not part of this episode")
    if state.placement[obj] != VACANT:
        raise EnvError(f"object {obj} is already placed")
    if location not in state.occupancy:
        raise EnvError(f"unknown location {location}")
    if state.occupancy[location] != EMPTY:
        raise EnvError(f"location {location} is occupied")
    out = state.copy()
    out.placement[obj] = location
    out.occupancy[location] = obj
    return out


def step_turn(
    state: WorldState,
    a_h: int,
    robot_policy: PlacementChooser,
    corrector: PlacementChooser,
) -> StepRecord:
    """Run one pick/propose/correct turn. The correction decides the placement."""
    vacant = vacant_locations(state)
    if not vacant:
        raise EnvError("no vacant locations left")
    if a_h not in state.placement or state.placement[a_h] != VACANT:
        raise EnvError(f"picked object {a_h} is not an unplaced episode object")
    a_r = int(robot_policy(a_h, vacant))
    if a_r not in vacant:
        raise EnvError(f"robot proposed occupied or unknown location {a_r}")
    a_c = int(corrector(a_h, vacant))
    after = apply_placement(state, a_h, a_c)
    after.turn_index = state.turn_index + 1
    return StepRecord(state_before=state, a_h=a_h, a_r=a_r, a_c=a_c, state_after=after)


def run_episode(
    spec: EnvironmentSpec,
    seed: int,
    robot_policy: PlacementChooser,
    corrector: PlacementChooser,
    preference_id: str = "",
    on_step: Callable[[StepRecord], None] | None = None,
) -> Episode:
    """Roll a full L-step episode with uniformly random (seeded) leader picks."""
    state = new_episode(spec, seed)
    pick_rng = np.random.default_rng(np.random.SeedSequence([seed, 0x9E37]))
    episode = Episode(spec=spec, preference_id=preference_id, seed=seed)
    for _ in range(spec.num_locations):
        choices = unplaced_objects(state)
        a_h = int(pick_rng.choice(choices))
        record = step_turn(state, a_h, robot_policy, corrector)
        episode.steps.append(record)
        if on_step is not None:
            on_step(record)
        state = record.state_after
    assert not unplaced_objects(state)
    return episode


def episode_to_json(episode: Episode) -> dict:
    return {
        "spec": episode.spec.to_json(),
        "preference_id": episode.preference_id,
        "seed": episode.seed,
        "steps": [[s.a_h, s.a_r, s.a_c] for s in episode.steps],
    }


def episode_from_json(obj: dict) -> Episode:
    """Rebuild an episode (including state snapshots) by replaying its actions."""
    spec = EnvironmentSpec.from_json(obj["spec"])
    episode = Episode(spec=spec, preference_id=obj["preference_id"], seed=obj["seed"])
    state = new_episode(spec, episode.seed)
    for a_h, a_r, a_c in obj["steps"]:
        record = step_turn(state, a_h, lambda _o, _v: a_r, lambda _o, _v: a_c)
        episode.steps.append(record)
        state = record.state_after
    return episode


def write_dataset(path, episodes: Sequence[Episode]) -> None:
    with open(path, "w") as f:
        for ep in episodes:
            f.write(json.dumps(episode_to_json(ep), sort_keys=True) + "\n")


def read_dataset(path) -> list[Episode]:
    with open(path) as f:
        return [episode_from_json(json.loads(line)) for line in f if line.strip()]
