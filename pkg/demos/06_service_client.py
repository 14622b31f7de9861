"""Drive the collaboration service as a scripted leader.

Runs the FastAPI app in-process, creates a session with a linear agent, plays
one episode of picks and corrections, and watches the theta estimate absorb
each disagreement.
"""

import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from blrhac import EnvironmentSpec, PopulationConfig, expert_placement, sample_population
from blrhac.service import create_app

spec = EnvironmentSpec.preset("small")
theta_true = sample_population(
    PopulationConfig(prefs_per_split={"train": 0, "eval": 0, "test": 1},
                     episodes_per_pref={"test": 1}, seed=5),
    spec,
)["test"][0].theta

client = TestClient(create_app(checkpoint_dir=Path(tempfile.mkdtemp())))
created = client.post("/v1/sessions", json={
    "env": "small", "agent_kind": "linear_scratch", "seed": 0, "alpha": 10.0,
}).json()
sid = created["session_id"]
print(f"session {sid}, agent {created['agent_kind']}")

state = created["state"]
rng = np.random.default_rng(0)
# the service starts a fresh episode automatically, so stop after one
corr = {"episode_complete": False}
while not corr["episode_complete"]:
    a_h = int(rng.choice(state["unplaced"]))
    pick = client.post(f"/v1/sessions/{sid}/pick", json={"object_id": a_h}).json()
    a_c = int(expert_placement(theta_true, a_h, pick["vacant"]))
    corr = client.post(f"/v1/sessions/{sid}/correction", json={"location_id": a_c}).json()
    verdict = "agreed" if corr["accurate"] else f"corrected, delta {corr['theta_delta']}"
    print(f"pick o{a_h}: proposed l{pick['proposal']}, {verdict}")
    state = corr["state"]

metrics = client.get(f"/v1/sessions/{sid}/metrics").json()
print(f"episode accuracy: {metrics['per_episode_accuracy']}")
print(f"update cost so far: {metrics['cumulative_update_flops']} FLOPs "
      f"({metrics['steps_total']} steps x 2 x 25)")

events = client.get(f"/v1/sessions/{sid}/events", params={"since": 0}).json()
print(f"event log holds {len(events['events'])} events for UI replay")
