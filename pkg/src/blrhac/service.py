"""Session-oriented collaboration service.

A human (or scripted client) plays the leader over JSON endpoints: pick an
object, see the agent's proposed placement and its confidence, correct it.
Linear agents update their preference estimate after every correction; the
online transformer fine-tunes at episode boundaries. Sessions are in-memory,
single-writer state machines; each carries an append-only event log that a UI
can poll or stream.

Seeding mirrors the offline adaptation protocol (preference index 0), so a
scripted client that replays the same picks and corrections reproduces the
offline trajectory exactly.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse

from .env import (
    VACANT,
    EnvError,
    EnvironmentSpec,
    WorldState,
    apply_placement,
    new_episode,
    unplaced_objects,
    vacant_locations,
)
from .models import Checkpoint, action_distribution
from .online import OnlineLinearLearner, OnlineTransformerLearner, make_blr_hac
from .population import episode_seed, expert_placement, sample_population
from .profiles import DESK_PROFILE, population_config
from .tokens import HistoryWindow, encode_history

SCHEMA = "blrhac-service-v1"

AGENT_KINDS = ("blr_hac", "linear_scratch", "online_transformer")


def _error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


def _current_theta(agent) -> np.ndarray:
    if isinstance(agent, OnlineLinearLearner):
        return agent.theta
    window = HistoryWindow(current_pick=None, entries=agent.replay[-agent.k :], k=agent.k)
    seq = encode_history(window, agent.spec)
    with torch.no_grad():
        return agent.model.forward_theta(seq.tokens[None], seq.attention_mask[None])[0].numpy()


def _state_json(state: WorldState) -> dict:
    return {
        "turn_index": state.turn_index,
        "episode_objects": list(state.episode_objects),
        "placement": {str(o): l for o, l in state.placement.items()},
        "occupancy": {str(l): o for l, o in state.occupancy.items()},
        "unplaced": unplaced_objects(state),
        "vacant": vacant_locations(state),
    }


@dataclass
class Session:
    session_id: str
    spec: EnvironmentSpec
    agent_kind: str
    agent: object
    seed: int
    alpha: float
    state: WorldState
    episode_index: int = 0
    pending: dict | None = None
    disagreements: int = 0
    steps_total: int = 0
    per_episode_accuracy: list = field(default_factory=list)
    inference_flops: int = 0
    update_flops: int = 0
    events: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)
    leader_theta: np.ndarray | None = None  # server-held; never serialized
    leader_pick_rng: object = None

    def emit(self, kind: str, payload: dict) -> None:
        self.events.append({"seq": len(self.events), "type": kind, "payload": payload})

    def theta_snapshot(self) -> list:
        return [[float(x) for x in row] for row in _current_theta(self.agent)]

    def metrics_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "session_id": self.session_id,
            "per_episode_accuracy": self.per_episode_accuracy,
            "episode_index": self.episode_index,
            "steps_total": self.steps_total,
            "cumulative_inference_flops": self.inference_flops,
            "cumulative_update_flops": self.update_flops,
            "theta_snapshot": self.theta_snapshot(),
        }

    def start_episode(self) -> None:
        ep_seed = episode_seed(self.seed, 0, self.episode_index)
        self.state = new_episode(self.spec, ep_seed)
        self.disagreements = 0
        self.pending = None
        if self.leader_theta is not None:
            self.leader_pick_rng = np.random.default_rng(
                np.random.SeedSequence([ep_seed, 0x9E37])
            )


def create_app(checkpoint_dir=None) -> FastAPI:
    app = FastAPI(title="blrhac collaboration service")
    sessions: dict[str, Session] = {}
    counter = itertools.count(1)
    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir else None

    def get_session(sid: str) -> Session:
        if sid not in sessions:
            raise _error(404, "unknown_session", f"no session {sid!r}")
        return sessions[sid]

    def resolve_checkpoint(name: str | None) -> Checkpoint:
        if not name:
            raise _error(400, "missing_checkpoint", "this agent kind needs a checkpoint")
        path = Path(name)
        if not path.exists() and ckpt_dir is not None:
            path = ckpt_dir / name
        if not path.exists():
            raise _error(404, "unknown_checkpoint", f"checkpoint {name!r} not found")
        return Checkpoint.load(path)

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: dict):
        env = body.get("env", "small")
        agent_kind = body.get("agent_kind", "blr_hac")
        seed = int(body.get("seed", 0))
        alpha = float(body.get("alpha", DESK_PROFILE["alpha"]))
        if agent_kind not in AGENT_KINDS:
            raise _error(400, "unknown_agent_kind", f"agent_kind must be one of {AGENT_KINDS}")
        try:
            spec = (
                EnvironmentSpec.preset(env)
                if isinstance(env, str)
                else EnvironmentSpec.from_json(env)
            )
        except EnvError as e:
            raise _error(400, "invalid_env", str(e))

        if agent_kind == "linear_scratch":
            agent = OnlineLinearLearner.from_scratch(spec, alpha=alpha)
        else:
            ckpt = resolve_checkpoint(body.get("checkpoint"))
            if ckpt.model_spec.env != spec:
                raise _error(400, "env_mismatch", "checkpoint was trained for a different env")
            if agent_kind == "blr_hac":
                agent = make_blr_hac(ckpt, alpha=alpha)
            else:
                agent = OnlineTransformerLearner(
                    ckpt, lr=float(body.get("online_lr", DESK_PROFILE["online_lr"]))
                )

        sid = f"s{next(counter)}"
        session = Session(
            session_id=sid, spec=spec, agent_kind=agent_kind, agent=agent,
            seed=seed, alpha=alpha, state=None,
        )
        if body.get("simulated_leader"):
            # server-held test preference; used only to auto-generate turns
            cfg = population_config(
                {**DESK_PROFILE, "prefs_per_split": {"train": 0, "eval": 0, "test": 1}},
                int(body.get("leader_seed", seed)),
            )
            session.leader_theta = sample_population(cfg, spec)["test"][0].theta
        session.start_episode()
        sessions[sid] = session
        session.emit("state", _state_json(session.state))
        return {
            "schema": SCHEMA,
            "session_id": sid,
            "agent_kind": agent_kind,
            "env": spec.to_json(),
            "episode_index": 0,
            "state": _state_json(session.state),
            "theta_snapshot": session.theta_snapshot(),
        }

    @app.get("/v1/sessions/{sid}/state")
    def get_state(sid: str):
        s = get_session(sid)
        with s.lock:
            return {
                "schema": SCHEMA,
                "session_id": sid,
                "episode_index": s.episode_index,
                "pending": None if s.pending is None else {
                    "object_id": s.pending["a_h"], "proposal": s.pending["a_r"],
                },
                "state": _state_json(s.state),
            }

    @app.get("/v1/sessions/{sid}/metrics")
    def get_metrics(sid: str):
        s = get_session(sid)
        with s.lock:
            return s.metrics_json()

    @app.get("/v1/checkpoints")
    def list_checkpoints():
        names = []
        if ckpt_dir is not None and ckpt_dir.is_dir():
            for path in sorted(ckpt_dir.glob("*.json")):
                if path.name.endswith(".manifest.json"):
                    continue
                try:
                    with open(path) as f:
                        payload = json.load(f)
                    names.append({"name": path.name, "model_spec": payload["model_spec"]})
                except (json.JSONDecodeError, KeyError):
                    continue
        return {"schema": SCHEMA, "checkpoints": names}

    def do_pick(s: Session, a_h: int) -> dict:
        if s.pending is not None:
            raise _error(409, "out_of_turn", "a correction is already pending")
        if a_h not in s.state.placement or s.state.placement[a_h] != VACANT:
            raise _error(400, "invalid_pick", f"object {a_h} is not an unplaced episode object")
        vacant = vacant_locations(s.state)
        a_r = int(s.agent.propose(a_h, vacant))
        dist = action_distribution(_current_theta(s.agent), a_h, vacant)
        s.inference_flops += s.agent.step_inference_flops
        s.pending = {"a_h": a_h, "a_r": a_r, "vacant": vacant}
        return {
            "schema": SCHEMA,
            "session_id": s.session_id,
            "object_id": a_h,
            "proposal": a_r,
            "distribution": {str(l): float(dist[l]) for l in vacant},
            "vacant": vacant,
        }

    def do_correction(s: Session, a_c: int) -> dict:
        if s.pending is None:
            raise _error(409, "no_pending_turn", "submit a pick first")
        if a_c not in s.pending["vacant"]:
            raise _error(400, "invalid_location", f"location {a_c} is occupied or unknown")
        a_h, a_r = s.pending["a_h"], s.pending["a_r"]
        s.agent.learn(a_h, a_r, a_c)
        s.update_flops += s.agent.step_update_flops
        delta = []
        if isinstance(s.agent, OnlineLinearLearner) and a_r != a_c:
            delta = [
                {"object": a_h, "location": a_r, "delta": -s.agent.alpha},
                {"object": a_h, "location": a_c, "delta": s.agent.alpha},
            ]
        after = apply_placement(s.state, a_h, a_c)
        after.turn_index = s.state.turn_index + 1
        s.state = after
        s.pending = None
        s.steps_total += 1
        accurate = a_r == a_c
        s.disagreements += int(not accurate)

        episode_complete = not unplaced_objects(s.state)
        if episode_complete:
            acc = 1.0 - s.disagreements / s.spec.num_locations
            s.per_episode_accuracy.append(acc)
            s.agent.end_episode(seed=episode_seed(s.seed, 0, 1000 + s.episode_index))
            s.update_flops += s.agent.episode_update_flops
            s.episode_index += 1
            s.start_episode()

        s.emit("state", _state_json(s.state))
        s.emit("turn", {
            "object_id": a_h, "proposal": a_r, "correction": a_c,
            "accurate": accurate, "theta_delta": delta,
        })
        s.emit("metrics", s.metrics_json())
        s.emit("theta", {"theta_snapshot": s.theta_snapshot()})
        return {
            "schema": SCHEMA,
            "session_id": s.session_id,
            "state": _state_json(s.state),
            "theta_delta": delta,
            "accurate": accurate,
            "episode_complete": episode_complete,
            "episode_index": s.episode_index,
            "per_episode_accuracy": s.per_episode_accuracy,
        }

    @app.post("/v1/sessions/{sid}/pick")
    def submit_pick(sid: str, body: dict):
        s = get_session(sid)
        with s.lock:
            return do_pick(s, int(body["object_id"]))

    @app.post("/v1/sessions/{sid}/correction")
    def submit_correction(sid: str, body: dict):
        s = get_session(sid)
        with s.lock:
            return do_correction(s, int(body["location_id"]))

    @app.post("/v1/sessions/{sid}/auto-turn")
    def auto_turn(sid: str):
        """Simulated-leader turn: the server picks and corrects from its own preference."""
        s = get_session(sid)
        with s.lock:
            if s.leader_theta is None:
                raise _error(409, "not_simulated", "session was not created with simulated_leader")
            if s.pending is not None:
                raise _error(409, "out_of_turn", "a correction is already pending")
            a_h = int(s.leader_pick_rng.choice(unplaced_objects(s.state)))
            pick = do_pick(s, a_h)
            a_c = expert_placement(s.leader_theta, a_h, s.pending["vacant"])
            result = do_correction(s, a_c)
            result["pick"] = {k: pick[k] for k in ("object_id", "proposal", "distribution")}
            return result

    @app.get("/v1/sessions/{sid}/events")
    def get_events(sid: str, since: int = 0):
        s = get_session(sid)
        with s.lock:
            events = s.events[since:]
            return {"schema": SCHEMA, "events": events, "next": since + len(events)}

    @app.get("/v1/sessions/{sid}/stream")
    async def stream_events(sid: str, since: int = 0):
        s = get_session(sid)

        async def gen():
            cursor = since
            while True:
                with s.lock:
                    chunk = s.events[cursor:]
                for event in chunk:
                    yield f"event: {event['type']}\ndata: {json.dumps(event)}\n\n"
                    cursor += 1
                await asyncio.sleep(0.05)

        return StreamingResponse(gen(), media_type="text/event-stream")

    return app
