"""Test-time adaptation: the bootstrapped linear learner, baselines, and the
stationary / nonstationary experiment protocols."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
import torch

from .env import EnvironmentSpec, run_episode
from .flops import count_flops, linear_inference_flops, linear_update_flops
from .models import Checkpoint, ThetaEstimate, masked_cross_entropy
from .population import PreferenceMatrix, episode_seed, expert_placement
from .tokens import HistoryWindow, encode_history


def sgd_update(learner: "OnlineLinearLearner", a_h: int, a_r: int, a_c: int) -> "OnlineLinearLearner":
    """Rank-1 correction update: penalize the proposal, reward the correction.

    Touches at most two entries of theta and is an exact no-op when the
    correction agrees with the proposal.
    """
    O, L = learner.theta.shape
    if not (0 <= a_h < O and 0 <= a_r < L and 0 <= a_c < L):
        raise ValueError("action id out of range")
    if a_r == a_c:
        return learner
    learner.theta[a_h, a_r] -= learner.alpha
    learner.theta[a_h, a_c] += learner.alpha
    return learner


class OnlineLinearLearner:
    """Shallow linear policy adapted by per-step logistic-regression updates."""

    def __init__(self, theta, alpha: float = 10.0, source: str = "scratch"):
        if isinstance(theta, ThetaEstimate):
            source = theta.source
            theta = theta.theta_hat
        self.theta = np.array(theta, dtype=np.float64)
        self.alpha = float(alpha)
        self.source = source
        env_flops = self.theta.shape[0] * self.theta.shape[1]
        self.step_inference_flops = env_flops
        self.step_update_flops = 2 * env_flops
        self.episode_update_flops = 0

    @staticmethod
    def from_scratch(spec: EnvironmentSpec, alpha: float = 10.0) -> "OnlineLinearLearner":
        return OnlineLinearLearner(
            np.zeros((spec.num_objects, spec.num_locations)), alpha=alpha, source="scratch"
        )

    def propose(self, a_h: int, vacant) -> int:
        return expert_placement(self.theta, a_h, vacant)

    def learn(self, a_h: int, a_r: int, a_c: int) -> None:
        sgd_update(self, a_h, a_r, a_c)

    def end_episode(self, seed: int = 0) -> None:
        pass


def bootstrap_theta(checkpoint: Checkpoint, history: HistoryWindow | None = None) -> ThetaEstimate:
    """Initial theta for the online learner, emitted by a pretrained prior model."""
    if not checkpoint.model_spec.with_prior:
        raise ValueError("bootstrapping needs a prior-head checkpoint")
    model = checkpoint.build()
    if history is None:
        history = HistoryWindow(current_pick=None, entries=[], k=checkpoint.model_spec.k)
    seq = encode_history(history, checkpoint.model_spec.env)
    with torch.no_grad():
        theta = model.forward_theta(seq.tokens[None], seq.attention_mask[None])[0].numpy()
    return ThetaEstimate(theta_hat=theta, source="bootstrap")


def make_blr_hac(checkpoint: Checkpoint, alpha: float = 10.0) -> OnlineLinearLearner:
    """Bootstrapped linear learner: theta from the checkpoint, then per-step SGD."""
    return OnlineLinearLearner(bootstrap_theta(checkpoint), alpha=alpha)


class OnlineTransformerLearner:
    """Prior-head transformer fine-tuned on the session replay between episodes."""

    def __init__(self, checkpoint: Checkpoint, lr: float = 1e-2, steps_between_episodes: int = 5,
                 batch_size: int = 64):
        if not checkpoint.model_spec.with_prior:
            raise ValueError("online transformer adaptation uses the prior head")
        self.model = checkpoint.build()
        self.spec = checkpoint.model_spec.env
        self.k = checkpoint.model_spec.k
        self.lr = float(lr)
        self.steps_between_episodes = steps_between_episodes
        self.batch_size = batch_size
        self.opt = torch.optim.SGD(self.model.parameters(), lr=self.lr)
        self.replay: list[tuple[int, int, int]] = []
        self.replay_vacant: list[list[int]] = []
        self._pending_vacant: list[int] | None = None
        ms = checkpoint.model_spec
        self.step_inference_flops = count_flops(ms, "inference")
        self.step_update_flops = 0
        self.episode_update_flops = count_flops(
            ms, "update", sgd_steps=steps_between_episodes, batch_size=batch_size
        )

    def propose(self, a_h: int, vacant) -> int:
        self._pending_vacant = sorted(int(v) for v in vacant)
        window = HistoryWindow(current_pick=a_h, entries=self.replay[-self.k :], k=self.k)
        seq = encode_history(window, self.spec)
        with torch.no_grad():
            theta = self.model.forward_theta(seq.tokens[None], seq.attention_mask[None])[0].numpy()
        return expert_placement(theta, a_h, self._pending_vacant)

    def learn(self, a_h: int, a_r: int, a_c: int) -> None:
        vacant = self._pending_vacant or list(range(self.spec.num_locations))
        self.replay.append((a_h, a_r, a_c))
        self.replay_vacant.append(vacant)
        self._pending_vacant = None

    def end_episode(self, seed: int = 0) -> None:
        online_transformer_finetune(self, seed=seed)


def online_transformer_finetune(learner: OnlineTransformerLearner, seed: int = 0) -> OnlineTransformerLearner:
    """A fixed number of SGD steps on minibatches drawn from the session replay."""
    n = len(learner.replay)
    if n == 0:
        return learner
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF1]))
    spec = learner.spec
    for _ in range(learner.steps_between_episodes):
        idx = rng.choice(n, size=min(learner.batch_size, n), replace=False)
        tokens, masks, picks, vacants, labels = [], [], [], [], []
        for i in idx:
            a_h, _a_r, a_c = learner.replay[i]
            window = HistoryWindow(
                current_pick=a_h, entries=learner.replay[max(0, i - learner.k) : i], k=learner.k
            )
            seq = encode_history(window, spec)
            vac = np.zeros(spec.num_locations, dtype=bool)
            vac[learner.replay_vacant[i]] = True
            tokens.append(seq.tokens)
            masks.append(seq.attention_mask)
            picks.append(a_h)
            vacants.append(vac)
            labels.append(a_c)
        logits = learner.model.predict_logits(np.stack(tokens), np.stack(masks), np.asarray(picks))
        loss = masked_cross_entropy(logits, np.stack(vacants), np.asarray(labels))
        if not torch.isfinite(loss):
            raise RuntimeError("online fine-tuning diverged (non-finite loss)")
        learner.opt.zero_grad()
        loss.backward()
        learner.opt.step()
    return learner


def run_adaptation_episode(agent, spec: EnvironmentSpec, theta_true: np.ndarray, seed: int):
    """One collaborative episode: agent proposes, the expert corrects, the agent learns."""
    disagreements = []

    def corrector(a_h, vacant):
        return expert_placement(theta_true, a_h, vacant)

    def on_step(record):
        agent.learn(record.a_h, record.a_r, record.a_c)
        disagreements.append(record.a_r != record.a_c)

    episode = run_episode(spec, seed, robot_policy=agent.propose, corrector=corrector, on_step=on_step)
    accuracy = 1.0 - float(np.mean(disagreements))
    return episode, accuracy


@dataclass
class AdaptationCurve:
    protocol: str  # stationary | nonstationary
    env_name: str
    agent_name: str
    per_episode_accuracy: list[float]
    stderr: list[float]
    cumulative_update_flops: list[int]
    cumulative_inference_flops: list[int]
    switch_episode: int | None = None
    per_pref_accuracy: np.ndarray | None = field(default=None, repr=False)


def _run_protocol(
    agent_factory,
    population: list[PreferenceMatrix],
    spec: EnvironmentSpec,
    episodes: int,
    seed: int,
    switch_at: int | None,
    switch_selector=None,
    agent_name: str = "agent",
) -> AdaptationCurve:
    acc = np.zeros((len(population), episodes))
    cum_inf = np.zeros(episodes, dtype=np.int64)
    cum_upd = np.zeros(episodes, dtype=np.int64)
    for p, pref in enumerate(population):
        agent = agent_factory()
        theta_true = pref.theta
        if switch_at is not None:
            switch_rng = np.random.default_rng(np.random.SeedSequence([seed, p, 0x5151]))
            if switch_selector is not None:
                new_pref = switch_selector(switch_rng, population, p)
            else:
                others = [q for q in range(len(population)) if q != p]
                new_pref = population[int(switch_rng.choice(others))]
        for e in range(episodes):
            if switch_at is not None and e == switch_at:
                theta_true = new_pref.theta
            _, ep_acc = run_adaptation_episode(agent, spec, theta_true, episode_seed(seed, p, e))
            agent.end_episode(seed=episode_seed(seed, p, 1000 + e))
            acc[p, e] = ep_acc
            if p == 0:
                steps = spec.num_locations
                cum_inf[e] = (cum_inf[e - 1] if e else 0) + steps * agent.step_inference_flops
                cum_upd[e] = (
                    (cum_upd[e - 1] if e else 0)
                    + steps * agent.step_update_flops
                    + agent.episode_update_flops
                )
    return AdaptationCurve(
        protocol="stationary" if switch_at is None else "nonstationary",
        env_name=spec.name,
        agent_name=agent_name,
        per_episode_accuracy=[float(x) for x in acc.mean(axis=0)],
        stderr=[float(x) for x in acc.std(axis=0, ddof=1) / np.sqrt(len(population))]
        if len(population) > 1
        else [0.0] * episodes,
        cumulative_update_flops=[int(x) for x in cum_upd],
        cumulative_inference_flops=[int(x) for x in cum_inf],
        switch_episode=switch_at,
        per_pref_accuracy=acc,
    )


def stationary_experiment(agent_factory, population, spec, episodes: int = 20, seed: int = 0,
                          agent_name: str = "agent") -> AdaptationCurve:
    return _run_protocol(agent_factory, population, spec, episodes, seed, None, agent_name=agent_name)


def nonstationary_experiment(agent_factory, population, spec, episodes: int = 20, switch_at: int = 10,
                             seed: int = 0, switch_selector=None, agent_name: str = "agent") -> AdaptationCurve:
    if len(population) < 2 and switch_selector is None:
        raise ValueError("nonstationary protocol needs at least two preferences")
    return _run_protocol(
        agent_factory, population, spec, episodes, seed, switch_at,
        switch_selector=switch_selector, agent_name=agent_name,
    )


def curves_to_csv(path, curves: list[AdaptationCurve]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            ["protocol", "env", "agent", "episode", "mean_accuracy", "stderr",
             "cum_update_flops", "cum_inference_flops"]
        )
        for c in curves:
            for e in range(len(c.per_episode_accuracy)):
                w.writerow(
                    [c.protocol, c.env_name, c.agent_name, e + 1,
                     repr(c.per_episode_accuracy[e]), repr(c.stderr[e]),
                     c.cumulative_update_flops[e], c.cumulative_inference_flops[e]]
                )


def curves_to_json(path, curves: list[AdaptationCurve]) -> None:
    payload = [
        {
            "protocol": c.protocol,
            "env": c.env_name,
            "agent": c.agent_name,
            "switch_episode": c.switch_episode,
            "mean_accuracy": c.per_episode_accuracy,
            "stderr": c.stderr,
            "cum_update_flops": c.cumulative_update_flops,
            "cum_inference_flops": c.cumulative_inference_flops,
        }
        for c in curves
    ]
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True)
        f.write("\n")
