"""Adapt to a new leader online from their corrections.

The shallow linear learner updates two entries of theta per disagreement
(cost: 2 x O x L FLOPs). Starting it from a pretrained model's theta estimate
(BLR-HAC) skips most of the early mistakes; when the leader changes their
mind mid-session, the cheap updates recover quickly.
"""

import torch

from blrhac import (
    EnvironmentSpec,
    ModelSpec,
    OnlineLinearLearner,
    PopulationConfig,
    TrainConfig,
    build_model,
    collect_demonstrations,
    make_blr_hac,
    nonstationary_experiment,
    sample_population,
    stationary_experiment,
    train,
)

spec = EnvironmentSpec.preset("small")
pop = sample_population(
    PopulationConfig(prefs_per_split={"train": 8, "eval": 4, "test": 8},
                     episodes_per_pref={"train": 10, "eval": 5, "test": 5}, seed=0),
    spec,
)
d_train = collect_demonstrations(pop["train"], spec, 10, seed=0, split="train")
d_eval = collect_demonstrations(pop["eval"], spec, 5, seed=1, split="eval")

ms = ModelSpec("causal_transformer", spec, with_prior=True,
               hidden_dim=32, num_layers=2, num_heads=2, k=10)
ckpt = train(build_model(ms, seed=0, dtype=torch.float32), d_train, d_eval,
             TrainConfig(learning_rate=0.1, max_epochs=5, seed=0))

agents = {
    "linear (scratch)": lambda: OnlineLinearLearner.from_scratch(spec, alpha=10.0),
    "blr-hac (bootstrapped)": lambda: make_blr_hac(ckpt, alpha=10.0),
}

print("stationary leader:")
for name, factory in agents.items():
    curve = stationary_experiment(factory, pop["test"], spec, episodes=10, seed=1,
                                  agent_name=name)
    acc = curve.per_episode_accuracy
    print(f"  {name:24s} episode 1: {acc[0]:.2f}  episode 10: {acc[-1]:.2f}")

print("leader switches preference after episode 5:")
for name, factory in agents.items():
    curve = nonstationary_experiment(factory, pop["test"], spec, episodes=10,
                                     switch_at=5, seed=1, agent_name=name)
    acc = curve.per_episode_accuracy
    print(f"  {name:24s} before switch: {acc[4]:.2f}  at switch: {acc[5]:.2f}  "
          f"recovered: {acc[-1]:.2f}")
