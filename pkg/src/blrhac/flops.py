"""Analytic FLOP accounting under a dense multiply-accumulate convention.

The linear placement policy costs O x L per inference (one-hot row selection
times the weight matrix) and 2 x O x L per correction update (two rank-1
outer products). Neural families are charged per-layer multiply-accumulate
counts for a single-sequence forward pass; an update is forward + backward
(2x forward) per SGD step per replayed sequence.
"""

from __future__ import annotations

from .env import EnvironmentSpec
from .models import ModelSpec, PreferenceModel
from .tokens import sequence_length


def linear_inference_flops(env: EnvironmentSpec) -> int:
    return env.num_objects * env.num_locations


def linear_update_flops(env: EnvironmentSpec) -> int:
    return 2 * env.num_objects * env.num_locations


def _forward_flops(ms: ModelSpec) -> int:
    O, L, H, S = ms.env.num_objects, ms.env.num_locations, ms.hidden_dim, sequence_length(ms.k)
    if ms.family == "shallow_linear":
        return O * L
    if ms.family in ("deep_linear", "mlp"):
        total = S * H  # masked mean pool
        total += ms.num_layers * H * H
    elif ms.family == "causal_transformer":
        per_block = 4 * S * H * H  # qkv + output projections
        per_block += 2 * S * S * H  # attention scores + weighted values
        per_block += 2 * S * H * 4 * H  # feed-forward
        total = ms.num_layers * per_block
    else:
        raise ValueError(f"unknown family {ms.family!r}")
    if ms.with_prior:
        total += H * O * L
    else:
        total += 2 * H * H + H * L
    return total


def count_flops(
    model,
    mode: str,
    env: EnvironmentSpec | None = None,
    *,
    sgd_steps: int = 5,
    batch_size: int = 64,
) -> int:
    """Nominal FLOP count for one inference or one update of the given policy.

    `model` is either the string "linear" (the shallow online policy, which
    needs `env`) or a ModelSpec / PreferenceModel.
    """
    if mode not in ("inference", "update"):
        raise ValueError(f"mode must be inference or update, got {mode!r}")
    if isinstance(model, PreferenceModel):
        model = model.model_spec
    if isinstance(model, ModelSpec) and model.family == "shallow_linear":
        env = model.env
        model = "linear"
    if model == "linear":
        if env is None:
            raise ValueError("linear policy FLOPs need an environment spec")
        return linear_inference_flops(env) if mode == "inference" else linear_update_flops(env)
    fwd = _forward_flops(model)
    if mode == "inference":
        return fwd
    return sgd_steps * batch_size * 3 * fwd
