"""Model families mapping interaction histories to placement policies.

Four families (shallow_linear, deep_linear, mlp, causal_transformer), each in
two variants: with the inductive prior the model emits an O x L weight matrix
used as a linear placement policy; without it the model emits L action logits
directly. All models run in float64 on CPU.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .env import EnvironmentSpec
from .tokens import PAD, VOCAB_SIZE, DEFAULT_HISTORY_LEN, sequence_length

FAMILIES = ("shallow_linear", "deep_linear", "mlp", "causal_transformer")

# Large finite mask bias: exp() underflows to exactly 0 in float64, so masked
# attention weights and masked action probabilities are exactly zero without
# producing NaNs on fully-masked rows.
MASK_BIAS = -1e9


@dataclass(frozen=True)
class ModelSpec:
    family: str
    env: EnvironmentSpec
    with_prior: bool = True
    hidden_dim: int = 64
    num_layers: int = 3
    num_heads: int = 4
    k: int = DEFAULT_HISTORY_LEN

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["env"] = self.env.to_json()
        return d

    @staticmethod
    def from_json(obj: dict) -> "ModelSpec":
        obj = dict(obj)
        obj["env"] = EnvironmentSpec.from_json(obj["env"])
        return ModelSpec(**obj)


@dataclass
class ThetaEstimate:
    theta_hat: np.ndarray  # (O, L)
    source: str  # bootstrap | online | scratch

    def __post_init__(self):
        self.theta_hat = np.asarray(self.theta_hat, dtype=np.float64)
        if not np.all(np.isfinite(self.theta_hat)):
            raise ValueError("theta estimate must be finite")


def _as_long(x) -> torch.Tensor:
    return torch.as_tensor(np.asarray(x), dtype=torch.long)


def _as_bool(x) -> torch.Tensor:
    return torch.as_tensor(np.asarray(x), dtype=torch.bool)


class PreferenceModel(nn.Module):
    """Shared surface for all families; subclasses implement the encoder."""

    def __init__(self, model_spec: ModelSpec):
        super().__init__()
        self.model_spec = model_spec
        self.O = model_spec.env.num_objects
        self.L = model_spec.env.num_locations

    def encode(self, tokens: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def embed_object(self, a_h: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def forward_theta(self, tokens, mask) -> torch.Tensor:
        """(B, S) tokens -> (B, O, L) policy weight matrices."""
        if not self.model_spec.with_prior:
            raise ValueError("forward_theta requires a prior-head model")
        h = self.encode(_as_long(tokens), _as_bool(mask))
        return self.theta_head(h).view(-1, self.O, self.L)

    def forward_logits(self, tokens, mask, a_h) -> torch.Tensor:
        """(B, S) tokens + (B,) picks -> (B, L) placement logits."""
        if self.model_spec.with_prior:
            raise ValueError("forward_logits requires a no-prior model")
        h = self.encode(_as_long(tokens), _as_bool(mask))
        z = torch.cat([h, self.embed_object(_as_long(a_h))], dim=-1)
        return self.logit_head(z)

    def predict_logits(self, tokens, mask, a_h) -> torch.Tensor:
        """Head-agnostic (B, L) logits for the picked objects."""
        a_h = _as_long(a_h)
        if self.model_spec.with_prior:
            theta = self.forward_theta(tokens, mask)
            return theta[torch.arange(theta.shape[0]), a_h]
        return self.forward_logits(tokens, mask, a_h)


class ShallowLinear(PreferenceModel):
    """A single O x L parameter matrix; input-independent."""

    def __init__(self, model_spec: ModelSpec):
        super().__init__(model_spec)
        self.theta = nn.Parameter(torch.zeros(self.O, self.L, dtype=torch.float64))

    def forward_theta(self, tokens, mask):
        if not self.model_spec.with_prior:
            raise ValueError("forward_theta requires a prior-head model")
        b = _as_long(tokens).shape[0]
        return self.theta.unsqueeze(0).expand(b, -1, -1)

    def forward_logits(self, tokens, mask, a_h):
        if self.model_spec.with_prior:
            raise ValueError("forward_logits requires a no-prior model")
        return self.theta[_as_long(a_h)]

    def predict_logits(self, tokens, mask, a_h):
        return self.theta[_as_long(a_h)]


class _PooledEncoder(PreferenceModel):
    """Masked mean-pool of token embeddings followed by a feed-forward stack."""

    nonlinear: bool

    def __init__(self, model_spec: ModelSpec):
        super().__init__(model_spec)
        H = model_spec.hidden_dim
        bias = self.nonlinear  # DeepLinear stays bias-free so it is exactly linear
        self.embedding = nn.Embedding(VOCAB_SIZE, H, dtype=torch.float64)
        self.layers = nn.ModuleList(
            [nn.Linear(H, H, bias=bias, dtype=torch.float64) for _ in range(model_spec.num_layers)]
        )
        if model_spec.with_prior:
            self.theta_head = nn.Linear(H, self.O * self.L, bias=bias, dtype=torch.float64)
            _zero_head(self.theta_head)
        elif self.nonlinear:
            self.logit_head = nn.Sequential(
                nn.Linear(2 * H, H, dtype=torch.float64),
                nn.ReLU(),
                nn.Linear(H, self.L, dtype=torch.float64),
            )
            _zero_head(self.logit_head[-1])
        else:
            self.logit_head = nn.Linear(2 * H, self.L, bias=False, dtype=torch.float64)
            _zero_head(self.logit_head)

    def embed_object(self, a_h):
        from .tokens import OBJ_BASE

        return self.embedding(a_h + OBJ_BASE)

    def encode(self, tokens, mask):
        emb = self.embedding(tokens) * mask.unsqueeze(-1).to(self.embedding.weight.dtype)
        pooled = emb.sum(dim=1) / mask.sum(dim=1, keepdim=True).to(emb.dtype)
        h = pooled
        for layer in self.layers:
            h = layer(h)
            if self.nonlinear:
                h = F.relu(h)
        return h


class DeepLinear(_PooledEncoder):
    nonlinear = False


class MLP(_PooledEncoder):
    nonlinear = True


class _Block(nn.Module):
    """Pre-norm transformer block with additive attention masking."""

    def __init__(self, H: int, num_heads: int):
        super().__init__()
        assert H % num_heads == 0
        self.num_heads = num_heads
        self.head_dim = H // num_heads
        self.ln1 = nn.LayerNorm(H, dtype=torch.float64)
        self.ln2 = nn.LayerNorm(H, dtype=torch.float64)
        self.qkv = nn.Linear(H, 3 * H, dtype=torch.float64)
        self.proj = nn.Linear(H, H, dtype=torch.float64)
        self.ff = nn.Sequential(
            nn.Linear(H, 4 * H, dtype=torch.float64),
            nn.GELU(),
            nn.Linear(4 * H, H, dtype=torch.float64),
        )

    def forward(self, x: torch.Tensor, attn_bias: torch.Tensor) -> torch.Tensor:
        B, S, H = x.shape
        q, k, v = self.qkv(self.ln1(x)).chunk(3, dim=-1)
        q = q.view(B, S, self.num_heads, self.head_dim).transpose(1, 2)
        k = k.view(B, S, self.num_heads, self.head_dim).transpose(1, 2)
        v = v.view(B, S, self.num_heads, self.head_dim).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / self.head_dim**0.5
        scores = scores + attn_bias  # (B, 1, S, S)
        att = torch.softmax(scores, dim=-1)
        out = (att @ v).transpose(1, 2).reshape(B, S, H)
        x = x + self.proj(out)
        x = x + self.ff(self.ln2(x))
        return x


class CausalTransformer(PreferenceModel):
    """Decoder-only transformer over the interaction-history token sequence."""

    def __init__(self, model_spec: ModelSpec):
        super().__init__(model_spec)
        H = model_spec.hidden_dim
        S = sequence_length(model_spec.k)
        self.embedding = nn.Embedding(VOCAB_SIZE, H, dtype=torch.float64)
        self.pos_embedding = nn.Embedding(S, H, dtype=torch.float64)
        self.blocks = nn.ModuleList(
            [_Block(H, model_spec.num_heads) for _ in range(model_spec.num_layers)]
        )
        self.ln_f = nn.LayerNorm(H, dtype=torch.float64)
        if model_spec.with_prior:
            self.theta_head = nn.Linear(H, self.O * self.L, dtype=torch.float64)
            _zero_head(self.theta_head)
        else:
            self.logit_head = nn.Sequential(
                nn.Linear(2 * H, H, dtype=torch.float64),
                nn.ReLU(),
                nn.Linear(H, self.L, dtype=torch.float64),
            )
            _zero_head(self.logit_head[-1])

    def embed_object(self, a_h):
        from .tokens import OBJ_BASE

        return self.embedding(a_h + OBJ_BASE)

    def _attn_bias(self, mask: torch.Tensor) -> torch.Tensor:
        # Allowed: causal AND key is non-PAD; the diagonal is always allowed so
        # PAD queries attend (harmlessly) to themselves instead of to nothing.
        B, S = mask.shape
        causal = torch.tril(torch.ones(S, S, dtype=torch.bool))
        allowed = causal.unsqueeze(0) & mask.unsqueeze(1)
        allowed = allowed | torch.eye(S, dtype=torch.bool).unsqueeze(0)
        bias = torch.zeros(B, S, S, dtype=self.embedding.weight.dtype)
        bias.masked_fill_(~allowed, MASK_BIAS)
        return bias.unsqueeze(1)

    def encode(self, tokens, mask):
        B, S = tokens.shape
        pos = torch.arange(S)
        x = self.embedding(tokens) + self.pos_embedding(pos).unsqueeze(0)
        bias = self._attn_bias(mask)
        for block in self.blocks:
            x = block(x, bias)
        x = self.ln_f(x)
        return x[:, -1, :]  # final position holds the current pick token


def _zero_head(layer: nn.Linear) -> None:
    # Untrained models emit all-zero weights, i.e. a uniform masked policy.
    with torch.no_grad():
        layer.weight.zero_()
        if layer.bias is not None:
            layer.bias.zero_()


_FAMILY_CLASSES = {
    "shallow_linear": ShallowLinear,
    "deep_linear": DeepLinear,
    "mlp": MLP,
    "causal_transformer": CausalTransformer,
}


def build_model(
    model_spec: ModelSpec, seed: int = 0, dtype: torch.dtype = torch.float64
) -> PreferenceModel:
    torch.manual_seed(seed)
    model = _FAMILY_CLASSES[model_spec.family](model_spec)
    if dtype is not torch.float64:
        model.to(dtype)
    return model


def action_distribution(theta_hat, a_h: int, vacant) -> np.ndarray:
    """Softmax of a theta row restricted to vacant locations (length-L vector)."""
    theta = theta_hat.theta_hat if isinstance(theta_hat, ThetaEstimate) else np.asarray(theta_hat)
    vacant = sorted(int(l) for l in vacant)
    if not vacant:
        raise ValueError("no vacant locations")
    row = theta[a_h, vacant]
    z = np.exp(row - row.max())
    probs = np.zeros(theta.shape[1])
    probs[vacant] = z / z.sum()
    return probs


def masked_cross_entropy(logits: torch.Tensor, vacant_mask, labels) -> torch.Tensor:
    """Mean -log p(label) under a softmax restricted to vacant locations."""
    vacant_mask = _as_bool(vacant_mask)
    labels = _as_long(labels)
    if not bool(vacant_mask[torch.arange(labels.shape[0]), labels].all()):
        raise ValueError("label outside the vacant support")
    masked = logits + torch.where(
        vacant_mask, torch.zeros((), dtype=logits.dtype), torch.tensor(MASK_BIAS, dtype=logits.dtype)
    )
    logp = F.log_softmax(masked, dim=-1)
    return -logp[torch.arange(labels.shape[0]), labels].mean()


@dataclass
class Checkpoint:
    model_spec: ModelSpec
    state: dict  # parameter name -> flat list of floats
    metadata: dict = field(default_factory=dict)

    def build(self, dtype: torch.dtype = torch.float64) -> PreferenceModel:
        model = build_model(self.model_spec, dtype=dtype)
        sd = model.state_dict()
        with torch.no_grad():
            for name, flat in self.state.items():
                sd[name].copy_(torch.tensor(flat, dtype=dtype).view(sd[name].shape))
        model.load_state_dict(sd)
        return model

    @staticmethod
    def from_model(model: PreferenceModel, metadata: dict | None = None) -> "Checkpoint":
        state = {
            name: [float(x) for x in tensor.detach().reshape(-1).tolist()]
            for name, tensor in model.state_dict().items()
        }
        return Checkpoint(model_spec=model.model_spec, state=state, metadata=metadata or {})

    def save(self, path) -> None:
        payload = {
            "model_spec": self.model_spec.to_json(),
            "vocabulary": {"size": VOCAB_SIZE, "pad": PAD},
            "state": self.state,
            "metadata": self.metadata,
        }
        with open(path, "w") as f:
            json.dump(payload, f, sort_keys=True)
            f.write("\n")

    @staticmethod
    def load(path) -> "Checkpoint":
        with open(path) as f:
            payload = json.load(f)
        return Checkpoint(
            model_spec=ModelSpec.from_json(payload["model_spec"]),
            state=payload["state"],
            metadata=payload.get("metadata", {}),
        )
