"""Behavior cloning over demonstration datasets, sweeps, and zero-shot eval."""

from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass, field

import numpy as np
import torch

from .env import vacant_locations
from .models import (
    MASK_BIAS,
    Checkpoint,
    ModelSpec,
    PreferenceModel,
    build_model,
    masked_cross_entropy,
)
from .population import DemonstrationDataset
from .tokens import HistoryWindow, encode_history


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 100
    early_stop_patience: int = 10
    seed: int = 0


@dataclass
class EvalReport:
    accuracy: float
    per_environment: dict = field(default_factory=dict)
    num_predictions: int = 0


@dataclass
class ExampleSet:
    tokens: np.ndarray  # (N, S)
    mask: np.ndarray  # (N, S)
    a_h: np.ndarray  # (N,)
    vacant_mask: np.ndarray  # (N, L)
    labels: np.ndarray  # (N,)

    def __len__(self):
        return len(self.labels)


def build_training_examples(dataset: DemonstrationDataset, k: int) -> ExampleSet:
    """One example per demonstration step.

    History windows accumulate across episodes of the same preference (episode
    boundaries carry no information the agent would lack at test time) but
    never cross preference boundaries.
    """
    spec = dataset.episodes[0].spec
    L = spec.num_locations
    tokens, masks, picks, vacants, labels = [], [], [], [], []
    history: dict[str, list[tuple[int, int, int]]] = {}
    for ep in dataset.episodes:
        triples = history.setdefault(ep.preference_id, [])
        for step in ep.steps:
            window = HistoryWindow(current_pick=step.a_h, entries=triples[-k:], k=k)
            seq = encode_history(window, spec)
            vac = np.zeros(L, dtype=bool)
            vac[vacant_locations(step.state_before)] = True
            if not vac[step.a_c]:
                raise ValueError("demonstration label is not vacant in its own state")
            tokens.append(seq.tokens)
            masks.append(seq.attention_mask)
            picks.append(step.a_h)
            vacants.append(vac)
            labels.append(step.a_c)
            triples.append((step.a_h, step.a_r, step.a_c))
    return ExampleSet(
        tokens=np.stack(tokens),
        mask=np.stack(masks),
        a_h=np.asarray(picks),
        vacant_mask=np.stack(vacants),
        labels=np.asarray(labels),
    )


def _example_accuracy(model: PreferenceModel, examples: ExampleSet, batch_size: int = 256) -> float:
    correct = 0
    with torch.no_grad():
        for lo in range(0, len(examples), batch_size):
            sl = slice(lo, lo + batch_size)
            logits = model.predict_logits(examples.tokens[sl], examples.mask[sl], examples.a_h[sl])
            logits = logits + torch.where(
                torch.as_tensor(examples.vacant_mask[sl]),
                torch.zeros((), dtype=logits.dtype),
                torch.tensor(MASK_BIAS, dtype=logits.dtype),
            )
            pred = logits.argmax(dim=-1).numpy()
            correct += int((pred == examples.labels[sl]).sum())
    return correct / len(examples)


def train(
    model: PreferenceModel,
    d_train: DemonstrationDataset | ExampleSet,
    d_eval: DemonstrationDataset | ExampleSet,
    cfg: TrainConfig,
) -> Checkpoint:
    """SGD behavior cloning with eval-accuracy early stopping."""
    k = model.model_spec.k
    train_ex = d_train if isinstance(d_train, ExampleSet) else build_training_examples(d_train, k)
    eval_ex = d_eval if isinstance(d_eval, ExampleSet) else build_training_examples(d_eval, k)

    opt = torch.optim.SGD(model.parameters(), lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    best_acc = -1.0
    best_state = copy.deepcopy(model.state_dict())
    best_epoch = 0
    eval_history = []
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(train_ex))
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            logits = model.predict_logits(train_ex.tokens[idx], train_ex.mask[idx], train_ex.a_h[idx])
            loss = masked_cross_entropy(logits, train_ex.vacant_mask[idx], train_ex.labels[idx])
            if not torch.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} (lr={cfg.learning_rate})"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
        acc = _example_accuracy(model, eval_ex)
        eval_history.append(acc)
        if acc > best_acc:
            best_acc = acc
            best_state = copy.deepcopy(model.state_dict())
            best_epoch = epoch
        elif epoch - best_epoch >= cfg.early_stop_patience:
            break
    model.load_state_dict(best_state)
    return Checkpoint.from_model(
        model,
        metadata={
            "epochs_run": len(eval_history),
            "best_epoch": best_epoch,
            "best_eval_accuracy": best_acc,
            "eval_history": eval_history,
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "seed": cfg.seed,
        },
    )


def evaluate_zero_shot(model: PreferenceModel, d_test: DemonstrationDataset, spec) -> EvalReport:
    """Replay test episodes, predicting each placement from the history so far.

    The history records the model's own proposals alongside the true
    corrections; no parameters are updated.
    """
    k = model.model_spec.k
    if model.model_spec.env != spec:
        raise ValueError("model was built for a different environment")
    correct = 0
    total = 0
    history: dict[str, list[tuple[int, int, int]]] = {}
    with torch.no_grad():
        for ep in d_test.episodes:
            triples = history.setdefault(ep.preference_id, [])
            for step in ep.steps:
                window = HistoryWindow(current_pick=step.a_h, entries=triples[-k:], k=k)
                seq = encode_history(window, spec)
                logits = model.predict_logits(seq.tokens[None], seq.attention_mask[None], [step.a_h])
                vac = vacant_locations(step.state_before)
                row = logits[0].numpy()
                masked = np.full_like(row, -np.inf)
                masked[vac] = row[vac]
                a_r = int(np.argmax(masked))
                correct += int(a_r == step.a_c)
                total += 1
                triples.append((step.a_h, a_r, step.a_c))
    acc = correct / total
    return EvalReport(accuracy=acc, per_environment={spec.name: acc}, num_predictions=total)


def parameter_count(model: PreferenceModel) -> int:
    return sum(p.numel() for p in model.parameters())


def sweep(
    cells: list[tuple[ModelSpec, TrainConfig]],
    d_train: DemonstrationDataset,
    d_eval: DemonstrationDataset,
    d_test: DemonstrationDataset | None = None,
):
    """Train every cell; keep the best checkpoint per (family, prior) pair.

    Selection is by eval accuracy, ties broken by smaller parameter count,
    then lower learning rate. Returns (best, rows) where rows is a plot-ready
    results table.
    """
    ks = {ms.k for ms, _ in cells}
    train_cache = {k: build_training_examples(d_train, k) for k in ks}
    eval_cache = {k: build_training_examples(d_eval, k) for k in ks}
    best: dict[tuple[str, bool], tuple] = {}
    rows = []
    for ms, cfg in cells:
        model = build_model(ms, seed=cfg.seed)
        ckpt = train(model, train_cache[ms.k], eval_cache[ms.k], cfg)
        eval_acc = ckpt.metadata["best_eval_accuracy"]
        test_acc = (
            evaluate_zero_shot(ckpt.build(), d_test, ms.env).accuracy if d_test else float("nan")
        )
        n_params = parameter_count(model)
        rows.append(
            {
                "family": ms.family,
                "prior": ms.with_prior,
                "lr": cfg.learning_rate,
                "hidden": ms.hidden_dim,
                "layers": ms.num_layers,
                "eval_acc": eval_acc,
                "test_acc": test_acc,
            }
        )
        key = (ms.family, ms.with_prior)
        rank = (-eval_acc, n_params, cfg.learning_rate)
        if key not in best or rank < best[key][0]:
            best[key] = (rank, ckpt)
    return {key: ckpt for key, (_, ckpt) in best.items()}, rows


def lr_grid(values=(1e-3, 1e-4, 1e-5, 1e-6)):
    """Log-uniform grid points over the swept learning-rate interval."""
    return list(values)


def full_grid(env, families=None, priors=(True, False), lrs=None, hidden=64, layers=3, k=50, **cfg_kw):
    """Cartesian (ModelSpec, TrainConfig) grid used by the sweep CLI."""
    families = families or ["shallow_linear", "deep_linear", "mlp", "causal_transformer"]
    lrs = lrs or lr_grid()
    cells = []
    for family, prior, lr in itertools.product(families, priors, lrs):
        ms = ModelSpec(family=family, env=env, with_prior=prior, hidden_dim=hidden, num_layers=layers, k=k)
        cells.append((ms, TrainConfig(learning_rate=lr, **cfg_kw)))
    return cells
