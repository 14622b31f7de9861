import math

import numpy as np
import pytest
import torch

from blrhac.env import EnvironmentSpec, vacant_locations
from blrhac.models import Checkpoint, ModelSpec, build_model, masked_cross_entropy
from blrhac.population import PopulationConfig, collect_demonstrations, sample_population
from blrhac.training import (
    TrainConfig,
    build_training_examples,
    evaluate_zero_shot,
    sweep,
    train,
)

SMALL = EnvironmentSpec.preset("small")


@pytest.fixture(scope="module")
def single_pref_data():
    pop = sample_population(
        PopulationConfig(prefs_per_split={"train": 1, "eval": 1, "test": 1},
                         episodes_per_pref={"train": 40, "eval": 8, "test": 8}, seed=2),
        SMALL,
    )
    d_train = collect_demonstrations(pop["train"], SMALL, 40, seed=0, split="train")
    d_eval = collect_demonstrations(pop["train"], SMALL, 8, seed=1, split="eval")
    return pop, d_train, d_eval


class TestBuildExamples:
    def test_one_episode_counts(self, single_pref_data):
        pop, d_train, _ = single_pref_data
        one = collect_demonstrations(pop["train"][:1], SMALL, 1, seed=0)
        ex = build_training_examples(one, k=10)
        assert len(ex) == 5
        # first example of a fresh preference has an empty history
        assert ex.mask[0].sum() == 2  # BOS + pick token

    def test_examples_per_dataset(self, single_pref_data):
        _, d_train, _ = single_pref_data
        ex = build_training_examples(d_train, k=10)
        assert len(ex) == len(d_train.episodes) * SMALL.num_locations

    def test_labels_are_vacant(self, single_pref_data):
        _, d_train, _ = single_pref_data
        ex = build_training_examples(d_train, k=10)
        assert ex.vacant_mask[np.arange(len(ex)), ex.labels].all()


class TestTrain:
    def test_shallow_fits_single_preference(self, single_pref_data):
        _, d_train, d_eval = single_pref_data
        ms = ModelSpec("shallow_linear", SMALL, with_prior=True, k=10)
        model = build_model(ms, seed=0)
        ckpt = train(model, d_train, d_eval,
                     TrainConfig(learning_rate=2.0, max_epochs=150, early_stop_patience=25, seed=0))
        assert ckpt.metadata["best_eval_accuracy"] >= 0.95

    def test_initial_loss_matches_uniform_baseline(self, single_pref_data):
        _, d_train, _ = single_pref_data
        ex = build_training_examples(d_train, k=10)
        model = build_model(ModelSpec("causal_transformer", SMALL, hidden_dim=16, num_layers=2,
                                      num_heads=2, k=10), seed=0)
        logits = model.predict_logits(ex.tokens, ex.mask, ex.a_h)
        loss = float(masked_cross_entropy(logits, ex.vacant_mask, ex.labels))
        expected = float(np.mean([math.log(m.sum()) for m in ex.vacant_mask]))
        assert abs(loss - expected) < 1e-9

    def test_patience_arithmetic(self, single_pref_data):
        _, d_train, d_eval = single_pref_data
        # zero learning rate: eval accuracy is flat, best epoch stays 1
        ms = ModelSpec("shallow_linear", SMALL, with_prior=True, k=10)
        model = build_model(ms, seed=0)
        ckpt = train(model, d_train, d_eval,
                     TrainConfig(learning_rate=0.0, max_epochs=50, early_stop_patience=10, seed=0))
        assert ckpt.metadata["epochs_run"] == 11

    def test_reproducibility(self, single_pref_data):
        _, d_train, d_eval = single_pref_data
        cfg = TrainConfig(learning_rate=0.1, max_epochs=3, seed=7)
        outs = []
        for _ in range(2):
            model = build_model(ModelSpec("mlp", SMALL, hidden_dim=16, num_layers=2, k=10), seed=7)
            outs.append(train(model, d_train, d_eval, cfg).state)
        assert outs[0] == outs[1]

    def test_selection_is_max_observed(self, single_pref_data):
        _, d_train, d_eval = single_pref_data
        ms = ModelSpec("shallow_linear", SMALL, with_prior=True, k=10)
        model = build_model(ms, seed=0)
        ckpt = train(model, d_train, d_eval, TrainConfig(learning_rate=0.5, max_epochs=15, seed=0))
        assert ckpt.metadata["best_eval_accuracy"] == max(ckpt.metadata["eval_history"])


class TestEvaluateZeroShot:
    def test_oracle_model_is_perfect(self, single_pref_data):
        pop, _, d_eval = single_pref_data
        ms = ModelSpec("shallow_linear", SMALL, with_prior=True, k=10)
        model = build_model(ms, seed=0)
        with torch.no_grad():
            model.theta.copy_(torch.tensor(pop["train"][0].theta))
        report = evaluate_zero_shot(model, d_eval, SMALL)
        assert report.accuracy == 1.0
        assert report.num_predictions == len(d_eval.episodes) * 5

    def test_uniform_model_near_analytic_baseline(self):
        pop = sample_population(
            PopulationConfig(prefs_per_split={"train": 0, "eval": 0, "test": 20},
                             episodes_per_pref={"test": 5}, seed=9),
            SMALL,
        )
        d_test = collect_demonstrations(pop["test"], SMALL, 5, seed=3, split="test")
        model = build_model(ModelSpec("shallow_linear", SMALL, with_prior=True, k=10), seed=0)
        report = evaluate_zero_shot(model, d_test, SMALL)
        expected = np.mean([1 / v for v in range(1, 6)])
        assert abs(report.accuracy - expected) < 0.06

    def test_evaluation_leaves_parameters_untouched(self, single_pref_data):
        _, _, d_eval = single_pref_data
        model = build_model(ModelSpec("mlp", SMALL, hidden_dim=16, num_layers=2, k=10), seed=1)
        before = {k: v.clone() for k, v in model.state_dict().items()}
        evaluate_zero_shot(model, d_eval, SMALL)
        after = model.state_dict()
        assert all(torch.equal(before[k], after[k]) for k in before)

    def test_env_mismatch_rejected(self, single_pref_data):
        _, _, d_eval = single_pref_data
        medium = EnvironmentSpec.preset("medium")
        model = build_model(ModelSpec("shallow_linear", medium, k=10), seed=0)
        with pytest.raises(ValueError):
            evaluate_zero_shot(model, d_eval, SMALL)


class TestSweep:
    def test_grid_of_one(self, single_pref_data):
        _, d_train, d_eval = single_pref_data
        ms = ModelSpec("shallow_linear", SMALL, with_prior=True, k=10)
        cells = [(ms, TrainConfig(learning_rate=0.5, max_epochs=5, seed=0))]
        best, rows = sweep(cells, d_train, d_eval)
        assert list(best) == [("shallow_linear", True)]
        assert len(rows) == 1

    def test_selection_picks_higher_accuracy(self, single_pref_data):
        _, d_train, d_eval = single_pref_data
        ms = ModelSpec("shallow_linear", SMALL, with_prior=True, k=10)
        cells = [
            (ms, TrainConfig(learning_rate=0.0, max_epochs=2, seed=0)),
            (ms, TrainConfig(learning_rate=0.5, max_epochs=10, seed=0)),
        ]
        best, rows = sweep(cells, d_train, d_eval)
        ckpt = best[("shallow_linear", True)]
        assert ckpt.metadata["learning_rate"] == 0.5
        assert len(rows) == 2

    def test_table_covers_family_prior_axes(self, single_pref_data):
        _, d_train, d_eval = single_pref_data
        cells = []
        for family in ("shallow_linear", "deep_linear", "mlp", "causal_transformer"):
            for prior in (True, False):
                ms = ModelSpec(family, SMALL, with_prior=prior, hidden_dim=8, num_layers=2,
                               num_heads=2, k=5)
                cells.append((ms, TrainConfig(learning_rate=0.1, max_epochs=1, seed=0)))
        best, rows = sweep(cells, d_train, d_eval, d_test=d_eval)
        assert len(rows) == 8
        assert len(best) == 8
