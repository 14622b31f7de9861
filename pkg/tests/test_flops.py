import pytest

from blrhac.env import EnvironmentSpec
from blrhac.flops import count_flops
from blrhac.models import ModelSpec


@pytest.mark.parametrize(
    "preset,inference,update",
    [("small", 25, 50), ("medium", 100, 200), ("large", 625, 1250)],
)
def test_linear_policy_formulas(preset, inference, update):
    env = EnvironmentSpec.preset(preset)
    assert count_flops("linear", "inference", env) == inference
    assert count_flops("linear", "update", env) == update


def test_shallow_family_matches_linear_policy():
    env = EnvironmentSpec.preset("small")
    ms = ModelSpec("shallow_linear", env)
    assert count_flops(ms, "inference") == 25
    assert count_flops(ms, "update") == 50


def test_transformer_update_dwarfs_linear():
    env = EnvironmentSpec.preset("small")
    ms = ModelSpec("causal_transformer", env, hidden_dim=64, num_layers=3, k=50)
    assert count_flops(ms, "update") > 100 * count_flops("linear", "update", env)


def test_counts_are_positive_integers():
    env = EnvironmentSpec.preset("medium")
    for family in ("deep_linear", "mlp", "causal_transformer"):
        for prior in (True, False):
            ms = ModelSpec(family, env, with_prior=prior, hidden_dim=32, num_layers=3, k=10)
            for mode in ("inference", "update"):
                n = count_flops(ms, mode)
                assert isinstance(n, int) and n > 0


def test_bad_mode_rejected():
    with pytest.raises(ValueError):
        count_flops("linear", "training", EnvironmentSpec.preset("small"))
