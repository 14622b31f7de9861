"""Bootstrapped logistic regression for human-agent collaborative rearrangement."""

__version__ = "0.1.0"

from .env import (
    EnvironmentSpec,
    Episode,
    StepRecord,
    WorldState,
    apply_placement,
    new_episode,
    run_episode,
    step_turn,
    unplaced_objects,
    vacant_locations,
)
from .flops import count_flops, linear_inference_flops, linear_update_flops
from .models import (
    Checkpoint,
    ModelSpec,
    PreferenceModel,
    ThetaEstimate,
    action_distribution,
    build_model,
    masked_cross_entropy,
)
from .online import (
    AdaptationCurve,
    OnlineLinearLearner,
    OnlineTransformerLearner,
    bootstrap_theta,
    make_blr_hac,
    nonstationary_experiment,
    online_transformer_finetune,
    run_adaptation_episode,
    sgd_update,
    stationary_experiment,
)
from .population import (
    DemonstrationDataset,
    PopulationConfig,
    PreferenceMatrix,
    collect_demonstrations,
    expert_placement,
    sample_population,
)
from .tokens import HistoryWindow, TokenSequence, encode_history
from .training import (
    EvalReport,
    TrainConfig,
    build_training_examples,
    evaluate_zero_shot,
    sweep,
    train,
)
