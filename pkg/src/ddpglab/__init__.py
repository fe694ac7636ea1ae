"""Desk-scale DDPG / prioritized-DDPG laboratory.

Built-in deterministic continuous-control environments, a from-scratch
float64 network engine, sum-tree prioritized replay, four exploration
regimes and a seeded experiment harness with CSV + figure reports.
"""

from .agent import Agent, TrainStepReport, default_networks
from .envs import ENV_REGISTRY, EnvSpec, StepResult, make_env
from .harness import (
    CompareResult,
    EpochRecord,
    RunConfig,
    compare,
    evaluate,
    learning_curve_area,
    load_config,
    read_records_csv,
    run,
    write_records_csv,
)
from .nets import (
    AdamState,
    Layer,
    Network,
    action_distance,
    adam_step,
    load_network,
    mlp,
    perturb,
    save_network,
    soft_update,
)
from .noise import (
    AdaptiveParamNoise,
    GaussianNoise,
    NoNoise,
    OUNoise,
    make_noise,
)
from .replay import PrioritizedBuffer, SampledBatch, SumTree, Transition

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "AdamState",
    "AdaptiveParamNoise",
    "CompareResult",
    "ENV_REGISTRY",
    "EnvSpec",
    "EpochRecord",
    "GaussianNoise",
    "Layer",
    "Network",
    "NoNoise",
    "OUNoise",
    "PrioritizedBuffer",
    "RunConfig",
    "SampledBatch",
    "StepResult",
    "SumTree",
    "TrainStepReport",
    "Transition",
    "action_distance",
    "adam_step",
    "compare",
    "default_networks",
    "evaluate",
    "learning_curve_area",
    "load_config",
    "load_network",
    "make_env",
    "make_noise",
    "mlp",
    "perturb",
    "read_records_csv",
    "run",
    "save_network",
    "soft_update",
    "write_records_csv",
]
