"""Heterogeneous, reconfigurable parallel island models for unsigned reversal distance."""

from .archipelago import ModelConfig, RunResult, run_model
from .distance import brute_force_srd, brute_force_urd, fitness, signed_reversal_distance
from .engines import EngineKind, Problem, run_sequential
from .params import builtin_model, model_ids
from .perm import ContractError, apply_reversal

__all__ = [
    "ContractError",
    "EngineKind",
    "ModelConfig",
    "Problem",
    "RunResult",
    "apply_reversal",
    "brute_force_srd",
    "brute_force_urd",
    "builtin_model",
    "fitness",
    "model_ids",
    "run_model",
    "run_sequential",
    "signed_reversal_distance",
]
