"""Positivity-preserving truncated Euler-Maruyama schemes for SDEs on the positive orthant."""

from __future__ import annotations

__version__ = "0.1.0"

from .core import ModelSpec, SchemeKind, in_positive_cone
from .experiments import ConvergenceConfig, fit_order, positivity_stats, rms_error, run_convergence_study
from .models import get_model, model_names
from .schemes import em_step, pptem_step, run_batch, simulate_path, tem_step
from .truncation import ClampInterval, TruncationPolicy, clamp_interval, pi_delta

__all__ = [
    "ClampInterval",
    "ConvergenceConfig",
    "ModelSpec",
    "SchemeKind",
    "TruncationPolicy",
    "clamp_interval",
    "em_step",
    "fit_order",
    "get_model",
    "in_positive_cone",
    "model_names",
    "pi_delta",
    "positivity_stats",
    "pptem_step",
    "rms_error",
    "run_batch",
    "run_convergence_study",
    "simulate_path",
    "tem_step",
    "__version__",
]
