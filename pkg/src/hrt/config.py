"""Hyperparameters and step-size policies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class FixedStep:
    """Constant damping factor ``mu`` in (0, 1]."""

    mu: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.mu <= 1.0):
            raise ValueError(f"fixed step must lie in (0, 1], got {self.mu}")

    @property
    def label(self):
        return f"{self.mu:g}"


@dataclass(frozen=True)
class AutoStep:
    """Monotone backtracking: try ``mu0 * beta**t`` for ``t = 0..max_backtracks``."""

    mu0: float = 1.0
    beta: float = 0.5
    max_backtracks: int = 20

    def __post_init__(self):
        if not (0.0 < self.mu0 <= 1.0):
            raise ValueError(f"mu0 must lie in (0, 1], got {self.mu0}")
        if not (0.0 < self.beta < 1.0):
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be >= 1")

    @property
    def label(self):
        return "auto"


StepPolicy = Union[FixedStep, AutoStep]


def parse_step(text) -> StepPolicy:
    """``'auto'`` or a decimal in (0, 1]."""
    if isinstance(text, (FixedStep, AutoStep)):
        return text
    if isinstance(text, str) and text.strip().lower() == "auto":
        return AutoStep()
    try:
        mu = float(text)
    except (TypeError, ValueError):
        raise ValueError(f"step must be 'auto' or a number in (0, 1], got {text!r}") from None
    return FixedStep(mu)


@dataclass(frozen=True)
class HrtConfig:
    max_depth: int = 6
    min_samples: int = 10
    rmse_threshold: float = 0.0
    ridge_alpha: float = 0.0
    step_policy: StepPolicy = field(default_factory=AutoStep)
    t_max: int = 100
    epsilon: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.step_policy, str) or isinstance(self.step_policy, (int, float)):
            object.__setattr__(self, "step_policy", parse_step(self.step_policy))
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        for name in ("rmse_threshold", "ridge_alpha"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if not math.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")

    def as_dict(self):
        return {
            "max_depth": self.max_depth,
            "min_samples": self.min_samples,
            "rmse_threshold": self.rmse_threshold,
            "ridge_alpha": self.ridge_alpha,
            "step": self.step_policy.label,
            "t_max": self.t_max,
            "epsilon": self.epsilon,
            "seed": self.seed,
        }
