from __future__ import annotations

from optimizers.base import Optimizer, PlanResult
from optimizers.bbo import BboOptimizer
from optimizers.config import BboConfig, PsoConfig
from optimizers.pso import PsoOptimizer


def make_optimizer(tag: str, pso: PsoConfig | None = None, bbo: BboConfig | None = None) -> Optimizer:
    if tag == "pso":
        return PsoOptimizer(pso)
    if tag == "bbo":
        return BboOptimizer(bbo)
    raise ValueError(f"unknown optimizer '{tag}' (expected 'pso' or 'bbo')")


__all__ = ["Optimizer", "PlanResult", "PsoOptimizer", "BboOptimizer", "make_optimizer"]
