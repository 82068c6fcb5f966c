"""Semantic joins over text-completion models.

Tuple, block and adaptive join operators, an embedding baseline, the
token-cost model with its batch-size optimizer, and a deterministic simulated
backend for testing them.
"""
__version__ = "0.1.0"

from .backends import SimulatedBackend, SimulatedWorld
from .costs import BatchSizes, block_join_cost, tuple_join_cost
from .joins import (
    JoinReport,
    JoinSettings,
    JoinSpec,
    NonConvergence,
    Overflow,
    adaptive_join,
    block_join,
    embedding_join,
    tuple_join,
)
from .model import CostParams, Pricing, Table, TokenLedger, Tuple
from .optimizer import InfeasibleBudget, grid_search_oracle, optimize, plan_batches

__all__ = [
    "BatchSizes",
    "CostParams",
    "InfeasibleBudget",
    "JoinReport",
    "JoinSettings",
    "JoinSpec",
    "NonConvergence",
    "Overflow",
    "Pricing",
    "SimulatedBackend",
    "SimulatedWorld",
    "Table",
    "TokenLedger",
    "Tuple",
    "__version__",
    "adaptive_join",
    "block_join",
    "block_join_cost",
    "embedding_join",
    "grid_search_oracle",
    "optimize",
    "plan_batches",
    "tuple_join",
    "tuple_join_cost",
]
