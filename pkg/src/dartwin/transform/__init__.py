"""Architectural transformations, structural diff and isomorphism."""

from .changeset import ChangeSet, diff, fingerprints
from .isomorphism import Isomorphism, is_isomorphic, model_graph
from .rewrites import (
    KINDS,
    Addition,
    TransformError,
    TransformResult,
    apply_arbitration,
    apply_augmented,
    apply_basic,
    apply_chaining,
    apply_hierarchical,
    apply_new_output,
    apply_orthogonal,
    flatten,
)

__all__ = [
    "KINDS",
    "Addition",
    "ChangeSet",
    "Isomorphism",
    "TransformError",
    "TransformResult",
    "apply_arbitration",
    "apply_augmented",
    "apply_basic",
    "apply_chaining",
    "apply_hierarchical",
    "apply_new_output",
    "apply_orthogonal",
    "diff",
    "fingerprints",
    "flatten",
    "is_isomorphic",
    "model_graph",
]
