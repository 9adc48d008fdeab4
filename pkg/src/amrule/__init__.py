"""Adaptive multi-view rule discovery for weakly-supervised
compatible-products prediction.

The pipeline curates weak labels from co-purchase behavior, then iterates:
train a weak model, reweight instances by boosting error, induce candidate
rules from the large-error instances (decision trees over structured
attributes, masked prompts over descriptions), collect rule-level human
verdicts, match accepted rules against unlabeled pairs to mint new weak
positives, and ensemble the per-iteration models.
"""

from .tree_rules import backend_name as tree_backend_name

__version__ = "0.1.0"

__all__ = ["tree_backend_name", "__version__"]
