"""Profit and price-preference aware re-ranking on top of a WARP matrix factorization baseline."""

from .domain import (
    Action,
    CustomerProfile,
    Dataset,
    HyperParams,
    Interaction,
    ItemRecord,
    ScoredItem,
    ValidationError,
    build_customer_profiles,
    validate_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "CustomerProfile",
    "Dataset",
    "HyperParams",
    "Interaction",
    "ItemRecord",
    "ScoredItem",
    "ValidationError",
    "build_customer_profiles",
    "validate_dataset",
]
