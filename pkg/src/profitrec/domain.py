"""Core data model: event logs, catalogs, price profiles and scored items."""

from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType


class ValidationError(ValueError):
    """Raised when inputs break a domain invariant."""


class Action(enum.Enum):
    VIEW = "view"
    PURCHASE = "purchase"

    @classmethod
    def parse(cls, text: str) -> "Action":
        try:
            return cls(text)
        except ValueError:
            raise ValidationError(f"unknown action {text!r} (expected 'view' or 'purchase')") from None


@dataclass(frozen=True, slots=True)
class Interaction:
    customer_id: str
    item_id: str
    action: Action
    timestamp: int

    @property
    def is_purchase(self) -> bool:
        return self.action is Action.PURCHASE


@dataclass(frozen=True, slots=True)
class ItemRecord:
    item_id: str
    retail_price: float
    price: float

    @property
    def margin(self) -> float:
        """Relative profit of one sale, (retail - cost) / cost."""
        return (self.retail_price - self.price) / self.price


@dataclass(frozen=True)
class Dataset:
    """An event log together with the catalog it refers to.

    Construction does not validate; call :func:`validate_dataset` to get the
    list of broken invariants.
    """

    interactions: tuple[Interaction, ...]
    catalog: Mapping[str, ItemRecord]

    def __post_init__(self):
        object.__setattr__(self, "interactions", tuple(self.interactions))
        object.__setattr__(self, "catalog", MappingProxyType(dict(self.catalog)))

    def __len__(self) -> int:
        return len(self.interactions)

    def __getstate__(self):
        return {"interactions": self.interactions, "catalog": dict(self.catalog)}

    def __setstate__(self, state):
        object.__setattr__(self, "interactions", state["interactions"])
        object.__setattr__(self, "catalog", MappingProxyType(state["catalog"]))

    @classmethod
    def from_records(cls, interactions: Iterable[Interaction], items: Iterable[ItemRecord]) -> "Dataset":
        return cls(tuple(interactions), {it.item_id: it for it in items})

    def with_interactions(self, interactions: Iterable[Interaction]) -> "Dataset":
        return Dataset(tuple(interactions), self.catalog)

    def purchases(self) -> list[Interaction]:
        return [x for x in self.interactions if x.is_purchase]

    def customers(self) -> list[str]:
        return sorted({x.customer_id for x in self.interactions})


@dataclass(frozen=True, slots=True)
class CustomerProfile:
    customer_id: str
    avg_purchase_retail_price: float

    def __post_init__(self):
        if not self.avg_purchase_retail_price > 0:
            raise ValidationError(
                f"customer {self.customer_id!r}: average purchase price must be positive"
            )


class ProfileBook(dict):
    """Customer profiles keyed by customer id.

    Lookups for customers never seen in training return a profile built
    from ``fallback`` instead of raising.
    """

    def __init__(self, profiles: Mapping[str, CustomerProfile], fallback: float):
        super().__init__(profiles)
        self.fallback = float(fallback)

    def __missing__(self, customer_id: str) -> CustomerProfile:
        return CustomerProfile(customer_id, self.fallback)

    def avg_price(self, customer_id: str) -> float:
        return self[customer_id].avg_purchase_retail_price


@dataclass(frozen=True, slots=True)
class HyperParams:
    """Strength of the profit (``alpha``) and price-preference (``beta``) adjustments."""

    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and -1.0 <= value <= 1.0):
                raise ValidationError(f"{name} must lie in [-1, 1], got {value!r}")


@dataclass(frozen=True, slots=True)
class ScoredItem:
    item_id: str
    baseline_score: float
    adjusted_multiplier: float
    final_score: float = field(default=float("nan"))

    def __post_init__(self):
        if math.isnan(self.final_score):
            object.__setattr__(self, "final_score", self.adjusted_multiplier * self.baseline_score)


def build_customer_profiles(train: Dataset) -> ProfileBook:
    """Average retail price of each customer's purchases.

    Every purchase event counts, so an item bought twice weighs double.
    Customers without purchases get the mean over all purchase events; with
    no purchases at all, the plain catalog mean is used instead.
    """
    if not train.catalog:
        raise ValidationError("catalog is empty")
    bought: dict[str, list[float]] = {}
    seen: set[str] = set()
    for x in train.interactions:
        seen.add(x.customer_id)
        if x.is_purchase:
            bought.setdefault(x.customer_id, []).append(train.catalog[x.item_id].retail_price)

    # fsum keeps the means independent of event order
    all_prices = [p for prices in bought.values() for p in prices]
    if all_prices:
        fallback = math.fsum(all_prices) / len(all_prices)
    else:
        fallback = math.fsum(r.retail_price for r in train.catalog.values()) / len(train.catalog)

    profiles = {}
    for cid in sorted(seen):
        prices = bought.get(cid)
        avg = math.fsum(prices) / len(prices) if prices else fallback
        profiles[cid] = CustomerProfile(cid, avg)
    return ProfileBook(profiles, fallback)


def validate_dataset(d: Dataset) -> list[str]:
    """Return a human-readable message for every broken dataset invariant."""
    problems = []
    for item_id, rec in d.catalog.items():
        if item_id != rec.item_id:
            problems.append(f"catalog key {item_id!r} does not match record id {rec.item_id!r}")
        for name in ("retail_price", "price"):
            value = getattr(rec, name)
            if not (math.isfinite(value) and value > 0):
                problems.append(f"item {rec.item_id!r}: {name} must be positive, got {value!r}")
    for n, x in enumerate(d.interactions):
        if x.item_id not in d.catalog:
            problems.append(f"interaction {n}: item {x.item_id!r} not in catalog")
        if x.timestamp < 0:
            problems.append(f"interaction {n}: negative timestamp {x.timestamp}")
        if not isinstance(x.action, Action):
            problems.append(f"interaction {n}: invalid action {x.action!r}")
    return problems
