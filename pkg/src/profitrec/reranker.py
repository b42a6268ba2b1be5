"""Profit and price-preference re-ranking of baseline scores.

The multiplier for customer ``u`` and item ``i`` is::

    s = [1 + log10(0.1 + 0.9 * retail_i / price_i)] ** alpha
      + [1 + log10(0.1 + 0.9 * retail_i / avg_retail_u)] ** beta

and the final score is ``s * baseline``. With ``alpha = beta = 0`` every
multiplier equals 2, so the baseline ranking is kept.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .domain import HyperParams, ItemRecord, ProfileBook, ScoredItem, ValidationError
from .mf_baseline import TrainedModel


def _require_positive(**values):
    for name, v in values.items():
        if np.any(~(np.asarray(v, dtype=float) > 0)):
            raise ValidationError(f"{name} must be strictly positive")


def _bracket(ratio):
    return 1.0 + np.log10(0.1 + 0.9 * ratio)


def profit_base(retail_price, price):
    """Base of the profit bracket, before raising to ``alpha``."""
    _require_positive(retail_price=retail_price, price=price)
    return _bracket(np.asarray(retail_price, dtype=float) / price)


def preference_base(retail_price, avg_retail_price):
    _require_positive(retail_price=retail_price, avg_retail_price=avg_retail_price)
    return _bracket(np.asarray(retail_price, dtype=float) / avg_retail_price)


def _as_output(x):
    return float(x) if np.ndim(x) == 0 else x


def profit_term(retail_price, price, alpha: float):
    """Accepts scalars or arrays; scalars come back as ``float``."""
    return _as_output(np.power(profit_base(retail_price, price), alpha))


def preference_term(retail_price, avg_retail_price, beta: float):
    return _as_output(np.power(preference_base(retail_price, avg_retail_price), beta))


@dataclass(frozen=True)
class AdjustmentInputs:
    retail_price_i: float
    price_i: float
    avg_retail_price_u: float
    hyper: HyperParams


def adjust_score(inputs: AdjustmentInputs) -> float:
    h = inputs.hyper
    return (profit_term(inputs.retail_price_i, inputs.price_i, h.alpha)
            + preference_term(inputs.retail_price_i, inputs.avg_retail_price_u, h.beta))


def combine(s_ui, baseline):
    return s_ui * baseline


def top_n(scored: Sequence[ScoredItem], n: int) -> list[ScoredItem]:
    """Highest ``final_score`` first; ties go to the smaller ``item_id``."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    return sorted(scored, key=lambda s: (-s.final_score, s.item_id))[:n]


class Reranker:
    """Recommends for many customers against one model and catalog.

    Item-level price terms are computed once; per-customer work is a single
    vectorized pass over the catalog.
    """

    def __init__(self, model: TrainedModel, profiles: ProfileBook, catalog: Mapping[str, ItemRecord]):
        missing = [i for i in model.item_ids if i not in catalog]
        if missing:
            raise ValidationError(f"{len(missing)} model items missing from catalog, e.g. {missing[0]!r}")
        self.model = model
        self.profiles = profiles
        self.item_ids = model.item_ids
        self.retail = np.array([catalog[i].retail_price for i in model.item_ids], dtype=float)
        cost = np.array([catalog[i].price for i in model.item_ids], dtype=float)
        self._profit_base = profit_base(self.retail, cost)
        self._profit_cache: dict[float, np.ndarray] = {}

    def multipliers(self, customer_id: str, hyper: HyperParams) -> np.ndarray:
        profit = self._profit_cache.get(hyper.alpha)
        if profit is None:
            profit = self._profit_cache[hyper.alpha] = np.power(self._profit_base, hyper.alpha)
        if hyper.beta == 0.0:
            return profit + 1.0
        pref = preference_base(self.retail, self.profiles.avg_price(customer_id))
        return profit + np.power(pref, hyper.beta)

    def ranked_indices(self, customer_id: str, hyper: HyperParams | None, n: int):
        """Top-``n`` item indices plus the baseline, multiplier and final score arrays.

        ``hyper=None`` ranks by the raw baseline score (multiplier 1).
        """
        baseline = self.model.scores(customer_id)
        if hyper is None:
            mult = np.ones_like(baseline)
        else:
            mult = self.multipliers(customer_id, hyper)
        final = combine(mult, baseline)
        candidates = np.ones(len(final), dtype=bool)
        candidates[self.model.seen_items(customer_id)] = False
        idx = np.flatnonzero(candidates)
        # stable sort on the negated score keeps ascending item order on ties;
        # item indices follow sorted item ids
        order = idx[np.argsort(-final[idx], kind="stable")][:n]
        return order, baseline, mult, final

    def recommend(self, customer_id: str, hyper: HyperParams | None, n: int = 10) -> list[ScoredItem]:
        if n < 1:
            raise ValidationError("n must be at least 1")
        order, baseline, mult, final = self.ranked_indices(customer_id, hyper, n)
        return [ScoredItem(self.item_ids[i], float(baseline[i]), float(mult[i]), float(final[i]))
                for i in order]

    def recommend_ids(self, customer_id: str, hyper: HyperParams | None, n: int = 10) -> list[str]:
        order = self.ranked_indices(customer_id, hyper, n)[0]
        return [self.item_ids[i] for i in order]


def recommend(model: TrainedModel, profiles: ProfileBook, catalog: Mapping[str, ItemRecord],
              customer_id: str, hyper: HyperParams | None, n: int = 10) -> list[ScoredItem]:
    """Top-``n`` re-ranked items among those ``customer_id`` did not buy in training.

    Customers unknown to the model are scored by item bias alone and still
    re-ranked.
    """
    return Reranker(model, profiles, catalog).recommend(customer_id, hyper, n)
