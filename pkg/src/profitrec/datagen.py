"""Synthetic e-commerce event logs with planted price-preference segments.

Customers belong to a price segment and mostly browse items priced near
their segment's typical price; how strongly is set by
``price_affinity_strength``. Presets mimic the aggregate shape of two
fashion shops: a high-margin one and a discount one.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import stats

from .domain import Action, Dataset, Interaction, ItemRecord, ValidationError


@dataclass(frozen=True)
class GenConfig:
    n_customers: int = 5000
    n_items: int = 1000
    n_segments: int = 3
    segment_price_means: tuple[float, ...] = (25.0, 60.0, 150.0)
    margin_mean: float = 1.61
    margin_spread: float = 0.6
    interactions_per_customer_mean: float = 9.46
    purchase_rate: float = 0.63
    price_affinity_strength: float = 2.0
    seed: int = 0
    # knobs below only shape the distributions
    price_log_sd: float = 0.5
    activity_dispersion: float = 0.35
    popularity_exponent: float = 0.8
    time_window: int = 180 * 86400
    start_time: int = 1_600_000_000

    def __post_init__(self):
        object.__setattr__(self, "segment_price_means", tuple(float(x) for x in self.segment_price_means))
        if self.n_customers < 1 or self.n_items < 1:
            raise ValidationError("n_customers and n_items must be positive")
        if self.n_segments < 1 or len(self.segment_price_means) != self.n_segments:
            raise ValidationError("segment_price_means must have n_segments entries")
        if any(not m > 0 for m in self.segment_price_means):
            raise ValidationError("segment price means must be positive")
        if not 0.0 < self.purchase_rate < 1.0:
            raise ValidationError("purchase_rate must lie strictly between 0 and 1")
        if not self.margin_spread > 0:
            raise ValidationError("margin_spread must be positive")
        if self.margin_mean <= -0.9:
            raise ValidationError("margin_mean must exceed -0.9")
        if not self.interactions_per_customer_mean >= 1.0:
            raise ValidationError("interactions_per_customer_mean must be at least 1")
        if self.price_affinity_strength < 0:
            raise ValidationError("price_affinity_strength must be non-negative")
        if self.activity_dispersion <= 0 or self.price_log_sd <= 0 or self.time_window < 1:
            raise ValidationError("distribution knobs must be positive")
        if self.start_time < 0:
            raise ValidationError("start_time must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown generator settings: {sorted(unknown)}")
        return cls(**d)


PRESETS = {
    # high-margin shop, frequent buyers
    "ds1": GenConfig(),
    # discount shop: lower prices and margins, fewer actions
    "ds2": GenConfig(
        n_customers=5000,
        segment_price_means=(12.0, 30.0, 75.0),
        margin_mean=0.87,
        margin_spread=0.4,
        interactions_per_customer_mean=6.45,
        purchase_rate=0.43,
    ),
}


@dataclass(frozen=True)
class Generated:
    dataset: Dataset
    customer_segments: dict[str, int]
    item_segments: dict[str, int]


def _truncated_margins(rng, n, mean, spread):
    out = rng.normal(mean, spread, n)
    bad = out <= -0.9
    while bad.any():
        out[bad] = rng.normal(mean, spread, bad.sum())
        bad = out <= -0.9
    return out


def generate_labeled(cfg: GenConfig) -> Generated:
    rng = np.random.default_rng(cfg.seed)
    seg_means = np.array(cfg.segment_price_means)

    item_seg = rng.integers(0, cfg.n_segments, cfg.n_items)
    retail = np.exp(rng.normal(np.log(seg_means[item_seg]), cfg.price_log_sd))
    retail = np.round(retail, 2).clip(min=0.01)
    margins = _truncated_margins(rng, cfg.n_items, cfg.margin_mean, cfg.margin_spread)
    cost = retail / (1.0 + margins)
    popularity = rng.permutation(np.arange(1, cfg.n_items + 1) ** -cfg.popularity_exponent)

    width = len(str(cfg.n_items - 1))
    item_ids = [f"i{n:0{width}d}" for n in range(cfg.n_items)]
    catalog = [ItemRecord(item_ids[n], float(retail[n]), float(cost[n])) for n in range(cfg.n_items)]

    cust_seg = rng.integers(0, cfg.n_segments, cfg.n_customers)
    # heavy-tailed activity: 1 + negative binomial with the requested mean
    extra = cfg.interactions_per_customer_mean - 1.0
    r = cfg.activity_dispersion
    counts = 1 + rng.negative_binomial(r, r / (r + extra), cfg.n_customers) if extra > 0 \
        else np.ones(cfg.n_customers, dtype=np.int64)

    log_retail = np.log(retail)
    seg_affinity = np.exp(-cfg.price_affinity_strength
                          * np.abs(log_retail[None, :] - np.log(seg_means)[:, None]))
    seg_weights = popularity[None, :] * seg_affinity
    seg_cdf = np.cumsum(seg_weights, axis=1)
    seg_cdf /= seg_cdf[:, -1:]
    # conversion is boosted for items close to the customer's price level
    seg_buy = np.clip(cfg.purchase_rate * (0.75 + 0.5 * seg_affinity), 0.0, 1.0)

    cwidth = len(str(cfg.n_customers - 1))
    interactions = []
    for c in range(cfg.n_customers):
        s = cust_seg[c]
        n = int(counts[c])
        picks = np.searchsorted(seg_cdf[s], rng.random(n), side="right").clip(max=cfg.n_items - 1)
        bought = rng.random(n) < seg_buy[s, picks]
        times = cfg.start_time + rng.integers(0, cfg.time_window, n)
        cid = f"c{c:0{cwidth}d}"
        for item, buy, t in zip(picks, bought, times):
            interactions.append(Interaction(cid, item_ids[item],
                                            Action.PURCHASE if buy else Action.VIEW, int(t)))
    interactions.sort(key=lambda x: (x.timestamp, x.customer_id, x.item_id))

    return Generated(
        Dataset.from_records(interactions, catalog),
        {f"c{c:0{cwidth}d}": int(cust_seg[c]) for c in range(cfg.n_customers)},
        {item_ids[n]: int(item_seg[n]) for n in range(cfg.n_items)},
    )


def generate(cfg: GenConfig) -> Dataset:
    return generate_labeled(cfg).dataset


def segment_price_association(g: Generated, n_bins: int = 3) -> tuple[float, float]:
    """Chi-square statistic and p-value between customer segment and purchased-price bin.

    Bins are price quantiles over the purchase events.
    """
    d = g.dataset
    buys = d.purchases()
    prices = np.array([d.catalog[x.item_id].retail_price for x in buys])
    segs = np.array([g.customer_segments[x.customer_id] for x in buys])
    edges = np.quantile(prices, np.linspace(0, 1, n_bins + 1)[1:-1])
    bins = np.searchsorted(edges, prices, side="right")
    n_segs = max(g.customer_segments.values()) + 1
    table = np.zeros((n_segs, n_bins))
    np.add.at(table, (segs, bins), 1)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    res = stats.chi2_contingency(table, correction=False)
    return float(res.statistic), float(res.pvalue)


STAT_NAMES = {
    "avg_interactions_per_customer": "Avg. no. of interactions per customer",
    "avg_purchases_per_customer": "Avg. no. of purchases per customer",
    "share_customers_lt3_actions": "Customers with less than 3 actions",
    "avg_item_profit": "Avg. profit of products",
    "median_item_profit": "Median profit of products",
    "n_customers": "No. of unique customers",
    "n_actions": "No. of actions",
    "n_items": "No. of unique products",
    "p75_actions": "75th percentile of actions",
    "p95_actions": "95th percentile of actions",
}


@dataclass(frozen=True)
class DatasetStats:
    avg_interactions_per_customer: float
    avg_purchases_per_customer: float
    share_customers_lt3_actions: float
    avg_item_profit: float
    median_item_profit: float
    n_customers: int
    n_actions: int
    n_items: int
    p75_actions: float
    p95_actions: float

    def to_json(self) -> dict:
        """Keyed by the human-readable row names."""
        return {STAT_NAMES[k]: v for k, v in asdict(self).items()}


def describe(d: Dataset) -> DatasetStats:
    """Descriptive statistics; views and purchases both count as actions.

    Percentiles interpolate linearly between order statistics. Unique
    products counts the catalog.
    """
    actions: dict[str, int] = {}
    purchases: dict[str, int] = {}
    for x in d.interactions:
        actions[x.customer_id] = actions.get(x.customer_id, 0) + 1
        if x.is_purchase:
            purchases[x.customer_id] = purchases.get(x.customer_id, 0) + 1
    counts = np.array(sorted(actions.values()), dtype=float)
    margins = np.array(sorted((r.retail_price - r.price) / r.price for r in d.catalog.values()))
    n_cust = len(actions)

    def ratio(num):
        return num / n_cust if n_cust else 0.0

    return DatasetStats(
        avg_interactions_per_customer=ratio(len(d.interactions)),
        avg_purchases_per_customer=ratio(sum(purchases.values())),
        share_customers_lt3_actions=ratio(int((counts < 3).sum())),
        avg_item_profit=math.fsum(margins) / len(margins) if len(margins) else 0.0,
        median_item_profit=float(np.median(margins)) if len(margins) else 0.0,
        n_customers=n_cust,
        n_actions=len(d.interactions),
        n_items=len(d.catalog),
        p75_actions=float(np.percentile(counts, 75)) if n_cust else 0.0,
        p95_actions=float(np.percentile(counts, 95)) if n_cust else 0.0,
    )


def config_from_text(text: str) -> GenConfig:
    """Parse a generator config from JSON or ``key = value`` lines, optionally naming a ``preset``."""
    text = text.strip()
    if text.startswith("{"):
        raw = json.loads(text)
    else:
        from .config import parse_kv
        raw = parse_kv(text)
    preset = raw.pop("preset", None)
    if preset and preset not in PRESETS:
        raise ValidationError(f"unknown preset {preset!r}")
    base = asdict(PRESETS[preset]) if preset else {}
    merged = {**base, **{k: _coerce(k, v) for k, v in raw.items()}}
    return GenConfig.from_dict(merged)


def _coerce(name, value):
    types = {f.name: f.type for f in fields(GenConfig)}
    if name not in types or not isinstance(value, str):
        return value
    t = types[name]
    try:
        if t == "int":
            return int(value)
        if t == "float":
            return float(value)
        if t.startswith("tuple"):
            return tuple(float(v) for v in value.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ValidationError(f"bad value for {name}: {value!r}") from None
    return value
