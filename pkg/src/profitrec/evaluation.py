"""Time-based splitting, Top-N ranking metrics, Profit-at-Hit and the (alpha, beta) sweep."""

from __future__ import annotations

import math
import os
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .domain import Dataset, HyperParams, ItemRecord, ProfileBook, ValidationError
from .mf_baseline import TrainedModel
from .reranker import Reranker


class EvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    # cut each customer's history separately instead of one global cut
    per_user: bool = False

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must lie strictly between 0 and 1")


def _chrono_key(x):
    return (x.timestamp, x.customer_id, x.item_id)


def time_split(d: Dataset, spec: SplitSpec = SplitSpec()) -> tuple[Dataset, Dataset]:
    if not d.interactions:
        raise ValidationError("cannot split an empty dataset")
    events = sorted(d.interactions, key=_chrono_key)
    if not spec.per_user:
        cut = math.ceil(spec.train_fraction * len(events))
        return d.with_interactions(events[:cut]), d.with_interactions(events[cut:])
    by_user: dict[str, list] = {}
    for x in events:
        by_user.setdefault(x.customer_id, []).append(x)
    train, test = [], []
    for xs in by_user.values():
        cut = math.ceil(spec.train_fraction * len(xs))
        train += xs[:cut]
        test += xs[cut:]
    return (d.with_interactions(sorted(train, key=_chrono_key)),
            d.with_interactions(sorted(test, key=_chrono_key)))


def relevant_items(test: Dataset, customer_id: str) -> set[str]:
    return {x.item_id for x in test.interactions if x.customer_id == customer_id and x.is_purchase}


def relevant_sets(test: Dataset) -> dict[str, set[str]]:
    """Purchased items per customer, for every customer with at least one test purchase."""
    out: dict[str, set[str]] = {}
    for x in test.interactions:
        if x.is_purchase:
            out.setdefault(x.customer_id, set()).add(x.item_id)
    return dict(sorted(out.items()))


def _check_k(k):
    if k < 1:
        raise ValidationError("k must be positive")


def _hits(recommended, relevant, k):
    return sum(1 for i in recommended[:k] if i in relevant)


def precision_at_k(recommended: Sequence, relevant, k: int) -> float:
    _check_k(k)
    return _hits(recommended, relevant, k) / k


def recall_at_k(recommended: Sequence, relevant, k: int) -> float:
    _check_k(k)
    if not relevant:
        return 0.0
    return _hits(recommended, relevant, k) / len(relevant)


def average_precision_at_k(recommended: Sequence, relevant, k: int) -> float:
    _check_k(k)
    if not relevant:
        return 0.0
    total, hits = 0.0, 0
    for rank, item in enumerate(recommended[:k], start=1):
        if item in relevant:
            hits += 1
            total += hits / rank
    return total / min(len(relevant), k)


def _margin(catalog, item_id):
    try:
        rec = catalog[item_id]
    except KeyError:
        raise EvaluationError(f"item {item_id!r} missing from catalog") from None
    return (rec.retail_price - rec.price) / rec.price


def pah_parts(per_user_recommendations: Mapping[str, Sequence], relevant: Mapping[str, set],
              catalog: Mapping[str, ItemRecord], k: int, literal: bool = False) -> tuple[float, int]:
    """Profit at Hit and the number of customers with at least one hit.

    Default: each customer's mean margin over their hits, averaged over the
    customers who have hits. ``literal=True`` instead divides the pooled
    mean margin over all hits by the number of evaluated customers.
    """
    _check_k(k)
    user_means = []
    pooled = []
    for cid, recs in per_user_recommendations.items():
        rel = relevant.get(cid, ())
        margins = [_margin(catalog, i) for i in recs[:k] if i in rel]
        if margins:
            user_means.append(math.fsum(margins) / len(margins))
            pooled += margins
    if not user_means:
        return 0.0, 0
    if literal:
        return math.fsum(pooled) / len(pooled) / len(per_user_recommendations), len(user_means)
    return math.fsum(user_means) / len(user_means), len(user_means)


def pah_at_k(per_user_recommendations, relevant, catalog, k: int, literal: bool = False) -> float:
    return pah_parts(per_user_recommendations, relevant, catalog, k, literal)[0]


@dataclass(frozen=True)
class MetricsRow:
    alpha: float
    beta: float
    precision_at_k: float
    recall_at_k: float
    map_at_k: float
    pah_at_k: float
    k: int
    n_users_evaluated: int
    n_users_hit: int

    CSV_HEADER = ("alpha", "beta", "precision", "recall", "map", "pah", "k", "n_users")

    def csv_values(self) -> tuple:
        return (self.alpha, self.beta, self.precision_at_k, self.recall_at_k, self.map_at_k,
                self.pah_at_k, self.k, self.n_users_evaluated)

    def as_dict(self) -> dict:
        return asdict(self)


METRIC_NAMES = ("precision_at_k", "recall_at_k", "map_at_k", "pah_at_k")


def metrics_from_recommendations(recs: Mapping[str, Sequence], relevant: Mapping[str, set],
                                 catalog, k: int, alpha=0.0, beta=0.0,
                                 literal_pah: bool = False) -> MetricsRow:
    if not relevant:
        raise EvaluationError("no test customer has a purchase")
    users = list(relevant)
    p = math.fsum(precision_at_k(recs[u], relevant[u], k) for u in users) / len(users)
    r = math.fsum(recall_at_k(recs[u], relevant[u], k) for u in users) / len(users)
    ap = math.fsum(average_precision_at_k(recs[u], relevant[u], k) for u in users) / len(users)
    pah, n_hit = pah_parts({u: recs[u] for u in users}, relevant, catalog, k, literal_pah)
    return MetricsRow(alpha, beta, p, r, ap, pah, k, len(users), n_hit)


def evaluate(model: TrainedModel, profiles: ProfileBook, catalog: Mapping[str, ItemRecord],
             test: Dataset, hyper: HyperParams | None, k: int = 10, *,
             literal_pah: bool = False, reranker: Reranker | None = None) -> MetricsRow:
    """Metrics over every test customer who bought something.

    ``hyper=None`` evaluates the raw baseline ranking; it is reported with
    alpha = beta = 0.
    """
    _check_k(k)
    relevant = relevant_sets(test)
    rr = reranker or Reranker(model, profiles, catalog)
    recs = {u: rr.recommend_ids(u, hyper, k) for u in relevant}
    alpha, beta = (hyper.alpha, hyper.beta) if hyper is not None else (0.0, 0.0)
    return metrics_from_recommendations(recs, relevant, catalog, k, alpha, beta, literal_pah)


def random_ranking_row(train: Dataset, test: Dataset, k: int = 10, seed: int = 0) -> MetricsRow:
    """Metrics for uniformly random scores over each customer's unseen items."""
    relevant = relevant_sets(test)
    items = sorted(train.catalog)
    bought: dict[str, set] = {}
    for x in train.interactions:
        if x.is_purchase:
            bought.setdefault(x.customer_id, set()).add(x.item_id)
    rng = np.random.default_rng(seed)
    recs = {}
    for u in relevant:
        seen = bought.get(u, set())
        cands = [i for i in items if i not in seen]
        scores = rng.random(len(cands))
        recs[u] = [cands[j] for j in np.argsort(-scores, kind="stable")[:k]]
    return metrics_from_recommendations(recs, relevant, train.catalog, k)


def grid_values(lo: float, hi: float, step: float) -> list[float]:
    """Integer multiples of ``step`` from ``lo`` to ``hi`` inclusive."""
    if step <= 0:
        raise ValidationError("step must be positive")
    if lo > hi:
        raise ValidationError(f"range ({lo}, {hi}) is not ordered")
    first = math.ceil(lo / step - 1e-9)
    last = math.floor(hi / step + 1e-9)
    # rounding keeps 0.30000000000000004 printing as 0.3
    return [round(n * step, 10) + 0.0 for n in range(first, last + 1)]


@dataclass
class SweepReport:
    rows: list[MetricsRow]
    metadata: dict

    def row(self, alpha: float, beta: float) -> MetricsRow:
        for r in self.rows:
            if r.alpha == alpha and r.beta == beta:
                return r
        raise KeyError((alpha, beta))

    def best(self, metric: str = "precision_at_k") -> MetricsRow:
        return max(self.rows, key=lambda r: getattr(r, metric))

    def to_csv(self) -> str:
        lines = [",".join(MetricsRow.CSV_HEADER)]
        lines += [",".join(repr(v) for v in r.csv_values()) for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_long_csv(self) -> str:
        lines = ["alpha,beta,metric,value"]
        for r in self.rows:
            for name in METRIC_NAMES:
                lines.append(f"{r.alpha!r},{r.beta!r},{name},{getattr(r, name)!r}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"metadata": self.metadata, "rows": [r.as_dict() for r in self.rows]}

    @classmethod
    def from_json(cls, doc: dict) -> "SweepReport":
        names = {f.name for f in fields(MetricsRow)}
        return cls([MetricsRow(**{k: v for k, v in r.items() if k in names}) for r in doc["rows"]],
                   doc.get("metadata", {}))


_worker_state: dict = {}


def _init_worker(model, profiles, catalog, test, k, literal_pah):
    _worker_state["args"] = (model, profiles, catalog, test, k, literal_pah)
    _worker_state["reranker"] = Reranker(model, profiles, catalog)


def _eval_cell(cell):
    model, profiles, catalog, test, k, literal_pah = _worker_state["args"]
    return evaluate(model, profiles, catalog, test, HyperParams(*cell), k,
                    literal_pah=literal_pah, reranker=_worker_state["reranker"])


def grid_sweep(model: TrainedModel, profiles: ProfileBook, catalog: Mapping[str, ItemRecord],
               test: Dataset, alpha_range=(-1.0, 1.0), beta_range=(-1.0, 1.0), step: float = 0.1,
               k: int = 10, *, workers: int | None = 1, literal_pah: bool = False,
               metadata: dict | None = None) -> SweepReport:
    """Evaluate every (alpha, beta) grid cell.

    Rows come back in grid order (alpha-major) whatever the worker count.
    ``workers=None`` uses one process per CPU.
    """
    cells = [(a, b) for a in grid_values(*alpha_range, step) for b in grid_values(*beta_range, step)]
    for a, b in cells:
        HyperParams(a, b)
    workers = workers or os.cpu_count() or 1
    init_args = (model, profiles, catalog, test, k, literal_pah)
    if workers == 1 or len(cells) == 1:
        _init_worker(*init_args)
        try:
            rows = [_eval_cell(c) for c in cells]
        finally:
            _worker_state.clear()
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=init_args) as pool:
            rows = list(pool.map(_eval_cell, cells, chunksize=max(1, len(cells) // (4 * workers))))
    meta = {"alpha_range": list(alpha_range), "beta_range": list(beta_range), "step": step, "k": k,
            "pah_mode": "literal" if literal_pah else "per_user"}
    meta.update(metadata or {})
    return SweepReport(rows, meta)
