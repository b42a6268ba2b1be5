"""Implicit-feedback matrix factorization trained with the WARP ranking loss.

Scores are ``sigmoid(q_u . p_i + b_u + b_i)``. Positives are purchase events;
views are ignored by training.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .domain import Dataset, ValidationError

_log = logging.getLogger(__name__)

FORMAT_MAGIC = b"PROFITREC-MF\n"
FORMAT_VERSION = 1


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    latent_dim: int = 50
    epochs: int = 50
    max_warp_trials: int = 100
    seed: int = 0
    # L2 penalty applied on every step; 0 disables it
    regularization: float = 0.0
    # "adagrad" scales each coordinate's step by its accumulated squared
    # gradients; "sgd" takes the raw step
    learning_schedule: str = "adagrad"

    def __post_init__(self):
        if self.learning_rate < 0 or not math.isfinite(self.learning_rate):
            raise ValidationError("learning_rate must be a non-negative finite number")
        if self.latent_dim < 1:
            raise ValidationError("latent_dim must be positive")
        if self.epochs < 0:
            raise ValidationError("epochs must be non-negative")
        if self.max_warp_trials < 1:
            raise ValidationError("max_warp_trials must be positive")
        if self.regularization < 0:
            raise ValidationError("regularization must be non-negative")
        if self.learning_schedule not in ("adagrad", "sgd"):
            raise ValidationError(f"unknown learning_schedule {self.learning_schedule!r}")


@dataclass
class ModelParams:
    customer_factors: np.ndarray
    item_factors: np.ndarray
    customer_bias: np.ndarray
    item_bias: np.ndarray

    @property
    def dim(self) -> int:
        return self.customer_factors.shape[1]

    @property
    def n_customers(self) -> int:
        return self.customer_factors.shape[0]

    @property
    def n_items(self) -> int:
        return self.item_factors.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(*(a.copy() for a in self._arrays()))

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self._arrays())

    def _arrays(self):
        return (self.customer_factors, self.item_factors, self.customer_bias, self.item_bias)

    def equals(self, other: "ModelParams") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self._arrays(), other._arrays()))


def init_model(n_customers: int, n_items: int, cfg: TrainConfig) -> ModelParams:
    if n_customers < 1 or n_items < 1:
        raise ValidationError("need at least one customer and one item")
    d = cfg.latent_dim
    rng = np.random.default_rng(cfg.seed)
    scale = 1.0 / math.sqrt(d)
    return ModelParams(
        rng.uniform(-scale, scale, (n_customers, d)),
        rng.uniform(-scale, scale, (n_items, d)),
        np.zeros(n_customers),
        np.zeros(n_items),
    )


def _check_index(idx, size, what):
    if not 0 <= idx < size:
        raise IndexError(f"{what} index {idx} out of range [0, {size})")


def raw_score(m: ModelParams, u: int, i: int) -> float:
    return float(m.customer_factors[u] @ m.item_factors[i] + m.customer_bias[u] + m.item_bias[i])


def predict_score(m: ModelParams, u: int, i: int) -> float:
    _check_index(u, m.n_customers, "customer")
    _check_index(i, m.n_items, "item")
    return float(expit(raw_score(m, u, i)))


def score_candidates(m: ModelParams, u: int, candidates) -> list[tuple[int, float]]:
    return [(i, predict_score(m, u, i)) for i in candidates]


def customer_scores(m: ModelParams, u: int | None) -> np.ndarray:
    """Scores of every item for customer ``u``; ``None`` gives the bias-only cold-start scores."""
    if u is None:
        return expit(m.item_bias)
    _check_index(u, m.n_customers, "customer")
    return expit(m.item_factors @ m.customer_factors[u] + m.customer_bias[u] + m.item_bias)


def warp_weight(n_items: int, trials: int) -> float:
    """Log of the rank estimated from the number of draws needed to find a violator."""
    return math.log((n_items - 1) // trials + 1)


def _sample_negatives(rng, n_items, positives, size):
    # uniform draws from {0..n_items-1} minus the sorted ``positives``
    idx = rng.integers(0, n_items - len(positives), size=size)
    if len(positives):
        idx = idx + np.searchsorted(positives - np.arange(len(positives)), idx, side="right")
    return idx


def new_accumulators(m: ModelParams) -> ModelParams:
    """Squared-gradient sums for the adagrad schedule, started at one."""
    return ModelParams(*(np.ones_like(a) for a in m._arrays()))


def warp_update(m: ModelParams, u: int, pos_item: int, positives: np.ndarray,
                cfg: TrainConfig, rng: np.random.Generator,
                accum: ModelParams | None = None) -> int | None:
    """Apply one WARP step for ``(u, pos_item)`` in place.

    ``positives`` is the sorted array of all item indices customer ``u``
    bought; negatives are drawn uniformly from the rest of the catalog.
    ``accum`` carries the adagrad state across calls (see
    :func:`new_accumulators`); it is ignored by the plain SGD schedule.
    Returns the number of draws it took to find a margin violation, or
    ``None`` when nothing was updated.
    """
    n_items = m.n_items
    if len(positives) >= n_items:
        return None
    negs = _sample_negatives(rng, n_items, positives, cfg.max_warp_trials)
    q = m.customer_factors[u]
    pos_raw = q @ m.item_factors[pos_item] + m.item_bias[pos_item]
    neg_raw = m.item_factors[negs] @ q + m.item_bias[negs]
    # customer bias cancels in the comparison
    hits = np.flatnonzero(neg_raw > pos_raw - 1.0)
    if not len(hits):
        return None
    trials = int(hits[0]) + 1
    neg = int(negs[hits[0]])

    lr = cfg.learning_rate
    if lr == 0.0:
        return trials
    w = warp_weight(n_items, trials)
    q = q.copy()
    pp = m.item_factors[pos_item].copy()
    pn = m.item_factors[neg].copy()
    lam = cfg.regularization
    # ascent directions of the (negated) weighted hinge loss
    steps = (
        (m.customer_factors, u, w * (pp - pn) - lam * q),
        (m.item_factors, pos_item, w * q - lam * pp),
        (m.item_factors, neg, -w * q - lam * pn),
        (m.item_bias, pos_item, w),
        (m.item_bias, neg, -w),
    )
    if cfg.learning_schedule == "adagrad":
        if accum is None:
            accum = new_accumulators(m)
        acc = dict(zip(map(id, m._arrays()), accum._arrays()))
        for arr, row, grad in steps:
            a = acc[id(arr)]
            a[row] += grad * grad
            arr[row] += lr * grad / np.sqrt(a[row])
    else:
        for arr, row, grad in steps:
            arr[row] += lr * grad
    return trials


@dataclass
class TrainedModel:
    """Fitted parameters plus the id maps and training purchases needed to recommend."""

    params: ModelParams
    customer_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    seen: dict[int, np.ndarray]
    config: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        self._cidx = {c: n for n, c in enumerate(self.customer_ids)}
        self._iidx = {c: n for n, c in enumerate(self.item_ids)}

    def customer_index(self, customer_id: str) -> int | None:
        return self._cidx.get(customer_id)

    def item_index(self, item_id: str) -> int:
        return self._iidx[item_id]

    def scores(self, customer_id: str) -> np.ndarray:
        return customer_scores(self.params, self.customer_index(customer_id))

    def seen_items(self, customer_id: str) -> np.ndarray:
        u = self.customer_index(customer_id)
        return self.seen.get(u, _EMPTY) if u is not None else _EMPTY


_EMPTY = np.zeros(0, dtype=np.int64)


def index_training_data(train: Dataset):
    customer_ids = tuple(train.customers())
    item_ids = tuple(sorted(train.catalog))
    cidx = {c: n for n, c in enumerate(customer_ids)}
    iidx = {c: n for n, c in enumerate(item_ids)}
    bought: dict[int, set[int]] = {}
    for x in train.interactions:
        if x.is_purchase:
            bought.setdefault(cidx[x.customer_id], set()).add(iidx[x.item_id])
    seen = {u: np.array(sorted(items), dtype=np.int64) for u, items in sorted(bought.items())}
    return customer_ids, item_ids, seen


def fit(train: Dataset, cfg: TrainConfig = TrainConfig()) -> TrainedModel:
    customer_ids, item_ids, seen = index_training_data(train)
    if not seen:
        raise TrainingError("training data contains no purchases")
    params = init_model(len(customer_ids), len(item_ids), cfg)
    pairs = np.array([(u, i) for u, items in seen.items() for i in items], dtype=np.int64)
    rng = np.random.default_rng([cfg.seed, 1])
    accum = new_accumulators(params)
    for epoch in range(cfg.epochs):
        updates = 0
        for u, i in pairs[rng.permutation(len(pairs))]:
            if warp_update(params, int(u), int(i), seen[u], cfg, rng, accum) is not None:
                updates += 1
        if not params.is_finite():
            raise TrainingError(f"non-finite parameters after epoch {epoch + 1}")
        _log.debug("epoch %d: %d/%d updates", epoch + 1, updates, len(pairs))
    return TrainedModel(params, customer_ids, item_ids, seen, cfg)


def save_model(model: TrainedModel, path) -> None:
    p = model.params
    header = {
        "format_version": FORMAT_VERSION,
        "dim": p.dim,
        "customer_ids": list(model.customer_ids),
        "item_ids": list(model.item_ids),
        "seen": {str(u): items.tolist() for u, items in model.seen.items()},
        "config": asdict(model.config),
    }
    with open(path, "wb") as fh:
        fh.write(FORMAT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n")
        for a in p._arrays():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_model(path) -> TrainedModel:
    data = Path(path).read_bytes()
    if not data.startswith(FORMAT_MAGIC):
        raise ValueError(f"{path}: not a model file")
    body = data[len(FORMAT_MAGIC):]
    nl = body.index(b"\n")
    header = json.loads(body[:nl])
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format {header.get('format_version')!r}")
    d = header["dim"]
    nu, ni = len(header["customer_ids"]), len(header["item_ids"])
    flat = np.frombuffer(body[nl + 1:], dtype="<f8")
    sizes = [nu * d, ni * d, nu, ni]
    if len(flat) != sum(sizes):
        raise ValueError(f"{path}: truncated model file")
    parts = np.split(flat.astype(np.float64), np.cumsum(sizes)[:-1])
    params = ModelParams(parts[0].reshape(nu, d), parts[1].reshape(ni, d), parts[2], parts[3])
    seen = {int(u): np.array(v, dtype=np.int64) for u, v in header["seen"].items()}
    return TrainedModel(params, tuple(header["customer_ids"]), tuple(header["item_ids"]),
                        seen, TrainConfig(**header["config"]))
