import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from profitrec.datagen import GenConfig, generate_labeled
from profitrec.domain import Action, Dataset, Interaction, ItemRecord, build_customer_profiles
from profitrec.evaluation import time_split
from profitrec.mf_baseline import ModelParams, TrainConfig, TrainedModel, fit

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_dataset(events, items):
    """events: (customer, item, 'view'|'purchase', ts); items: (id, retail, cost)."""
    return Dataset.from_records(
        [Interaction(c, i, Action(a), t) for c, i, a, t in events],
        [ItemRecord(*it) for it in items],
    )


@pytest.fixture
def tiny():
    items = [("A", 100.0, 50.0), ("B", 200.0, 100.0), ("C", 80.0, 80.0), ("D", 10.0, 100.0)]
    events = [
        ("u1", "A", "purchase", 1),
        ("u1", "B", "purchase", 2),
        ("u2", "C", "view", 3),
        ("u3", "C", "purchase", 4),
        ("u3", "C", "purchase", 5),
        ("u1", "D", "view", 6),
    ]
    return make_dataset(events, items)


@pytest.fixture(scope="session")
def small_generated():
    return generate_labeled(GenConfig(n_customers=400, n_items=150, seed=7))


@pytest.fixture(scope="session")
def small_trained(small_generated):
    d = small_generated.dataset
    train, test = time_split(d)
    model = fit(train, TrainConfig(epochs=15, latent_dim=16, seed=3))
    return d, train, test, model, build_customer_profiles(train)


def handset_model(n_users=20, n_items=50, dim=4, seed=11, seen_per_user=3):
    """A model with hand-chosen (seeded) parameters, skipping training."""
    rng = np.random.default_rng(seed)
    params = ModelParams(
        rng.normal(0, 1, (n_users, dim)),
        rng.normal(0, 1, (n_items, dim)),
        rng.normal(0, 0.3, n_users),
        rng.normal(0, 0.3, n_items),
    )
    customers = tuple(f"u{n:02d}" for n in range(n_users))
    items = tuple(f"i{n:02d}" for n in range(n_items))
    seen = {u: np.sort(rng.choice(n_items, seen_per_user, replace=False)) for u in range(n_users)}
    return TrainedModel(params, customers, items, seen, TrainConfig(latent_dim=dim))
