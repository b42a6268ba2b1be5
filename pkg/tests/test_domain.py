import pickle

import pytest
from conftest import make_dataset
from hypothesis import given, settings
from hypothesis import strategies as st

from profitrec.domain import (
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


def test_profile_is_mean_of_purchases(tiny):
    profiles = build_customer_profiles(tiny)
    assert profiles["u1"].avg_purchase_retail_price == 150.0


def test_duplicate_purchases_count_per_event(tiny):
    assert build_customer_profiles(tiny)["u3"].avg_purchase_retail_price == 80.0


def test_view_only_customer_gets_global_purchase_mean():
    d = make_dataset(
        [("a", "X", "purchase", 0), ("a", "Y", "purchase", 1), ("b", "X", "view", 2)],
        [("X", 100.0, 10.0), ("Y", 140.0, 10.0), ("Z", 1000.0, 10.0)],
    )
    profiles = build_customer_profiles(d)
    assert profiles["b"].avg_purchase_retail_price == 120.0
    # customers absent from the log use the same fallback
    assert profiles.avg_price("stranger") == 120.0


def test_no_purchases_falls_back_to_catalog_mean():
    d = make_dataset([("a", "X", "view", 0)], [("X", 10.0, 5.0), ("Y", 30.0, 5.0)])
    assert build_customer_profiles(d)["a"].avg_purchase_retail_price == 20.0


def test_empty_catalog_rejected():
    with pytest.raises(ValidationError):
        build_customer_profiles(Dataset((), {}))


def test_validate_reports_unknown_item():
    d = make_dataset([("a", "nope", "view", 0)], [("X", 10.0, 5.0)])
    problems = validate_dataset(d)
    assert len(problems) == 1
    assert "nope" in problems[0]


def test_validate_reports_zero_price():
    d = make_dataset([("a", "X", "view", 0)], [("X", 10.0, 0.0)])
    assert len(validate_dataset(d)) == 1


def test_validate_reports_negative_timestamp():
    d = make_dataset([("a", "X", "view", -5)], [("X", 10.0, 5.0)])
    assert len(validate_dataset(d)) == 1


def test_validate_clean(tiny):
    assert validate_dataset(tiny) == []


def test_negative_margin_is_legal():
    rec = ItemRecord("X", 10.0, 100.0)
    assert rec.margin == pytest.approx(-0.9)
    assert validate_dataset(Dataset((), {"X": rec})) == []


@pytest.mark.parametrize("alpha,beta", [(1.1, 0), (0, -1.01), (float("nan"), 0)])
def test_hyperparams_range(alpha, beta):
    with pytest.raises(ValidationError):
        HyperParams(alpha, beta)


def test_hyperparams_bounds_inclusive():
    HyperParams(-1.0, 1.0)


def test_profile_must_be_positive():
    with pytest.raises(ValidationError):
        CustomerProfile("a", 0.0)


def test_scored_item_final_is_product():
    s = ScoredItem("x", 0.4, 2.5)
    assert s.final_score == 0.4 * 2.5


def test_unknown_action():
    with pytest.raises(ValidationError):
        Action.parse("click")


def test_dataset_pickles(tiny):
    again = pickle.loads(pickle.dumps(tiny))
    assert again.interactions == tiny.interactions
    assert dict(again.catalog) == dict(tiny.catalog)


prices = st.floats(min_value=0.01, max_value=1e5, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.tuples(st.sampled_from("abcd"), st.sampled_from("WXYZ"), st.booleans()), max_size=30),
    st.lists(prices, min_size=4, max_size=4),
    st.randoms(use_true_random=False),
)
def test_profiles_permutation_invariant_and_positive(events, item_prices, rnd):
    catalog = [ItemRecord(i, p, 1.0) for i, p in zip("WXYZ", item_prices)]
    xs = [Interaction(c, i, Action.PURCHASE if buy else Action.VIEW, n)
          for n, (c, i, buy) in enumerate(events)]
    shuffled = xs[:]
    rnd.shuffle(shuffled)
    a = build_customer_profiles(Dataset.from_records(xs, catalog))
    b = build_customer_profiles(Dataset.from_records(shuffled, catalog))
    assert a == b
    assert a.fallback == b.fallback
    assert all(p.avg_purchase_retail_price > 0 for p in a.values())


def test_valid_dataset_accepted_downstream(tiny):
    from profitrec.evaluation import time_split
    from profitrec.mf_baseline import TrainConfig, fit

    assert validate_dataset(tiny) == []
    train, test = time_split(tiny)
    build_customer_profiles(train)
    fit(train, TrainConfig(epochs=2, latent_dim=2))
