import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from costroute.errors import DegenerateError, ValidationError
from costroute.pool import (
    LabelScaler,
    apply_scaler,
    compute_labels,
    featurize_prompt,
    fit_scaler,
    load_dataset,
    load_pool,
)

from conftest import NINE_MODEL_COSTS


def pool_doc(models):
    return json.dumps({"models": models})


def test_load_nine_model_pool():
    pool = load_pool(pool_doc([{"id": f"m{i}", "cost": c} for i, c in enumerate(NINE_MODEL_COSTS)]))
    assert len(pool) == 9
    assert pool.ids == tuple(f"m{i}" for i in range(9))
    assert pool.costs.tolist() == list(NINE_MODEL_COSTS)


def test_single_zero_cost_model():
    pool = load_pool(pool_doc([{"id": "a", "cost": 0}]))
    assert len(pool) == 1 and pool.costs[0] == 0.0


@pytest.mark.parametrize(
    "models, needle",
    [
        ([{"id": "a", "cost": 1}, {"id": "a", "cost": 2}], "duplicate id"),
        ([{"id": "a", "cost": -1}], "cost"),
        ([], "models"),
        ([{"cost": 1}], "id"),
        ([{"id": "", "cost": 1}], "id"),
    ],
)
def test_pool_rejections_name_the_field(models, needle):
    with pytest.raises(ValidationError, match=needle):
        load_pool(pool_doc(models))


def test_pool_meta_and_roundtrip():
    doc = pool_doc([{"id": "sdxl22", "cost": 263.3, "meta": {"steps": "22"}}])
    pool = load_pool(doc)
    assert pool.models[0].meta["steps"] == "22"
    assert load_pool(pool.to_json()) == pool


def _line(pid, feats, quals, split="train", text=None):
    obj = {"prompt_id": pid, "features": feats, "qualities": quals, "split": split}
    if text is not None:
        obj["text"] = text
    return json.dumps(obj)


@pytest.fixture
def ab_pool():
    return load_pool(pool_doc([{"id": "a", "cost": 1}, {"id": "b", "cost": 2}]))


def test_load_dataset_well_formed(ab_pool):
    doc = "\n".join([
        _line("x", [0, 0, 0, 1], {"a": [0.1, 0.3], "b": [0.5]}),
        _line("y", [1, 0, 0, 0], {"a": [0.2], "b": [0.6, 0.6]}, "test", text="a dog"),
    ])
    ds = load_dataset(doc, ab_pool)
    assert len(ds) == 2 and ds.d == 4
    assert ds.records[0].labels["a"] == pytest.approx(0.2)
    assert ds.records[1].text == "a dog"
    assert len(ds.split("test")) == 1


def test_missing_model_names_model_and_line(ab_pool):
    doc = "\n".join([
        _line("x", [0, 0, 0, 1], {"a": [0.1], "b": [0.5]}),
        _line("y", [0, 0, 0, 1], {"a": [0.1]}),
    ])
    with pytest.raises(ValidationError, match=r"line 2.*'b'"):
        load_dataset(doc, ab_pool)


def test_dimension_mismatch(ab_pool):
    doc = "\n".join([
        _line("x", [0, 0, 0, 1], {"a": [0.1], "b": [0.5]}),
        _line("y", [0, 0, 1], {"a": [0.1], "b": [0.5]}),
    ])
    with pytest.raises(ValidationError, match="dimension mismatch"):
        load_dataset(doc, ab_pool)


def test_duplicate_prompt_and_malformed_json(ab_pool):
    dup = "\n".join([_line("x", [1], {"a": [0.1], "b": [0.5]})] * 2)
    with pytest.raises(ValidationError, match="line 2.*duplicate"):
        load_dataset(dup, ab_pool)
    with pytest.raises(ValidationError, match="line 1"):
        load_dataset("{not json", ab_pool)
    with pytest.raises(ValidationError, match="split"):
        load_dataset(_line("x", [1], {"a": [0.1], "b": [0.5]}, split="dev"), ab_pool)


@pytest.mark.parametrize(
    "samples, expected",
    [((0.3,), 0.3), ((0.2, 0.4, 0.4, 0.6), 0.4), ((1.0, 1.0, 1.0), 1.0), ((0.1, 0.1, 0.1), 0.1)],
)
def test_compute_labels(samples, expected):
    assert compute_labels(samples) == expected


def test_compute_labels_empty():
    with pytest.raises(ValidationError):
        compute_labels(())


def test_fit_scaler_examples():
    s = fit_scaler([0.2, 0.7, 0.45])
    assert (s.lo, s.hi) == (0.2, 0.7)
    s = fit_scaler([0.0, 1.0])
    assert (s.lo, s.hi) == (0.0, 1.0)
    with pytest.raises(DegenerateError, match="degenerate label range"):
        fit_scaler([0.5, 0.5])


def test_apply_scaler_examples():
    s = LabelScaler(0.2, 0.7)
    assert apply_scaler(s, 0.45) == pytest.approx(0.5, abs=1e-15)
    assert apply_scaler(s, 0.9) == 1.0
    assert apply_scaler(s, 0.0) == 0.0
    # CLIPScore 0.318 through the identity scaler
    assert apply_scaler(LabelScaler(0.0, 1.0), 0.318) == 0.318


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.lists(finite, min_size=2, max_size=30).filter(lambda v: min(v) < max(v)), finite, finite)
def test_scaler_monotone_and_endpoints(labels, u, v):
    s = fit_scaler(labels)
    assert s.apply(min(labels)) == 0.0
    assert s.apply(max(labels)) == 1.0
    lo, hi = sorted((u, v))
    assert s.apply(lo) <= s.apply(hi)


def test_featurize_deterministic_and_normalized():
    a = featurize_prompt("abc", 64)
    b = featurize_prompt("abc", 64)
    assert a.tobytes() == b.tobytes()
    assert np.count_nonzero(a) == 1
    assert not np.any(featurize_prompt("", 64))
    assert not np.any(featurize_prompt("ab", 64))
    v = featurize_prompt("a colorful park with a crowd", 64)
    # independent sum-of-squares oracle
    assert math.sqrt(sum(float(x) * float(x) for x in v)) == pytest.approx(1.0, abs=1e-9)


def test_featurize_fnv_bucket():
    # FNV-1a 64 of b"abc" computed by hand from the published constants
    h = 0xCBF29CE484222325
    for byte in b"abc":
        h = ((h ^ byte) * 0x100000001B3) % (1 << 64)
    assert h == 0xE71FA2190541574B
    v = featurize_prompt("abc", 97)
    assert v[h % 97] == 1.0


@settings(max_examples=50)
@given(st.text(max_size=40), st.integers(1, 128))
def test_featurize_pure(text, d):
    a = featurize_prompt(text, d)
    assert a.shape == (d,)
    assert a.tobytes() == featurize_prompt(text, d).tobytes()
    n = np.linalg.norm(a)
    assert n == 0.0 or abs(n - 1.0) < 1e-12


def test_dataset_roundtrip(ab_pool):
    doc = "\n".join([
        _line("x", [0.1, 1e-17, 3.3333333333333335], {"a": [0.1, 0.30000000000000004], "b": [0.5]}),
        _line("y", [1.0, 2.0, -7.5], {"a": [0.2], "b": [0.6, 0.7, 0.8]}, "val", text="hi there"),
    ])
    ds = load_dataset(doc, ab_pool)
    again = load_dataset(ds.to_jsonl(), ab_pool)
    assert again.to_jsonl() == ds.to_jsonl()
    for r1, r2 in zip(ds.records, again.records):
        assert r1.features.tobytes() == r2.features.tobytes()
        assert dict(r1.quality_samples) == dict(r2.quality_samples)
        assert dict(r1.labels) == dict(r2.labels)
        assert (r1.split, r1.text) == (r2.split, r2.text)


@given(st.lists(st.lists(st.floats(0, 1), min_size=1, max_size=5), min_size=2, max_size=2))
def test_labels_are_sample_means(samples):
    from costroute.pool import PromptRecord

    rec = PromptRecord("p", [0.0], {"a": samples[0], "b": samples[1]})
    for mid, s in zip("ab", samples):
        assert abs(rec.labels[mid] - sum(s) / len(s)) <= 1e-12
