import itertools
import json
import math

import numpy as np
import pytest

from costroute.errors import ValidationError
from costroute.synth import (
    SynthSpec,
    TruthEstimator,
    assignment_point,
    brute_force_frontier,
    bundled_spec,
    frontier_to_csv,
    generate_synth_dataset,
    load_synth_spec,
)

from conftest import make_dataset, make_pool


def small_spec(**kw):
    base = dict(
        pool=make_pool((1.0, 10.0)), centers=((1.0, 0.0), (0.0, 1.0)),
        mu=((0.9, 0.5), (0.5, 0.9)), sigma_q=0.0, n=10, s=3, seed=5, jitter=0.05,
    )
    base.update(kw)
    return SynthSpec(**base)


def python_frontier(labels, costs):
    """Every assignment via itertools, fsum means, quadratic dominance filter."""
    n, m = labels.shape
    pts = []
    for a in itertools.product(range(m), repeat=n):
        c = math.fsum(costs[j] for j in a) / n
        q = math.fsum(labels[i, j] for i, j in enumerate(a)) / n
        pts.append((c, q))
    keep = {p for p in pts if not any(o[0] <= p[0] and o[1] >= p[1] and o != p for o in pts)}
    return sorted(keep)


def test_noiseless_labels_equal_mu():
    data, truth = generate_synth_dataset(small_spec())
    for rec in data.records:
        row = truth.mu[truth.clusters[rec.prompt_id]]
        assert [rec.labels[m] for m in data.pool.ids] == row.tolist()


def test_round_robin_and_splits():
    data, truth = generate_synth_dataset(small_spec(n=20))
    assert [truth.clusters[p] for p in data.prompt_ids] == [i % 2 for i in range(20)]
    assert [r.split for r in data.records[:10]] == ["train"] * 6 + ["val"] * 2 + ["test"] * 2
    for rec in data.records:
        centre = truth.centers[truth.clusters[rec.prompt_id]]
        assert np.max(np.abs(rec.features - centre)) < 0.05 * 6


def test_deterministic_and_seed_sensitive():
    spec = small_spec(sigma_q=0.1, n=12)
    d1, t1 = generate_synth_dataset(spec)
    d2, t2 = generate_synth_dataset(spec)
    assert d1.to_jsonl() == d2.to_jsonl() and t1.to_json() == t2.to_json()
    d3, _ = generate_synth_dataset(spec, seed=6)
    assert d3.to_jsonl() != d1.to_jsonl()


def test_noise_clipped():
    data, _ = generate_synth_dataset(small_spec(sigma_q=2.0, n=30, s=5))
    vals = [v for r in data.records for s in r.quality_samples.values() for v in s]
    assert min(vals) >= 0.0 and max(vals) <= 1.0
    assert 0.0 in vals and 1.0 in vals


def test_truth_estimator_two_cluster():
    data, truth = generate_synth_dataset(small_spec())
    est = TruthEstimator(truth)
    pred = est.predict(data.features())
    for rec, row in zip(data.records, pred):
        assert row.tolist() == truth.mu[truth.clusters[rec.prompt_id]].tolist()
    assert est.predict(truth.centers[1]).tolist() == [0.5, 0.9]


def test_spec_json_and_bundle():
    spec = bundled_spec("two_cluster")
    assert spec.pool.ids == ("a", "b") and spec.mu == ((0.9, 0.5), (0.5, 0.9))
    assert load_synth_spec(json.dumps(spec.to_dict())) == spec


@pytest.mark.parametrize(
    "kw",
    [dict(n=0), dict(s=0), dict(sigma_q=-0.1), dict(mu=((0.9,), (0.5,))), dict(centers=()),
     dict(mu=((float("nan"), 0.5), (0.5, 0.9)))],
)
def test_spec_validation(kw):
    with pytest.raises(ValidationError):
        small_spec(**kw)


def test_spec_json_errors():
    with pytest.raises(ValidationError):
        load_synth_spec("{")
    with pytest.raises(ValidationError):
        load_synth_spec(json.dumps({"models": []}))


def test_hand_enumerated_frontier():
    # costs (1, 3); labels in eighths so every sum is exact
    # aaa (3, 1.25)  baa (5, 1.75)  aba (5, 1.375)  aab (5, 1.25)
    # bba (7, 1.875) bab (7, 1.75)  abb (7, 1.375)  bbb (9, 1.875)
    labels = [[0.25, 0.75], [0.5, 0.625], [0.5, 0.5]]
    ds = make_dataset(labels, (1.0, 3.0))
    front = brute_force_frontier(ds, ds.pool)
    assert [(p.cost, p.quality, p.assignment) for p in front] == [
        (3.0 / 3, 1.25 / 3, (0, 0, 0)),
        (5.0 / 3, 1.75 / 3, (1, 0, 0)),
        (7.0 / 3, 1.875 / 3, (1, 1, 0)),
    ]


def test_single_prompt_frontier():
    ds = make_dataset([[0.3, 0.2, 0.8, 0.8]], (1.0, 2.0, 3.0, 4.0))
    front = brute_force_frontier(ds, ds.pool)
    assert [(p.cost, p.quality) for p in front] == [(1.0, 0.3), (3.0, 0.8)]


def test_single_model_frontier():
    ds = make_dataset([[0.3], [0.6], [0.1]], (2.0,))
    front = brute_force_frontier(ds, ds.pool)
    assert len(front) == 1 and front[0].cost == 2.0


@pytest.mark.parametrize("seed", range(6))
def test_matches_python_enumeration(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 6)), int(rng.integers(1, 4))
    labels = rng.uniform(size=(n, m))
    costs = rng.uniform(0.5, 10, size=m)
    ds = make_dataset(labels, costs)
    got = [(p.cost, p.quality) for p in brute_force_frontier(ds, ds.pool, chunk=7)]
    want = python_frontier(labels, costs)
    assert len(got) == len(want)
    for (c1, q1), (c2, q2) in zip(got, want):
        assert c1 == pytest.approx(c2, rel=1e-13) and q1 == pytest.approx(q2, rel=1e-13)
    for p in brute_force_frontier(ds, ds.pool):
        assert assignment_point(ds, ds.pool, p.assignment) == (p.cost, p.quality)


@pytest.mark.parametrize("seed", range(4))
def test_extreme_points(seed):
    rng = np.random.default_rng(100 + seed)
    labels = rng.uniform(size=(6, 3))
    costs = np.array([2.0, 0.5, 4.0])
    ds = make_dataset(labels, costs)
    front = brute_force_frontier(ds, ds.pool)
    assert front[0].assignment == (1,) * 6
    assert front[-1].assignment == tuple(labels.argmax(axis=1).tolist())
    assert all(a.cost < b.cost and a.quality < b.quality for a, b in zip(front, front[1:]))


def test_too_large():
    ds = make_dataset(np.zeros((12, 4)) + 0.5, (1.0, 2.0, 3.0, 4.0))
    with pytest.raises(ValidationError, match="too large"):
        brute_force_frontier(ds, ds.pool)


def test_frontier_csv():
    ds = make_dataset([[0.25, 0.75]], (1.0, 3.0))
    assert frontier_to_csv(brute_force_frontier(ds, ds.pool)) == (
        "avg_cost,avg_quality,assignment\n1.0,0.25,0\n3.0,0.75,1\n"
    )
