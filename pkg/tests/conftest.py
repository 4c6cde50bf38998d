import numpy as np
import pytest

from costroute.pool import Dataset, ModelCandidate, PromptRecord, RoutingPool

# Per-model TFLOPs of the nine-model text-to-image pool (Infinity ... SDXL100).
NINE_MODEL_COSTS = (1.50, 1.54, 23.92, 119.70, 210.00, 239.40, 598.50, 598.50, 1197.00)


def make_pool(costs, ids=None):
    ids = ids or [chr(ord("a") + i) for i in range(len(costs))]
    return RoutingPool(tuple(ModelCandidate(i, float(c)) for i, c in zip(ids, costs)))


def make_dataset(labels, costs, features=None, split="train", ids=None):
    """Dataset whose records have a single quality sample equal to ``labels[i][m]``."""
    labels = np.asarray(labels, dtype=float)
    pool = make_pool(costs, ids)
    n = labels.shape[0]
    if features is None:
        features = np.arange(n, dtype=float)[:, None]
    features = np.asarray(features, dtype=float)
    recs = []
    for i in range(n):
        q = {mid: [labels[i, j]] for j, mid in enumerate(pool.ids)}
        recs.append(PromptRecord(f"p{i}", features[i], q, split))
    return Dataset(pool, tuple(recs), features.shape[1])


@pytest.fixture
def two_model_pool():
    return make_pool((1.0, 2.0))
