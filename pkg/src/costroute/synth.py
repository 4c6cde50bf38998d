"""Synthetic routing instances with known per-cluster quality, and an
exhaustive frontier over all prompt-to-model assignments.

Prompts are assigned round-robin to clusters. Features are the cluster
centre plus Gaussian jitter; each quality sample is the (cluster, model)
mean plus Gaussian noise, clipped to [0, 1]. All randomness comes from one
SplitMix64 stream consumed in a fixed order: for each prompt, ``d`` feature
draws, then ``S`` noise draws per model in pool order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ValidationError
from .pool import Dataset, ModelCandidate, PromptRecord, RoutingPool
from .rng import SplitMix64

MAX_ASSIGNMENTS = 10**7
SPLIT_CYCLE = ("train", "train", "train", "val", "test")


@dataclass(frozen=True)
class SynthSpec:
    pool: RoutingPool
    centers: tuple[tuple[float, ...], ...]
    mu: tuple[tuple[float, ...], ...]
    sigma_q: float
    n: int
    s: int
    seed: int = 0
    jitter: float = 0.05

    def __post_init__(self):
        k = len(self.centers)
        if k < 1:
            raise ValidationError("centers: need at least one cluster")
        d = len(self.centers[0])
        if d < 1 or any(len(c) != d for c in self.centers):
            raise ValidationError("centers: all centres need the same nonzero dimension")
        if len(self.mu) != k or any(len(row) != len(self.pool) for row in self.mu):
            raise ValidationError("mu: expected one row per cluster and one column per model")
        if not all(math.isfinite(v) for row in self.mu for v in row):
            raise ValidationError("mu: values must be finite")
        if not all(math.isfinite(v) for c in self.centers for v in c):
            raise ValidationError("centers: values must be finite")
        if not (self.sigma_q >= 0 and math.isfinite(self.sigma_q)):
            raise ValidationError("sigma_q must be finite and >= 0")
        if not (self.jitter >= 0 and math.isfinite(self.jitter)):
            raise ValidationError("jitter must be finite and >= 0")
        if self.n < 1 or self.s < 1:
            raise ValidationError("n and s must be >= 1")

    @property
    def d(self) -> int:
        return len(self.centers[0])

    @classmethod
    def from_dict(cls, obj: dict) -> "SynthSpec":
        try:
            pool = RoutingPool(tuple(ModelCandidate(m["id"], float(m["cost"]), m.get("meta") or {})
                                     for m in obj["models"]))
            return cls(
                pool=pool,
                centers=tuple(tuple(float(v) for v in c) for c in obj["centers"]),
                mu=tuple(tuple(float(v) for v in row) for row in obj["mu"]),
                sigma_q=float(obj["sigma_q"]),
                n=int(obj["n"]),
                s=int(obj["s"]),
                seed=int(obj.get("seed", 0)),
                jitter=float(obj.get("jitter", 0.05)),
            )
        except (KeyError, TypeError) as e:
            raise ValidationError(f"synth spec: missing or malformed field ({e})") from e

    def to_dict(self) -> dict:
        return {
            "models": [{"id": m.id, "cost": m.cost} for m in self.pool.models],
            "centers": [list(c) for c in self.centers],
            "mu": [list(r) for r in self.mu],
            "sigma_q": self.sigma_q,
            "jitter": self.jitter,
            "n": self.n,
            "s": self.s,
            "seed": self.seed,
        }


def load_synth_spec(doc: bytes | str) -> SynthSpec:
    try:
        obj = json.loads(doc)
    except json.JSONDecodeError as e:
        raise ValidationError(f"synth spec: invalid JSON ({e})") from e
    return SynthSpec.from_dict(obj)


def bundled_spec(name: str = "two_cluster") -> SynthSpec:
    """One of the specs shipped in ``costroute/data``."""
    text = resources.files("costroute").joinpath("data", f"{name}.json").read_text()
    return load_synth_spec(text)


@dataclass(frozen=True)
class SynthTruth:
    """Exact per-cluster mean quality, plus each prompt's cluster."""

    model_order: tuple[str, ...]
    centers: np.ndarray
    mu: np.ndarray
    clusters: dict[str, int]

    def to_json(self) -> str:
        return json.dumps({
            "models": list(self.model_order),
            "centers": self.centers.tolist(),
            "mu": self.mu.tolist(),
            "clusters": self.clusters,
        })


def generate_synth_dataset(spec: SynthSpec, seed: int | None = None) -> tuple[Dataset, SynthTruth]:
    """Deterministic dataset for ``(spec, seed)``; ``seed`` overrides ``spec.seed``."""
    rng = SplitMix64(spec.seed if seed is None else seed)
    k = len(spec.centers)
    ids = spec.pool.ids
    records = []
    clusters = {}
    for i in range(spec.n):
        c = i % k
        pid = f"p{i:05d}"
        feats = [x + spec.jitter * rng.gauss() for x in spec.centers[c]]
        samples = {}
        for j, mid in enumerate(ids):
            mean = spec.mu[c][j]
            samples[mid] = [min(1.0, max(0.0, mean + spec.sigma_q * rng.gauss())) for _ in range(spec.s)]
        split = SPLIT_CYCLE[(i // k) % len(SPLIT_CYCLE)]
        records.append(PromptRecord(pid, feats, samples, split))
        clusters[pid] = c
    truth = SynthTruth(ids, np.array(spec.centers, dtype=np.float64), np.array(spec.mu, dtype=np.float64),
                       clusters)
    return Dataset(spec.pool, tuple(records), spec.d), truth


@dataclass(frozen=True, eq=False)
class TruthEstimator:
    """Returns the exact mean-quality row of the nearest cluster centre."""

    truth: SynthTruth

    @property
    def model_order(self) -> tuple[str, ...]:
        return self.truth.model_order

    def predict(self, x) -> np.ndarray:
        q = np.asarray(x, dtype=np.float64)
        single = q.ndim == 1
        q = np.atleast_2d(q)
        c = self.truth.centers
        dist = ((q[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
        out = self.truth.mu[np.argmin(dist, axis=1)]
        return out[0] if single else out


@dataclass(frozen=True)
class FrontierPoint:
    cost: float
    quality: float
    assignment: tuple[int, ...]

    def dominates(self, cost: float, quality: float) -> bool:
        return self.cost <= cost and self.quality >= quality and (self.cost < cost or self.quality > quality)


def _nondominated(cost: np.ndarray, qual: np.ndarray, code: np.ndarray):
    # cost ascending, then quality descending: a point survives iff its
    # quality beats everything cheaper-or-equal before it
    order = np.lexsort((code, -qual, cost))
    q = qual[order]
    prev_best = np.concatenate([[-np.inf], np.maximum.accumulate(q)[:-1]])
    keep = order[q > prev_best]
    return cost[keep], qual[keep], code[keep]


def _decode(code: int, n: int, m: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        out.append(code % m)
        code //= m
    return tuple(out)


def _encode(assignment: Sequence[int], m: int) -> int:
    code = 0
    for j in reversed(assignment):
        code = code * m + int(j)
    return code


def assignment_point(data: Dataset, pool: RoutingPool, assignment: Sequence[int]) -> tuple[float, float]:
    """(C, Q) of one assignment, computed exactly as the frontier computes it."""
    labels = np.ascontiguousarray(data.label_matrix())
    n, m = labels.shape
    if len(assignment) != n or any(not 0 <= j < m for j in assignment):
        raise ValidationError("assignment must give one valid model index per prompt")
    code = _encode(assignment, m)
    c, q = kernels.assignment_sums(labels, pool.costs, code, code + 1)
    return float(c[0] / n), float(q[0] / n)


def brute_force_frontier(data: Dataset, pool: RoutingPool, chunk: int = 1 << 16) -> list[FrontierPoint]:
    """Non-dominated (C, Q) pairs over every deterministic assignment.

    Sorted by cost. Each point carries one witnessing assignment (the one
    with the lowest mixed-radix code, prompt 0 least significant).
    """
    labels = np.ascontiguousarray(data.label_matrix())
    n, m = labels.shape
    if n == 0:
        raise ValidationError("empty split")
    total = m ** n
    if total > MAX_ASSIGNMENTS:
        raise ValidationError(f"instance too large: {m}^{n} assignments exceeds {MAX_ASSIGNMENTS}")
    costs = pool.costs
    fc = np.zeros(0)
    fq = np.zeros(0)
    fcode = np.zeros(0, dtype=np.int64)
    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        cs, qs = kernels.assignment_sums(labels, costs, start, stop)
        fc = np.concatenate([fc, cs / n])
        fq = np.concatenate([fq, qs / n])
        fcode = np.concatenate([fcode, np.arange(start, stop, dtype=np.int64)])
        fc, fq, fcode = _nondominated(fc, fq, fcode)
    return [FrontierPoint(float(c), float(q), _decode(int(code), n, m)) for c, q, code in zip(fc, fq, fcode)]


def frontier_to_csv(points: Sequence[FrontierPoint]) -> str:
    lines = ["avg_cost,avg_quality,assignment"]
    for p in points:
        lines.append(f"{p.cost!r},{p.quality!r},{' '.join(map(str, p.assignment))}")
    return "\n".join(lines) + "\n"


def is_nondominated(cost: float, quality: float, frontier: Sequence[FrontierPoint]) -> bool:
    return not any(f.dominates(cost, quality) for f in frontier)
