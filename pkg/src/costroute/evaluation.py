"""Realized quality/cost of routing decisions, deferral curves, selection
rates and quality-neutral cost.

Realized quality is always measured in raw metric units from the stored
true labels; estimates only drive the routing.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .estimator import predict_matrix
from .pool import Dataset, RoutingPool
from .router import RouteDecision, check_model_order, ordered_mean, route_matrix
from .stats import TTestResult, welch_ttest  # noqa: F401  re-exported

DEFAULT_GRID_POINTS = 50
GRID_DECADES = 6


def _chosen_indices(decisions: Sequence, data: Dataset, pool: RoutingPool) -> np.ndarray:
    by_prompt: dict[str, str] = {}
    for dec in decisions:
        pid, chosen = _decision_fields(dec)
        if pid in by_prompt:
            raise ValidationError(f"duplicate decision for prompt {pid!r}")
        by_prompt[pid] = chosen
    known = set(data.prompt_ids)
    for pid in by_prompt:
        if pid not in known:
            raise ValidationError(f"decision for unknown prompt {pid!r}")
    ids = pool.ids
    out = np.empty(len(data), dtype=np.int64)
    for i, pid in enumerate(data.prompt_ids):
        if pid not in by_prompt:
            raise ValidationError(f"missing decision for prompt {pid!r}")
        chosen = by_prompt[pid]
        if chosen not in ids:
            raise ValidationError(f"decision for {pid!r} names unknown model {chosen!r}")
        out[i] = ids.index(chosen)
    return out


def _decision_fields(dec) -> tuple[str, str]:
    if isinstance(dec, RouteDecision):
        return dec.prompt_id, dec.chosen_id
    return dec["prompt_id"], dec["chosen"]


def quality_cost_of(indices: np.ndarray, labels: np.ndarray, costs: np.ndarray) -> tuple[float, float]:
    """(Q, C) for per-prompt model indices; prompt-order summation."""
    rows = np.arange(indices.shape[0])
    return ordered_mean(labels[rows, indices]), ordered_mean(costs[indices])


def avg_quality_cost(decisions: Sequence, data: Dataset, pool: RoutingPool) -> tuple[float, float]:
    """Average realized raw quality and average cost of ``decisions`` on ``data``."""
    if len(data) == 0:
        raise ValidationError("empty split")
    idx = _chosen_indices(decisions, data, pool)
    return quality_cost_of(idx, data.label_matrix(), pool.costs)


def _rates_from_indices(indices: np.ndarray, ids: Sequence[str]) -> dict[str, float]:
    if indices.size == 0:
        raise ValidationError("selection rates of an empty decision set")
    counts = np.bincount(indices, minlength=len(ids))
    return {mid: float(counts[j]) / indices.size for j, mid in enumerate(ids)}


def selection_rates(decisions: Sequence, pool: RoutingPool) -> dict[str, float]:
    """Fraction of decisions sent to each pool model (zeros included)."""
    ids = pool.ids
    idx = []
    for dec in decisions:
        chosen = _decision_fields(dec)[1]
        if chosen not in ids:
            raise ValidationError(f"unknown model {chosen!r}")
        idx.append(ids.index(chosen))
    return _rates_from_indices(np.array(idx, dtype=np.int64), ids)


@dataclass(frozen=True)
class DeferralPoint:
    lam: float
    avg_cost: float
    avg_quality: float
    rates: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class DeferralCurve:
    points: tuple[DeferralPoint, ...]

    def __post_init__(self):
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        for a, b in zip(pts, pts[1:]):
            if not b.lam > a.lam:
                raise ValidationError("deferral curve lambdas must be strictly increasing")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def costs(self) -> np.ndarray:
        return np.array([p.avg_cost for p in self.points])

    @property
    def qualities(self) -> np.ndarray:
        return np.array([p.avg_quality for p in self.points])

    def to_csv(self, model_ids: Sequence[str]) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "avg_cost", "avg_quality"] + [f"rate_{m}" for m in model_ids])
        for p in self.points:
            w.writerow([repr(float(p.lam)), repr(float(p.avg_cost)), repr(float(p.avg_quality))]
                       + [repr(float(p.rates[m])) for m in model_ids])
        return buf.getvalue()


def curve_from_csv(text: str) -> DeferralCurve:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:3] != ["lambda", "avg_cost", "avg_quality"]:
        raise ValidationError("curve CSV: bad header")
    ids = [h[len("rate_"):] for h in rows[0][3:]]
    points = []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        try:
            vals = [float(v) for v in row]
        except ValueError as e:
            raise ValidationError(f"curve CSV line {lineno}: {e}") from e
        if len(vals) != 3 + len(ids):
            raise ValidationError(f"curve CSV line {lineno}: expected {3 + len(ids)} columns")
        points.append(DeferralPoint(vals[0], vals[1], vals[2], dict(zip(ids, vals[3:]))))
    return DeferralCurve(tuple(points))


def _check_grid(lambdas: Sequence[float]) -> np.ndarray:
    grid = np.asarray(lambdas, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("lambda grid must be a nonempty sequence")
    if not np.all(np.isfinite(grid)) or np.any(grid < 0):
        raise ValidationError("lambda grid values must be finite and >= 0")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("lambda grid must be strictly increasing")
    return grid


def curve_from_estimates(est: np.ndarray, data: Dataset, pool: RoutingPool,
                         lambdas: Sequence[float]) -> DeferralCurve:
    grid = _check_grid(lambdas)
    if len(data) == 0:
        raise ValidationError("empty split")
    labels = data.label_matrix()
    costs = pool.costs
    points = []
    for lam in grid:
        idx, _ = route_matrix(est, costs, float(lam))
        q, c = quality_cost_of(idx, labels, costs)
        points.append(DeferralPoint(float(lam), c, q, _rates_from_indices(idx, pool.ids)))
    return DeferralCurve(tuple(points))


def deferral_curve(estimator, data: Dataset, pool: RoutingPool, lambdas: Sequence[float]) -> DeferralCurve:
    """One (lambda, C, Q, rates) point per grid value.

    Estimates are computed once; each lambda only re-runs the argmax.
    """
    check_model_order(estimator, pool)
    return curve_from_estimates(predict_matrix(estimator, data.features()), data, pool, lambdas)


def default_lambda_grid(costs: np.ndarray, n: int = DEFAULT_GRID_POINTS,
                        include_zero: bool = True) -> np.ndarray:
    """Zero plus ``n`` log-spaced values over six decades.

    The top value is ten times the inverse of the smallest positive cost
    gap, which forces every prompt onto a cheapest model whenever the
    estimates lie in [0, 1].
    """
    distinct = np.unique(np.asarray(costs, dtype=np.float64))
    gap = float(np.diff(distinct).min()) if distinct.size > 1 else 1.0
    top = math.log10(10.0 / gap)
    grid = np.logspace(top - GRID_DECADES, top, n)
    return np.concatenate([[0.0], grid]) if include_zero else grid


def parse_lambda_grid(spec: str, include_zero: bool = True) -> np.ndarray:
    """Parse ``log:<lo>:<hi>:<n>`` or a comma list into a sorted grid."""
    spec = spec.strip()
    try:
        if spec.startswith("log:"):
            parts = spec.split(":")
            if len(parts) != 4:
                raise ValueError("expected log:<lo>:<hi>:<n>")
            lo, hi, n = float(parts[1]), float(parts[2]), int(parts[3])
            if not (0 < lo <= hi) or n < 1:
                raise ValueError("need 0 < lo <= hi and n >= 1")
            vals = np.logspace(math.log10(lo), math.log10(hi), n) if n > 1 else np.array([lo])
        else:
            vals = np.array([float(v) for v in spec.split(",") if v.strip()])
    except ValueError as e:
        raise ValidationError(f"bad lambda grid {spec!r}: {e}") from e
    if include_zero:
        vals = np.concatenate([[0.0], vals])
    vals = np.unique(vals)
    if vals.size == 0 or np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValidationError(f"bad lambda grid {spec!r}")
    return vals


def qnc(points: DeferralCurve | Iterable[tuple[float, float]], ref_cost: float,
        ref_quality: float) -> float | None:
    """Quality-neutral cost as a percentage of ``ref_cost``.

    The curve is sorted by cost and replaced by its running-maximum quality
    envelope; the first cost at which the piecewise-linear envelope reaches
    ``ref_quality`` is compared with ``ref_cost``. Returns ``None`` when the
    curve never reaches the reference quality.
    """
    if not ref_cost > 0:
        raise ValidationError("ref_cost must be positive")
    if isinstance(points, DeferralCurve):
        pts = list(zip(points.costs.tolist(), points.qualities.tolist()))
    else:
        pts = [(float(c), float(q)) for c, q in points]
    if not pts:
        raise ValidationError("qnc needs at least one curve point")
    pts.sort()
    costs = [c for c, _ in pts]
    env = np.maximum.accumulate([q for _, q in pts]).tolist()
    if env[-1] < ref_quality:
        return None
    if env[0] >= ref_quality:
        c_star = costs[0]
    else:
        j = next(i for i, q in enumerate(env) if q >= ref_quality)
        c0, c1, q0, q1 = costs[j - 1], costs[j], env[j - 1], env[j]
        c_star = c0 + (ref_quality - q0) * (c1 - c0) / (q1 - q0)
    return 100.0 * c_star / ref_cost


def fixed_model_points(data: Dataset, pool: RoutingPool) -> list[tuple[str, float, float]]:
    """(id, cost, mean raw label) of each model used alone."""
    labels = data.label_matrix()
    return [(mid, float(pool.costs[j]), ordered_mean(labels[:, j])) for j, mid in enumerate(pool.ids)]
