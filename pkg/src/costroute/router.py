"""Cost-penalized argmax routing.

Each prompt goes to the model maximizing ``estimate[m] - lam * cost[m]``.
Exact ties go to the cheaper model, then to the lower pool index; with that
policy the chosen cost can only go down as ``lam`` grows.

Model indices are 0-based pool positions throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InfeasibleError, ValidationError
from .estimator import predict_matrix
from .pool import Dataset, LabelScaler, RoutingPool, fit_scaler


@dataclass(frozen=True)
class RouterConfig:
    lam: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.lam) or self.lam < 0:
            raise ValidationError(f"lambda must be finite and >= 0, got {self.lam}")


@dataclass(frozen=True, eq=False)
class RouteDecision:
    prompt_id: str
    index: int
    chosen_id: str
    estimates: np.ndarray
    adjusted: np.ndarray
    lam: float

    def to_dict(self) -> dict:
        return {
            "prompt_id": self.prompt_id,
            "chosen": self.chosen_id,
            "lambda": self.lam,
            "adjusted": [float(a) for a in self.adjusted],
        }


def ordered_mean(values) -> float:
    """Mean with a strictly left-to-right summation.

    Clamped to [min, max] of the terms, which rounding can otherwise
    overshoot by an ulp (N copies of c must average to exactly c).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValidationError("mean of an empty sequence")
    return float(min(max(np.cumsum(v)[-1] / v.size, v.min()), v.max()))


def route_matrix(estimates: np.ndarray, costs: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Chosen indices and adjusted scores for an N x M estimate matrix."""
    est = np.ascontiguousarray(estimates, dtype=np.float64)
    if est.ndim != 2 or est.shape[1] != costs.shape[0]:
        raise ValidationError(f"estimate length does not match pool size {costs.shape[0]}")
    if not np.all(np.isfinite(est)):
        raise ValidationError("non-finite quality estimate")
    adjusted = est - lam * costs[None, :]
    if est.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), adjusted
    return kernels.select_routes(adjusted, costs), adjusted


def route(estimate, pool: RoutingPool, cfg: RouterConfig, prompt_id: str = "") -> RouteDecision:
    est = np.asarray(estimate, dtype=np.float64)
    if est.ndim != 1:
        raise ValidationError("estimate must be a 1-D vector")
    idx, adj = route_matrix(est[None, :], pool.costs, cfg.lam)
    m = int(idx[0])
    return RouteDecision(prompt_id, m, pool.ids[m], est, adj[0], cfg.lam)


def decisions_from_estimates(data: Dataset, pool: RoutingPool, est: np.ndarray, lam: float) -> list[RouteDecision]:
    idx, adj = route_matrix(est, pool.costs, lam)
    ids = pool.ids
    return [
        RouteDecision(rec.prompt_id, int(m), ids[m], est[i], adj[i], lam)
        for i, (rec, m) in enumerate(zip(data.records, idx))
    ]


def check_model_order(estimator, pool: RoutingPool) -> None:
    order = tuple(getattr(estimator, "model_order", ()))
    if order != pool.ids:
        raise ValidationError(f"estimator model order {order} does not match pool {pool.ids}")


def route_batch(estimator, data: Dataset, pool: RoutingPool, cfg: RouterConfig) -> list[RouteDecision]:
    """Route every record of ``data``, preserving record order."""
    check_model_order(estimator, pool)
    return decisions_from_estimates(data, pool, predict_matrix(estimator, data.features()), cfg.lam)


def oracle_estimates(data: Dataset, scaler: LabelScaler | None = None) -> np.ndarray:
    """Scaled true labels, the best possible plug-in estimate.

    Without an explicit scaler one is fit on ``data`` itself; a constant
    label matrix falls back to the identity scaling.
    """
    labels = data.label_matrix()
    if scaler is None:
        if labels.size == 0 or labels.min() == labels.max():
            return labels
        scaler = fit_scaler(labels)
    return np.atleast_2d(scaler.apply(labels)).reshape(labels.shape)


def oracle_route(data: Dataset, pool: RoutingPool, cfg: RouterConfig,
                 scaler: LabelScaler | None = None) -> list[RouteDecision]:
    return decisions_from_estimates(data, pool, oracle_estimates(data, scaler), cfg.lam)


def _avg_cost(est: np.ndarray, costs: np.ndarray, lam: float) -> float:
    idx, _ = route_matrix(est, costs, lam)
    return ordered_mean(costs[idx])


def calibrate_from_estimates(est: np.ndarray, costs: np.ndarray, budget: float, tol: float = 1e-6,
                             max_doublings: int = 200) -> float:
    """Smallest lambda (to within ``tol``) whose routed average cost is <= budget.

    Bisection relies on average cost being nonincreasing in lambda. The
    returned value is always feasible.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if est.shape[0] == 0:
        raise ValidationError("cannot calibrate on an empty split")
    if budget < costs.min():
        raise InfeasibleError(
            f"infeasible budget {budget}: below the cheapest model cost {costs.min()}"
        )
    if _avg_cost(est, costs, 0.0) <= budget:
        return 0.0
    spread = float((est.max(axis=1) - est.min(axis=1)).max())
    distinct = np.unique(costs)
    gap = float(np.diff(distinct).min()) if distinct.size > 1 else 1.0
    hi = spread / gap if spread > 0 else 1.0
    for _ in range(max_doublings):
        if _avg_cost(est, costs, hi) <= budget:
            break
        hi *= 2.0
    else:  # pragma: no cover - cost-dominated limit always reached
        raise InfeasibleError("no feasible lambda found")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _avg_cost(est, costs, mid) <= budget:
            hi = mid
        else:
            lo = mid
    return hi


def calibrate_lambda(estimator, data: Dataset, pool: RoutingPool, budget: float,
                     tol: float = 1e-6) -> float:
    if budget < pool.costs.min():
        raise InfeasibleError(
            f"infeasible budget {budget}: below the cheapest model cost {pool.costs.min()}"
        )
    check_model_order(estimator, pool)
    est = predict_matrix(estimator, data.features())
    return calibrate_from_estimates(est, pool.costs, budget, tol)


def decisions_to_jsonl(decisions: Sequence[RouteDecision]) -> str:
    return "".join(json.dumps(d.to_dict()) + "\n" for d in decisions)


def decisions_from_jsonl(doc: bytes | str) -> list[dict]:
    """Parse a decisions file into plain dicts (prompt_id, chosen, lambda, adjusted)."""
    if isinstance(doc, bytes):
        doc = doc.decode("utf-8")
    out = []
    for lineno, line in enumerate(doc.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            for key in ("prompt_id", "chosen", "lambda", "adjusted"):
                if key not in obj:
                    raise ValidationError(f"missing field {key!r}")
        except (json.JSONDecodeError, ValidationError) as e:
            raise ValidationError(f"line {lineno}: {e}") from e
        out.append(obj)
    return out
