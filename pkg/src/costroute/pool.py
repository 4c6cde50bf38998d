"""Routing pool and labeled prompt datasets.

A pool is the ordered list of candidate generators with their per-call
costs. A dataset is a set of prompts, each carrying a feature vector and
``S`` raw quality measurements per pool model; labels are the per-model
sample means.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateError, ValidationError

SPLITS = ("train", "val", "test")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ModelCandidate:
    id: str
    cost: float
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValidationError("model id must be a nonempty string")
        if not math.isfinite(self.cost) or self.cost < 0:
            raise ValidationError(f"cost of model {self.id!r} must be finite and >= 0, got {self.cost}")
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))


@dataclass(frozen=True)
class RoutingPool:
    models: tuple[ModelCandidate, ...]

    def __post_init__(self):
        models = tuple(self.models)
        if not models:
            raise ValidationError("models: pool must contain at least one model")
        seen = set()
        for m in models:
            if m.id in seen:
                raise ValidationError(f"models: duplicate id {m.id!r}")
            seen.add(m.id)
        object.__setattr__(self, "models", models)

    def __len__(self) -> int:
        return len(self.models)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(m.id for m in self.models)

    @property
    def costs(self) -> np.ndarray:
        return np.array([m.cost for m in self.models], dtype=np.float64)

    def index(self, model_id: str) -> int:
        return self.ids.index(model_id)

    def to_json(self) -> str:
        models = []
        for m in self.models:
            entry = {"id": m.id, "cost": m.cost}
            if m.meta:
                entry["meta"] = dict(m.meta)
            models.append(entry)
        return json.dumps({"models": models})


def load_pool(doc: bytes | str) -> RoutingPool:
    """Parse a pool-config JSON document.

    Raises:
        ValidationError: malformed JSON, empty model list, duplicate id,
            negative cost, or a missing field. The message names the field.
    """
    try:
        obj = json.loads(doc)
    except json.JSONDecodeError as e:
        raise ValidationError(f"pool: invalid JSON ({e})") from e
    if not isinstance(obj, dict) or not isinstance(obj.get("models"), list):
        raise ValidationError("models: expected an object with a 'models' array")
    models = []
    for pos, entry in enumerate(obj["models"]):
        if not isinstance(entry, dict):
            raise ValidationError(f"models[{pos}]: expected an object")
        if "id" not in entry:
            raise ValidationError(f"models[{pos}].id: missing")
        if "cost" not in entry:
            raise ValidationError(f"models[{pos}].cost: missing")
        cost = entry["cost"]
        if isinstance(cost, bool) or not isinstance(cost, (int, float)):
            raise ValidationError(f"models[{pos}].cost: expected a number")
        if cost < 0:
            raise ValidationError(f"models[{pos}].cost: negative cost {cost}")
        meta = entry.get("meta") or {}
        if not isinstance(meta, dict) or not all(isinstance(v, str) for v in meta.values()):
            raise ValidationError(f"models[{pos}].meta: expected a string->string map")
        try:
            models.append(ModelCandidate(entry["id"], float(cost), meta))
        except ValidationError as e:
            raise ValidationError(f"models[{pos}]: {e}") from e
    return RoutingPool(tuple(models))


def compute_labels(samples: Sequence[float]) -> float:
    """Arithmetic mean of the raw quality samples for one (prompt, model)."""
    if len(samples) == 0:
        raise ValidationError("quality samples must be nonempty")
    first = samples[0]
    # fsum(S copies of v) / S can miss v by an ulp
    if all(x == first for x in samples):
        return float(first)
    return math.fsum(samples) / len(samples)


@dataclass(frozen=True)
class PromptRecord:
    prompt_id: str
    features: np.ndarray
    quality_samples: Mapping[str, tuple[float, ...]]
    split: str = "train"
    text: str | None = None
    labels: Mapping[str, float] = field(init=False)

    def __post_init__(self):
        if not isinstance(self.prompt_id, str) or not self.prompt_id:
            raise ValidationError("prompt_id must be a nonempty string")
        if self.split not in SPLITS:
            raise ValidationError(f"split must be one of {SPLITS}, got {self.split!r}")
        feats = np.array(self.features, dtype=np.float64)
        if feats.ndim != 1 or not np.all(np.isfinite(feats)):
            raise ValidationError("features must be a finite 1-D vector")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        samples = {}
        for k, v in self.quality_samples.items():
            vals = tuple(float(x) for x in v)
            if not vals:
                raise ValidationError(f"qualities[{k!r}] must hold at least one sample")
            if not all(math.isfinite(x) for x in vals):
                raise ValidationError(f"qualities[{k!r}] contains a non-finite value")
            samples[k] = vals
        object.__setattr__(self, "quality_samples", MappingProxyType(samples))
        object.__setattr__(
            self, "labels", MappingProxyType({k: compute_labels(v) for k, v in samples.items()})
        )

    def to_dict(self) -> dict:
        out = {"prompt_id": self.prompt_id}
        if self.text is not None:
            out["text"] = self.text
        out["features"] = [float(x) for x in self.features]
        out["qualities"] = {k: list(v) for k, v in self.quality_samples.items()}
        out["split"] = self.split
        return out


@dataclass(frozen=True)
class Dataset:
    pool: RoutingPool
    records: tuple[PromptRecord, ...]
    d: int

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        seen = set()
        for rec in records:
            _check_record(rec, self.pool, self.d)
            if rec.prompt_id in seen:
                raise ValidationError(f"duplicate prompt_id {rec.prompt_id!r}")
            seen.add(rec.prompt_id)

    def __len__(self) -> int:
        return len(self.records)

    def split(self, name: str | None) -> "Dataset":
        """Records of one split (``None`` keeps everything)."""
        if name is None:
            return self
        if name not in SPLITS:
            raise ValidationError(f"unknown split {name!r}")
        return Dataset(self.pool, tuple(r for r in self.records if r.split == name), self.d)

    def features(self) -> np.ndarray:
        if not self.records:
            return np.zeros((0, self.d))
        return np.stack([r.features for r in self.records])

    def label_matrix(self) -> np.ndarray:
        """N x M raw labels, columns in pool order."""
        ids = self.pool.ids
        out = np.empty((len(self.records), len(ids)))
        for i, rec in enumerate(self.records):
            for j, mid in enumerate(ids):
                out[i, j] = rec.labels[mid]
        return out

    @property
    def prompt_ids(self) -> tuple[str, ...]:
        return tuple(r.prompt_id for r in self.records)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)


def _check_record(rec: PromptRecord, pool: RoutingPool, d: int) -> None:
    missing = [m for m in pool.ids if m not in rec.quality_samples]
    if missing:
        raise ValidationError(f"record {rec.prompt_id!r}: no qualities for model {missing[0]!r}")
    if rec.features.shape[0] != d:
        raise ValidationError(
            f"record {rec.prompt_id!r}: feature dimension mismatch (expected {d}, got {rec.features.shape[0]})"
        )


def _record_from_obj(obj) -> PromptRecord:
    if not isinstance(obj, dict):
        raise ValidationError("expected a JSON object")
    for key in ("prompt_id", "features", "qualities", "split"):
        if key not in obj:
            raise ValidationError(f"missing field {key!r}")
    if not isinstance(obj["qualities"], dict):
        raise ValidationError("'qualities' must be an object")
    if not isinstance(obj["features"], list):
        raise ValidationError("'features' must be an array")
    text = obj.get("text")
    if text is not None and not isinstance(text, str):
        raise ValidationError("'text' must be a string")
    return PromptRecord(
        prompt_id=obj["prompt_id"],
        features=obj["features"],
        quality_samples=obj["qualities"],
        split=obj["split"],
        text=text,
    )


def load_dataset(stream: bytes | str | Iterable[str], pool: RoutingPool) -> Dataset:
    """Parse a JSONL dataset against ``pool``.

    Stops at the first bad line; the error message carries its 1-based
    line number. Blank lines are skipped.
    """
    if isinstance(stream, bytes):
        stream = stream.decode("utf-8")
    lines = stream.splitlines() if isinstance(stream, str) else stream
    records: list[PromptRecord] = []
    seen: set[str] = set()
    d = None
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = _record_from_obj(json.loads(line))
            if d is None:
                d = rec.features.shape[0]
            _check_record(rec, pool, d)
            if rec.prompt_id in seen:
                raise ValidationError(f"duplicate prompt_id {rec.prompt_id!r}")
        except (ValidationError, json.JSONDecodeError, TypeError, ValueError) as e:
            raise ValidationError(f"line {lineno}: {e}") from e
        seen.add(rec.prompt_id)
        records.append(rec)
    return Dataset(pool, tuple(records), d if d is not None else 0)


@dataclass(frozen=True)
class LabelScaler:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise DegenerateError(f"degenerate label range: lo={self.lo} hi={self.hi}")

    def apply(self, v):
        """Map raw labels into [0, 1]; out-of-range values are clamped."""
        with np.errstate(over="ignore"):  # tiny ranges overflow to inf, then clamp
            scaled = (np.asarray(v, dtype=np.float64) - self.lo) / (self.hi - self.lo)
        out = np.clip(scaled, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out


def fit_scaler(labels) -> LabelScaler:
    """Fit one joint min/max scaler over every (record, model) label."""
    arr = np.asarray(labels, dtype=np.float64).ravel()
    if arr.size == 0 or arr.min() == arr.max():
        raise DegenerateError("degenerate label range")
    return LabelScaler(float(arr.min()), float(arr.max()))


def apply_scaler(s: LabelScaler, v):
    return s.apply(v)


def featurize_prompt(text: str, d: int) -> np.ndarray:
    """Hashed character-trigram term frequencies, L2-normalized.

    Each trigram of Unicode characters is UTF-8 encoded and hashed with
    64-bit FNV-1a; the bucket is ``hash % d``. Texts shorter than three
    characters yield the zero vector.
    """
    if d < 1:
        raise ValidationError("featurizer dimension must be >= 1")
    vec = np.zeros(d)
    for i in range(len(text) - 2):
        h = _FNV_OFFSET
        for byte in text[i:i + 3].encode("utf-8"):
            h = ((h ^ byte) * _FNV_PRIME) & _MASK64
        vec[h % d] += 1.0
    norm = math.sqrt(math.fsum(vec * vec))
    if norm > 0:
        vec /= norm
    return vec
