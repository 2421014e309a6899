"""Per-version attribute vectors in a shared normalized space.

Every attribute group becomes one point per version: numeric dimensions are
min-max normalized across the version set so vectors of different versions
are geometrically comparable; text dimensions are expanded by a
deterministic feature-hashing embedder first. Each version's points plus a
normalized upload-time coordinate form its cluster.

Angular dimensions (latitude/longitude) are treated as plain numerics after
normalization; antimeridian wrap-around is out of scope for desk-scale
corpora.
"""

from __future__ import annotations

import datetime as dt
import enum
import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .model import ImageServiceRecord, record_field

__all__ = [
    "DimKind",
    "DimSpec",
    "GroupSchema",
    "AttributeVector",
    "Cluster",
    "normalize",
    "embed_text",
    "build_clusters",
    "intersection_score",
    "default_schemas",
    "load_schemas",
    "DEFAULT_TEXT_DIMS",
]

DEFAULT_TEXT_DIMS = 64

_TOKEN = re.compile(r"[a-z0-9]+")


class DimKind(enum.Enum):
    NUMERIC = "numeric"
    ANGULAR = "angular-degrees"
    TEXT = "text"


@dataclass(frozen=True)
class DimSpec:
    path: str  # dotted field path into the record model
    kind: DimKind


@dataclass(frozen=True)
class GroupSchema:
    group_id: str
    dims: tuple[DimSpec, ...]

    def width(self, text_dims: int) -> int:
        return sum(text_dims if d.kind is DimKind.TEXT else 1 for d in self.dims)


@dataclass(frozen=True)
class AttributeVector:
    version_id: str
    group_id: str
    values: np.ndarray  # normalized, every entry in [0, 1]


@dataclass(frozen=True)
class Cluster:
    """One version's group points plus its normalized upload-time coordinate."""

    version_id: str
    points: dict[str, AttributeVector]
    t_upload: float


def _schemas_from_obj(obj: dict) -> tuple[list[GroupSchema], int]:
    schemas = []
    for group in obj["groups"]:
        dims = tuple(DimSpec(d["path"], DimKind(d["kind"])) for d in group["dims"])
        if not dims:
            raise ValueError(f"group {group['group_id']!r} has no dimensions")
        schemas.append(GroupSchema(group["group_id"], dims))
    return schemas, int(obj.get("text_dims", DEFAULT_TEXT_DIMS))


def load_schemas(path: str | Path) -> tuple[list[GroupSchema], int]:
    """Load a schema table file; returns (schemas, text_dims)."""
    return _schemas_from_obj(json.loads(Path(path).read_text(encoding="utf-8")))


def default_schemas() -> tuple[list[GroupSchema], int]:
    data = resources.files("metaprov.data").joinpath("group_schemas.json")
    return _schemas_from_obj(json.loads(data.read_text(encoding="utf-8")))


def normalize(values: list[float]) -> list[float]:
    """Min-max normalize one dimension across versions into [0, 1].

    A degenerate range (all values equal) maps everything to 0.5 to keep
    points interior and transform fits well-conditioned.
    """
    if not values:
        raise ValueError("normalize requires at least one value")
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.5] * len(values)
    span = hi - lo
    return [(v - lo) / span for v in values]


def _bucket(token: str, d: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % d


def embed_text(text: str | None, d: int) -> np.ndarray:
    """Deterministic bag-of-tokens feature hash, L2-normalized.

    Lowercase alphanumeric tokenization, token counts as weights. Empty or
    absent text yields the zero vector. All entries land in [0, 1].
    """
    if d < 2:
        raise ValueError("text embedding needs at least 2 dimensions")
    out = np.zeros(d)
    if not text:
        return out
    for token in _TOKEN.findall(text.lower()):
        out[_bucket(token, d)] += 1.0
    norm = np.linalg.norm(out)
    if norm > 0:
        out /= norm
    return out


def _dim_value(record: ImageServiceRecord, path: str) -> float | None:
    value = record_field(record, path)
    if value is None:
        return None
    if isinstance(value, dt.datetime):
        return value.timestamp()
    if isinstance(value, bool):
        return float(value)
    if isinstance(value, (int, float)):
        return float(value)
    raise TypeError(f"field {path} is not numeric (got {type(value).__name__})")


def _text_value(record: ImageServiceRecord, path: str) -> str | None:
    value = record_field(record, path)
    if value is None:
        return None
    if isinstance(value, enum.Enum):
        return str(value.value)
    return str(value)


def build_clusters(
    versions: list[ImageServiceRecord],
    schemas: list[GroupSchema] | None = None,
    text_dims: int | None = None,
) -> list[Cluster]:
    """Place every version in the shared space; one cluster per version.

    Versions must already be in upload order. A group point is built for a
    version whenever at least one of the group's fields is present; the
    normalization min/max for each dimension is taken over exactly those
    versions. A numeric dimension missing from an otherwise-present group
    contributes the neutral 0.5.
    """
    if not versions:
        raise ValueError("build_clusters requires at least one version")
    if schemas is None:
        schemas, default_d = default_schemas()
        text_dims = text_dims if text_dims is not None else default_d
    text_dims = text_dims if text_dims is not None else DEFAULT_TEXT_DIMS

    uploads = [v.upload_time.timestamp() for v in versions]
    t_norm = normalize(uploads)

    points: list[dict[str, AttributeVector]] = [{} for _ in versions]
    for schema in schemas:
        present = [
            any(record_field(v, d.path) is not None for d in schema.dims) for v in versions
        ]
        rows = [i for i, p in enumerate(present) if p]
        if not rows:
            continue
        width = schema.width(text_dims)
        raw = np.full((len(rows), width), np.nan)
        col = 0
        for d in schema.dims:
            if d.kind is DimKind.TEXT:
                for r, i in enumerate(rows):
                    raw[r, col : col + text_dims] = embed_text(_text_value(versions[i], d.path), text_dims)
                col += text_dims
            else:
                for r, i in enumerate(rows):
                    value = _dim_value(versions[i], d.path)
                    if value is not None:
                        raw[r, col] = value
                col += 1

        normalized = np.full_like(raw, 0.5)
        for j in range(width):
            column = raw[:, j]
            known = column[~np.isnan(column)]
            if known.size == 0:
                continue
            lo, hi = known.min(), known.max()
            if hi > lo:
                normalized[:, j] = np.where(np.isnan(column), 0.5, (column - lo) / (hi - lo))
        for r, i in enumerate(rows):
            points[i][schema.group_id] = AttributeVector(
                versions[i].id, schema.group_id, normalized[r].copy()
            )

    return [
        Cluster(version_id=v.id, points=points[i], t_upload=t_norm[i])
        for i, v in enumerate(versions)
    ]


def intersection_score(a: Cluster, b: Cluster, eps: float) -> float:
    """Fraction of shared group points within Euclidean distance eps.

    The upload-time axis is excluded; two clusters sharing no groups overlap
    not at all. Symmetric, and 1.0 for a cluster against itself.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    shared = sorted(set(a.points) & set(b.points))
    if not shared:
        return 0.0
    hits = 0
    for group_id in shared:
        va, vb = a.points[group_id].values, b.points[group_id].values
        if va.shape != vb.shape:
            raise ValueError(f"group {group_id!r} has mismatched dimensions across clusters")
        if float(np.linalg.norm(va - vb)) <= eps:
            hits += 1
    return hits / len(shared)
