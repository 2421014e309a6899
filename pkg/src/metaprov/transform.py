"""Transformation matrices between attribute vectors and their complexity.

Derivability between two versions is judged by how close the matrix mapping
one attribute vector onto the other stays to the identity. For vectors
there are infinitely many exact linear maps; we use the rank-1 identity
update

    delta = I + (b - a) a^T / (a^T a)

which satisfies delta @ a = b and, among all exact solutions, minimizes the
Frobenius distance to the identity. That distance IS the complexity score,
so the score is a well-defined function of the pair. The quadratic
alternative relates the quadratic forms q(x) = x^T x of the two vectors via
a scaled identity; its reference matrix (the one returning the input's own
quadratic form) is again the identity.

A source vector with near-zero norm admits no such fit; those are marked
infeasible with an infinite complexity sentinel so tree search can route
around them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .embedding import Cluster
from .errors import NoSharedGroupsError

__all__ = [
    "DEGENERACY_ETA",
    "TransformKind",
    "TransformFit",
    "FitCounter",
    "fit_linear",
    "fit_quadratic",
    "choose_transform",
    "frobenius_distance",
    "identity_fit",
    "PairTransforms",
    "pair_transforms",
    "pair_transforms_lenient",
    "nearest_neighbors",
]

DEGENERACY_ETA = 1e-9


class TransformKind(enum.Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    MISSING = "missing"  # group present in only one cluster of a pair


@dataclass(frozen=True)
class TransformFit:
    kind: TransformKind
    delta: np.ndarray | None  # d x d; None when infeasible or missing
    residual: float  # constraint violation norm
    complexity: float  # Frobenius distance of delta to the identity

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.complexity)


@dataclass
class FitCounter:
    """Counts choose_transform invocations; the hardware-independent
    run-time proxy used by the evaluation harness."""

    count: int = 0


def _as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=float).ravel()
    if v.size < 1:
        raise ValueError("vectors must have at least one dimension")
    return v


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def _infeasible(kind: TransformKind) -> TransformFit:
    return TransformFit(kind=kind, delta=None, residual=math.inf, complexity=math.inf)


def identity_fit(dim: int) -> TransformFit:
    """The no-change reference: delta = I with zero complexity."""
    return TransformFit(TransformKind.LINEAR, np.eye(dim), 0.0, 0.0)


def fit_linear(ia, ib) -> TransformFit:
    """Exact linear map a -> b closest to the identity (rank-1 update)."""
    a, b = _as_vector(ia), _as_vector(ib)
    _check_same_dim(a, b)
    nsq = float(a @ a)
    if math.sqrt(nsq) < DEGENERACY_ETA:
        return _infeasible(TransformKind.LINEAR)
    delta = np.eye(a.size) + np.outer(b - a, a) / nsq
    residual = float(np.linalg.norm(delta @ a - b))
    complexity = float(np.linalg.norm(delta - np.eye(a.size)))
    return TransformFit(TransformKind.LINEAR, delta, residual, complexity)


def fit_quadratic(ia, ib) -> TransformFit:
    """Scaled identity relating the quadratic forms of the two vectors.

    delta = c I with c = (b^T b) / (a^T a) satisfies a^T delta a = b^T b;
    its distance to the identity reference is |c - 1| sqrt(d).
    """
    a, b = _as_vector(ia), _as_vector(ib)
    _check_same_dim(a, b)
    nsq = float(a @ a)
    if math.sqrt(nsq) < DEGENERACY_ETA:
        return _infeasible(TransformKind.QUADRATIC)
    c = float(b @ b) / nsq
    delta = c * np.eye(a.size)
    residual = float(abs(a @ delta @ a - b @ b))
    complexity = abs(c - 1.0) * math.sqrt(a.size)
    return TransformFit(TransformKind.QUADRATIC, delta, residual, complexity)


def choose_transform(ia, ib, counter: FitCounter | None = None) -> TransformFit:
    """Fit both forms, keep the simpler matrix; ties go to linear.

    The linear form is the default and the quadratic its fallback, so an
    exact complexity tie (including the identity case) resolves to linear.
    """
    if counter is not None:
        counter.count += 1
    linear = fit_linear(ia, ib)
    quadratic = fit_quadratic(ia, ib)
    if not linear.feasible and not quadratic.feasible:
        return linear
    return quadratic if quadratic.complexity < linear.complexity else linear


def frobenius_distance(a, b) -> float:
    """sqrt(trace((A-B)(A-B)^T)); a metric on equal-shape matrices."""
    am, bm = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if am.shape != bm.shape:
        raise ValueError(f"shape mismatch: {am.shape} vs {bm.shape}")
    diff = am - bm
    return float(np.sqrt(np.sum(diff * diff)))


@dataclass(frozen=True)
class PairTransforms:
    """All per-group fits for one ordered version pair.

    ``total_complexity`` sums the finite per-group complexities; a group
    present in only one cluster, or one whose source vector is degenerate,
    is charged the fixed missing-group penalty instead so the total stays
    finite and comparable across pairs.
    """

    from_version: str
    to_version: str
    fits: dict[str, TransformFit]
    missing_groups: tuple[str, ...]
    total_complexity: float


def _pair(a: Cluster, b: Cluster, missing_penalty: float, counter: FitCounter | None) -> PairTransforms:
    shared = sorted(set(a.points) & set(b.points))
    missing = tuple(sorted(set(a.points) ^ set(b.points)))
    fits: dict[str, TransformFit] = {}
    total = missing_penalty * len(missing)
    for group_id in shared:
        fit = choose_transform(a.points[group_id].values, b.points[group_id].values, counter)
        fits[group_id] = fit
        total += fit.complexity if fit.feasible else missing_penalty
    return PairTransforms(
        from_version=a.version_id,
        to_version=b.version_id,
        fits=fits,
        missing_groups=missing,
        total_complexity=total,
    )


def pair_transforms(
    a: Cluster,
    b: Cluster,
    missing_penalty: float = 1.0,
    counter: FitCounter | None = None,
) -> PairTransforms:
    """Fit every shared group of the ordered pair a -> b."""
    if not set(a.points) & set(b.points):
        raise NoSharedGroupsError(
            f"clusters {a.version_id!r} and {b.version_id!r} share no attribute group"
        )
    return _pair(a, b, missing_penalty, counter)


def pair_transforms_lenient(
    a: Cluster,
    b: Cluster,
    missing_penalty: float = 1.0,
    counter: FitCounter | None = None,
) -> PairTransforms:
    """Like pair_transforms, but a pair sharing no groups yields an
    all-missing result (every group charged the penalty) instead of raising.
    Tree builders use this so sparse records still get edges."""
    return _pair(a, b, missing_penalty, counter)


def nearest_neighbors(target: TransformFit, pool: list[TransformFit], k: int) -> list[TransformFit]:
    """The k pool fits whose deltas are Frobenius-closest to the target's.

    Stable: ties keep input order. Infeasible fits (no delta) sort last.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not pool:
        return []
    if target.delta is None:
        raise ValueError("target fit has no delta matrix")

    def distance(fit: TransformFit) -> float:
        if fit.delta is None:
            return math.inf
        return frobenius_distance(target.delta, fit.delta)

    ranked = sorted(pool, key=distance)
    return ranked[:k]
