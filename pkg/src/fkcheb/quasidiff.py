"""Gradients of the spline pieces in parameter space and quasidifferentials of Psi.

Sets are kept as finite generator data: a convex hull of points plus a
Minkowski sum of segments. The objective's superdifferential is the sum of the
segments attached to unstable extreme knots; its subdifferential is the hull of
``S - sup`` and of the partial sums ``-sum(others)`` for each unstable segment.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .deviation import DeviationProfile, ExtremePoint, Location, ProfileError
from .spline import KnotClass, KnotKind, SplineDomainError, SplineModel, piece_index

LOGGER = logging.getLogger(__name__)

VERTEX_LIMIT = 1 << 16


def grad_piece(model: SplineModel, l: int, t: float) -> np.ndarray:
    """Gradient of ``P_l(X, t)`` with respect to the parameter vector ``X``.

    The ``a00`` entry is 1, block ``i < l`` holds the powers ``(t - xi_i)^(m+1-j)``
    and the knot entry of block ``i >= 1`` holds the derivative in ``xi_i``.
    """

    if not 1 <= l <= model.pieces:
        raise SplineDomainError(f"Piece index {l} outside 1..{model.pieces}")
    t = float(t)
    if not model.a <= t <= model.b:
        raise SplineDomainError(f"Gradient requested outside [{model.a}, {model.b}]: {t}")

    m = model.degree
    exponents = np.arange(m, 0, -1)
    origins = model.breakpoints
    gradient = np.zeros(model.dimension)
    gradient[0] = 1.0
    for i in range(l):
        base = i * (m + 1)
        offset = t - origins[i]
        gradient[base + 1 : base + m + 1] = offset ** exponents
        if i >= 1:
            coeffs = np.asarray(model.blocks[i])
            gradient[base] = -float(np.sum(exponents * coeffs * offset ** (exponents - 1)))
    return gradient


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    """``co(points) + sum(co(segment))``; no points stands for ``{0}``."""

    points: np.ndarray
    segments: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        segments = np.asarray(self.segments, dtype=float)
        if points.ndim != 2:
            raise ValueError("Generator points must be a 2-D array")
        if segments.size == 0:
            segments = np.zeros((0, 2, points.shape[1]))
        if segments.ndim != 3 or segments.shape[1] != 2 or segments.shape[2] != points.shape[1]:
            raise ValueError("Generator segments must have shape (s, 2, n)")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "segments", segments)

    @classmethod
    def zero(cls, dimension: int) -> "GeneratorSet":
        return cls(np.zeros((0, dimension)), np.zeros((0, 2, dimension)))

    @classmethod
    def of_points(cls, *points: np.ndarray) -> "GeneratorSet":
        stacked = np.vstack(points)
        return cls(stacked, np.zeros((0, 2, stacked.shape[1])))

    @property
    def dimension(self) -> int:
        return int(self.points.shape[1])

    def _segment_dots(self, g: np.ndarray) -> np.ndarray:
        return self.segments @ g if self.segments.size else np.zeros((0, 2))

    def max_dot(self, g: np.ndarray) -> float:
        """Support function ``max <v, g>`` over the set."""

        base = float(np.max(self.points @ g)) if self.points.shape[0] else 0.0
        return base + float(np.sum(np.max(self._segment_dots(g), axis=1)))

    def min_dot(self, g: np.ndarray) -> float:
        base = float(np.min(self.points @ g)) if self.points.shape[0] else 0.0
        return base + float(np.sum(np.min(self._segment_dots(g), axis=1)))

    def vertices(self, limit: int = VERTEX_LIMIT) -> np.ndarray:
        """All sums ``point + chosen segment endpoints``; a superset of the extreme points."""

        points = self.points if self.points.shape[0] else np.zeros((1, self.dimension))
        count = points.shape[0] * (1 << self.segments.shape[0])
        if count > limit:
            raise ValueError(f"Vertex enumeration would produce {count} vectors (limit {limit})")
        sums = [np.zeros(self.dimension)]
        for segment in self.segments:
            sums = [partial + endpoint for partial in sums for endpoint in segment]
        return np.array([point + partial for point in points for partial in sums])


@dataclass(frozen=True, eq=False)
class BetaRecord:
    """Signed piece gradients contributed by one extreme point."""

    extreme: ExtremePoint
    pieces: Tuple[int, ...]
    vectors: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {"t": self.extreme.t, "sign": self.extreme.sign, "pieces": list(self.pieces)}


@dataclass(frozen=True, eq=False)
class Quasidifferential:
    """Generator data of a (possibly confined) quasidifferential of Psi.

    ``stable`` holds the set S as rows; ``unstable`` holds one segment per
    unstable extreme knot, shape ``(u, 2, n)``.
    """

    stable: np.ndarray
    unstable: np.ndarray
    beta_index: Tuple[BetaRecord, ...]
    interval: Tuple[int, int]
    perfect_fit: bool = False

    @property
    def dimension(self) -> int:
        return int(self.stable.shape[1])

    @property
    def is_empty(self) -> bool:
        return self.stable.shape[0] == 0 and self.unstable.shape[0] == 0

    @property
    def sup(self) -> GeneratorSet:
        return GeneratorSet(np.zeros((1, self.dimension)), self.unstable)

    @property
    def sub_parts(self) -> List[GeneratorSet]:
        parts: List[GeneratorSet] = []
        if self.stable.shape[0]:
            parts.append(GeneratorSet(self.stable, -self.unstable))
        for index in range(self.unstable.shape[0]):
            others = np.delete(self.unstable, index, axis=0)
            parts.append(GeneratorSet(np.zeros((1, self.dimension)), -others))
        return parts

    def sub_max(self, g: np.ndarray) -> float:
        parts = self.sub_parts
        return max(part.max_dot(g) for part in parts) if parts else 0.0

    def sub_vertices(self, limit: int = VERTEX_LIMIT) -> np.ndarray:
        parts = self.sub_parts
        if not parts:
            return np.zeros((0, self.dimension))
        return np.vstack([part.vertices(limit) for part in parts])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "interval": list(self.interval),
            "perfect_fit": self.perfect_fit,
            "stable_count": int(self.stable.shape[0]),
            "unstable_count": int(self.unstable.shape[0]),
            "betas": [record.to_dict() for record in self.beta_index],
        }


def point_quasidiff(
    model: SplineModel, t: float, knot_class: Optional[KnotClass] = None
) -> Tuple[GeneratorSet, GeneratorSet]:
    """Quasidifferential of ``X -> s[X](t)``; ``knot_class`` is ``None`` away from knots."""

    zero = GeneratorSet.zero(model.dimension)
    if knot_class is None:
        return GeneratorSet.of_points(grad_piece(model, piece_index(model, t), t)), zero

    l = knot_class.knot_index
    left = grad_piece(model, l, t)
    if knot_class.kind is KnotKind.NEUTRAL:
        return GeneratorSet.of_points(left), zero
    both = GeneratorSet.of_points(left, grad_piece(model, l + 1, t))
    if knot_class.kind is KnotKind.MAX_KNOT:
        return both, zero
    return zero, both


def _pieces_for(extreme: ExtremePoint, p: int, q: int, at_lo: bool, at_hi: bool, model: SplineModel) -> Tuple[Tuple[int, ...], bool]:
    """Pieces whose signed gradients the extreme contributes, and whether they form a U segment."""

    if extreme.knot_index is None:
        if at_lo:
            return (p + 1,), False
        if at_hi:
            return (q,), False
        return (piece_index(model, extreme.t),), False

    l = extreme.knot_index
    if at_lo or at_hi:
        if extreme.is_unstable:
            return (), False
        return ((l + 1,) if at_lo else (l,)), False
    if extreme.location is Location.NEUTRAL_KNOT:
        return (l,), False
    if extreme.is_unstable:
        return (l, l + 1), True
    return (l, l + 1), False


def confined_quasidiff(model: SplineModel, profile: DeviationProfile, p: int, q: int) -> Quasidifferential:
    """Quasidifferential built from the extremes in ``[xi_p, xi_q]`` only.

    An extreme on ``xi_p`` (``xi_q``) uses the piece inside the interval and is
    left out when it is an unstable knot.
    """

    if not 0 <= p < q <= model.pieces:
        raise ProfileError(f"Invalid knot interval ({p}, {q}) for {model.pieces} pieces")
    if profile.pieces != model.pieces:
        raise ProfileError("Profile was computed for a different model")

    n = model.dimension
    if profile.degenerate:
        return Quasidifferential(np.zeros((1, n)), np.zeros((0, 2, n)), (), (p, q), perfect_fit=True)

    eps = profile.knot_tolerance()
    lo, hi = profile.breakpoints[p], profile.breakpoints[q]
    stable: List[np.ndarray] = []
    unstable: List[np.ndarray] = []
    records: List[BetaRecord] = []
    for extreme in profile.extremes_between(p, q):
        pieces, is_segment = _pieces_for(
            extreme, p, q, abs(extreme.t - lo) <= eps, abs(extreme.t - hi) <= eps, model
        )
        if not pieces:
            continue
        vectors = np.array([extreme.sign * grad_piece(model, piece, extreme.t) for piece in pieces])
        records.append(BetaRecord(extreme, pieces, vectors))
        if is_segment:
            unstable.append(vectors)
        else:
            stable.extend(vectors)

    LOGGER.debug(
        "Confined quasidifferential on (%d, %d): |S|=%d, |U|=%d", p, q, len(stable), len(unstable)
    )
    return Quasidifferential(
        stable=np.array(stable).reshape(len(stable), n),
        unstable=np.array(unstable).reshape(len(unstable), 2, n),
        beta_index=tuple(records),
        interval=(p, q),
    )


def objective_quasidiff(model: SplineModel, profile: DeviationProfile) -> Quasidifferential:
    return confined_quasidiff(model, profile, 0, model.pieces)


def directional_derivative(qd: Quasidifferential, g: Sequence[float]) -> float:
    """``max <sub, g> + min <sup, g>``."""

    direction = np.asarray(g, dtype=float)
    if direction.shape != (qd.dimension,):
        raise ValueError(f"Direction has shape {direction.shape}, expected ({qd.dimension},)")
    return qd.sub_max(direction) + qd.sup.min_dot(direction)
