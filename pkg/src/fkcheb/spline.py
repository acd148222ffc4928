"""Truncated-power representation of continuous polynomial splines.

A spline of degree ``m`` with ``N`` pieces on ``[a, b]`` is stored through its
parameter vector ``X = (a00, x0, xi1, x1, ..., xi_{N-1}, x_{N-1})`` where
``x_i = (a_i1, ..., a_im)`` and ``a_ij`` multiplies ``(t - xi_i)_+^(m+1-j)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from math import comb
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial

LOGGER = logging.getLogger(__name__)

TAU_ZERO_RTOL = 1e-10

ArrayLike = Union[float, Sequence[float], np.ndarray]


class SplineDomainError(ValueError):
    """Raised for evaluation outside ``[a, b]`` or malformed spline data."""


class KnotKind(Enum):
    """Behaviour of the spline at an internal knot, read from ``a_lm``."""

    NEUTRAL = "neutral"
    MAX_KNOT = "max_knot"
    MIN_KNOT = "min_knot"


@dataclass(frozen=True)
class KnotClass:
    knot_index: int
    kind: KnotKind
    alm: float

    @property
    def is_neutral(self) -> bool:
        return self.kind is KnotKind.NEUTRAL

    def to_dict(self) -> Dict[str, Any]:
        return {"knot_index": self.knot_index, "kind": self.kind.value, "alm": self.alm}


@dataclass(frozen=True)
class SplineModel:
    """Continuous spline in the truncated-power basis.

    ``blocks[i]`` holds ``(a_i1, ..., a_im)``; block 0 is attached to the left
    endpoint ``a`` and block ``i >= 1`` to ``knots[i - 1]``.
    """

    degree: int
    a: float
    b: float
    knots: Tuple[float, ...]
    a00: float
    blocks: Tuple[Tuple[float, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "a00", float(self.a00))
        object.__setattr__(self, "knots", tuple(float(knot) for knot in self.knots))
        object.__setattr__(
            self, "blocks", tuple(tuple(float(coeff) for coeff in block) for block in self.blocks)
        )

        if int(self.degree) != self.degree or self.degree < 1:
            raise SplineDomainError(f"Spline degree must be an integer >= 1, got {self.degree}")
        object.__setattr__(self, "degree", int(self.degree))
        if not self.a < self.b:
            raise SplineDomainError(f"Empty interval [{self.a}, {self.b}]")
        if len(self.blocks) != len(self.knots) + 1:
            raise SplineDomainError(
                f"Expected {len(self.knots) + 1} coefficient blocks, got {len(self.blocks)}"
            )
        for index, block in enumerate(self.blocks):
            if len(block) != self.degree:
                raise SplineDomainError(
                    f"Coefficient block {index} has {len(block)} entries, expected {self.degree}"
                )
        values = (self.a, self.b, self.a00, *self.knots, *(c for block in self.blocks for c in block))
        if not all(np.isfinite(values)):
            raise SplineDomainError("Spline data contains non-finite values")

    # -- shape -----------------------------------------------------------
    @property
    def pieces(self) -> int:
        return len(self.knots) + 1

    @property
    def dimension(self) -> int:
        return (self.degree + 1) * self.pieces

    @property
    def breakpoints(self) -> np.ndarray:
        """``(xi_0, xi_1, ..., xi_N)`` with ``xi_0 = a`` and ``xi_N = b``."""

        return np.array([self.a, *self.knots, self.b], dtype=float)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array(self.blocks, dtype=float).reshape(self.pieces, self.degree)

    @property
    def coefficient_scale(self) -> float:
        return float(max(1.0, abs(self.a00), float(np.abs(self.coefficients).max())))

    @property
    def is_sorted(self) -> bool:
        knots = np.asarray(self.knots)
        if knots.size == 0:
            return True
        return bool(
            np.all(np.diff(knots) >= 0) and knots[0] >= self.a and knots[-1] <= self.b
        )

    @property
    def has_coincident_knots(self) -> bool:
        return bool(np.any(np.diff(np.sort(self.breakpoints)) <= 0))

    def alm(self, l: int) -> float:
        """Coefficient of ``(t - xi_l)_+`` i.e. the derivative jump at knot ``l``."""

        if not 0 <= l < self.pieces:
            raise SplineDomainError(f"Knot index {l} out of range")
        return self.blocks[l][-1]

    # -- parameter vector -------------------------------------------------
    def to_vector(self) -> np.ndarray:
        m = self.degree
        vector = np.zeros(self.dimension)
        vector[0] = self.a00
        for i, block in enumerate(self.blocks):
            base = i * (m + 1)
            if i > 0:
                vector[base] = self.knots[i - 1]
            vector[base + 1 : base + m + 1] = block
        return vector

    @classmethod
    def from_vector(cls, degree: int, a: float, b: float, vector: ArrayLike) -> "SplineModel":
        values = np.asarray(vector, dtype=float).ravel()
        width = degree + 1
        if values.size == 0 or values.size % width:
            raise SplineDomainError(
                f"Parameter vector length {values.size} is not a multiple of {width}"
            )
        pieces = values.size // width
        blocks = [tuple(values[i * width + 1 : (i + 1) * width]) for i in range(pieces)]
        knots = [values[i * width] for i in range(1, pieces)]
        return cls(degree=degree, a=a, b=b, knots=tuple(knots), a00=values[0], blocks=tuple(blocks))

    def with_vector(self, vector: ArrayLike) -> "SplineModel":
        return SplineModel.from_vector(self.degree, self.a, self.b, vector)

    # -- serialisation ----------------------------------------------------
    def to_dict(self) -> Dict[str, Any]:
        return {
            "degree": self.degree,
            "interval": [self.a, self.b],
            "knots": list(self.knots),
            "a00": self.a00,
            "blocks": [list(block) for block in self.blocks],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "SplineModel":
        try:
            a, b = payload["interval"]
            return cls(
                degree=payload["degree"],
                a=a,
                b=b,
                knots=tuple(payload.get("knots", ())),
                a00=payload["a00"],
                blocks=tuple(tuple(block) for block in payload["blocks"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SplineDomainError):
                raise
            raise SplineDomainError(f"Malformed spline model: {exc}") from exc


def default_tau_zero(model: SplineModel) -> float:
    return TAU_ZERO_RTOL * model.coefficient_scale


@lru_cache(maxsize=512)
def piece_polys(model: SplineModel) -> Tuple[Polynomial, ...]:
    """All pieces ``P_1 .. P_N``, each expanded about its left breakpoint."""

    m = model.degree
    breakpoints = model.breakpoints
    polys: List[Polynomial] = []
    for l in range(1, model.pieces + 1):
        origin = float(breakpoints[l - 1])
        local = Polynomial([model.a00])
        for i in range(l):
            shift = Polynomial([origin - float(breakpoints[i]), 1.0])
            for j, coeff in enumerate(model.blocks[i], start=1):
                if coeff:
                    local = local + coeff * shift ** (m + 1 - j)
        polys.append(Polynomial(local.coef, domain=[origin, origin + 1.0], window=[0.0, 1.0]))
    return tuple(polys)


def piece_poly(model: SplineModel, l: int) -> Polynomial:
    """Return ``P_l``; call ``.convert()`` on the result for monomial coefficients in ``t``."""

    if not 1 <= l <= model.pieces:
        raise SplineDomainError(f"Piece index {l} outside 1..{model.pieces}")
    return piece_polys(model)[l - 1]


def piece_index(model: SplineModel, t: float) -> int:
    """1-based index of the piece used for ``t`` (left-closed, the last piece holds ``b``)."""

    position = int(np.searchsorted(np.asarray(model.knots), float(t), side="right"))
    return min(position + 1, model.pieces)


def evaluate(model: SplineModel, t: ArrayLike) -> Union[float, np.ndarray]:
    """Spline value at ``t`` (scalar or array) via per-piece Horner evaluation."""

    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if not np.all(np.isfinite(ts)):
        raise SplineDomainError("Cannot evaluate the spline at non-finite points")
    if ts.size and (ts.min() < model.a or ts.max() > model.b):
        raise SplineDomainError(
            f"Evaluation point outside [{model.a}, {model.b}]: "
            f"{ts.min() if ts.min() < model.a else ts.max()}"
        )
    if not model.is_sorted:
        model = normalize(model)

    positions = np.searchsorted(np.asarray(model.knots), ts, side="right")
    values = np.empty_like(ts)
    for index, poly in enumerate(piece_polys(model)):
        mask = positions == index
        if np.any(mask):
            values[mask] = poly(ts[mask])
    return float(values[0]) if scalar else values


def truncated_power_value(model: SplineModel, t: ArrayLike) -> np.ndarray:
    """Direct truncated-power sum; slower and less accurate than :func:`evaluate`."""

    ts = np.atleast_1d(np.asarray(t, dtype=float))
    m = model.degree
    total = np.full_like(ts, model.a00)
    origins = [model.a, *model.knots]
    for origin, block in zip(origins, model.blocks):
        shifted = np.maximum(ts - origin, 0.0)
        for j, coeff in enumerate(block, start=1):
            total += coeff * shifted ** (m + 1 - j)
    return total


def classify_knots(model: SplineModel, tau_zero: Optional[float] = None) -> List[KnotClass]:
    tau = default_tau_zero(model) if tau_zero is None else float(tau_zero)
    if tau < 0:
        raise SplineDomainError(f"tau_zero must be non-negative, got {tau}")

    classes: List[KnotClass] = []
    for l in range(1, model.pieces):
        alm = model.alm(l)
        if alm > tau:
            kind = KnotKind.MAX_KNOT
        elif alm < -tau:
            kind = KnotKind.MIN_KNOT
        else:
            kind = KnotKind.NEUTRAL
        classes.append(KnotClass(knot_index=l, kind=kind, alm=alm))
    return classes


def effective_multiplicity(model: SplineModel, l: int, tau_zero: Optional[float] = None) -> int:
    """Largest ``j`` with ``a_lj != 0``: the order of the first derivative jumping at knot ``l``
    counted from the top, 0 when the knot carries no jump at all."""

    tau = default_tau_zero(model) if tau_zero is None else float(tau_zero)
    block = model.blocks[l]
    for j in range(model.degree, 0, -1):
        if abs(block[j - 1]) > tau:
            return j
    return 0


def normalize(model: SplineModel) -> SplineModel:
    """Sort the knots and drop those outside ``[a, b]`` without changing values on ``[a, b]``.

    Knots right of ``b`` never act on ``[a, b]``. Knots left of ``a`` act as plain
    polynomials there, so their blocks are re-expanded about ``a`` and folded into
    ``a00`` and block 0.
    """

    if model.is_sorted:
        return model

    m = model.degree
    a00 = model.a00
    base = list(model.blocks[0])
    kept: List[Tuple[float, Tuple[float, ...]]] = []
    for knot, block in zip(model.knots, model.blocks[1:]):
        if knot > model.b:
            LOGGER.debug("Dropping knot %.17g right of the interval", knot)
            continue
        if knot < model.a:
            LOGGER.debug("Folding knot %.17g left of the interval into block 0", knot)
            offset = model.a - knot
            for j, coeff in enumerate(block, start=1):
                power = m + 1 - j
                for r in range(power + 1):
                    term = coeff * comb(power, r) * offset ** (power - r)
                    if r == 0:
                        a00 += term
                    else:
                        base[m - r] += term
            continue
        kept.append((knot, block))

    kept.sort(key=lambda item: item[0])
    return SplineModel(
        degree=m,
        a=model.a,
        b=model.b,
        knots=tuple(knot for knot, _ in kept),
        a00=a00,
        blocks=(tuple(base), *(block for _, block in kept)),
    )
