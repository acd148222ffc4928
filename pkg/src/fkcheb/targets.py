"""Target functions approximated by the splines: sampled data or named expression pieces."""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P

LOGGER = logging.getLogger(__name__)

CONTINUITY_RTOL = 1e-9

Real = Union[int, float, str]


class TargetError(ValueError):
    """Raised when a target description is inconsistent or uses an unknown expression."""


class TargetKind(str, Enum):
    SAMPLED = "sampled_piecewise_linear"
    EXPRESSION = "named_expression_pieces"


class Support(str, Enum):
    """Where the deviation supremum is taken."""

    CONTINUOUS = "continuous"
    SAMPLES = "samples"


_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def parse_real(value: Real, field_name: str = "value") -> float:
    """Parse a JSON real: a number or a short product/quotient of numbers and ``pi``.

    Accepted strings look like ``"pi"``, ``"3*pi/2"``, ``"-pi/2"`` or ``"1/3"``.
    """

    if isinstance(value, bool):
        raise TargetError(f"Field '{field_name}' must be a real number, got {value!r}")
    if isinstance(value, (int, float)):
        result = float(value)
    elif isinstance(value, str):
        result = _parse_real_text(value, field_name)
    else:
        raise TargetError(f"Field '{field_name}' must be a real number, got {value!r}")
    if not math.isfinite(result):
        raise TargetError(f"Field '{field_name}' must be finite, got {value!r}")
    return result


def _parse_real_text(text: str, field_name: str) -> float:
    cleaned = text.replace(" ", "").lower()
    sign = 1.0
    if cleaned.startswith(("-", "+")):
        sign = -1.0 if cleaned[0] == "-" else 1.0
        cleaned = cleaned[1:]
    parts = cleaned.split("/")
    if not cleaned or len(parts) > 2:
        raise TargetError(f"Field '{field_name}' is not a recognised real: {text!r}")

    def product(chunk: str) -> float:
        total = 1.0
        for factor in chunk.split("*"):
            if factor == "pi":
                total *= math.pi
            elif _NUMBER.match(factor):
                total *= float(factor)
            else:
                raise TargetError(f"Field '{field_name}' is not a recognised real: {text!r}")
        return total

    numerator = product(parts[0])
    if len(parts) == 2:
        denominator = product(parts[1])
        if denominator == 0:
            raise TargetError(f"Field '{field_name}' divides by zero: {text!r}")
        numerator /= denominator
    return sign * numerator


# -- built-in expressions ----------------------------------------------------

def _constant(t: np.ndarray, params: Mapping[str, Any]) -> np.ndarray:
    return np.full_like(t, params["value"])


def _monomial(t: np.ndarray, params: Mapping[str, Any]) -> np.ndarray:
    return params["coefficient"] * (t - params["shift"]) ** int(params["power"])


def _polynomial(t: np.ndarray, params: Mapping[str, Any]) -> np.ndarray:
    return P.polyval(t - params["shift"], params["coefficients"])


def _sin(t: np.ndarray, params: Mapping[str, Any]) -> np.ndarray:
    return params["amplitude"] * np.sin(params["frequency"] * t + params["phase"]) + params["offset"]


def _abs(t: np.ndarray, params: Mapping[str, Any]) -> np.ndarray:
    return params["coefficient"] * np.abs(t - params["shift"]) ** params["power"] + params["offset"]


@dataclass(frozen=True)
class ExpressionDef:
    evaluate: Callable[[np.ndarray, Mapping[str, Any]], np.ndarray]
    defaults: Mapping[str, Any]
    required: Tuple[str, ...] = ()


EXPRESSIONS: Dict[str, ExpressionDef] = {
    "constant": ExpressionDef(_constant, {}, ("value",)),
    "monomial": ExpressionDef(_monomial, {"coefficient": 1.0, "shift": 0.0}, ("power",)),
    "polynomial": ExpressionDef(_polynomial, {"shift": 0.0}, ("coefficients",)),
    "sin": ExpressionDef(_sin, {"amplitude": 1.0, "frequency": 1.0, "phase": 0.0, "offset": 0.0}),
    "abs": ExpressionDef(_abs, {"coefficient": 1.0, "shift": 0.0, "power": 1.0, "offset": 0.0}),
}


def _resolve_params(expression: str, raw: Mapping[str, Any]) -> Tuple[Tuple[str, Any], ...]:
    definition = EXPRESSIONS.get(expression)
    if definition is None:
        known = ", ".join(sorted(EXPRESSIONS))
        raise TargetError(f"Unknown expression '{expression}' (known: {known})")

    allowed = set(definition.defaults) | set(definition.required)
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise TargetError(f"Expression '{expression}' does not accept parameters: {', '.join(unknown)}")
    missing = [name for name in definition.required if name not in raw]
    if missing:
        raise TargetError(f"Expression '{expression}' requires parameters: {', '.join(missing)}")

    resolved: Dict[str, Any] = dict(definition.defaults)
    for name, value in raw.items():
        if name == "coefficients":
            if not isinstance(value, (list, tuple)) or not value:
                raise TargetError("Parameter 'coefficients' must be a non-empty list")
            resolved[name] = tuple(parse_real(item, f"{expression}.coefficients") for item in value)
        else:
            resolved[name] = parse_real(value, f"{expression}.{name}")
    if expression == "monomial":
        power = resolved["power"]
        if power != int(power) or power < 0:
            raise TargetError(f"Monomial power must be a non-negative integer, got {power}")
    if expression == "abs" and resolved["power"] <= 0:
        raise TargetError(f"Absolute-value power must be positive, got {resolved['power']}")
    return tuple(sorted(resolved.items()))


@dataclass(frozen=True)
class ExpressionPiece:
    lo: float
    hi: float
    expression: str
    params: Tuple[Tuple[str, Any], ...] = ()

    @classmethod
    def build(cls, lo: Real, hi: Real, expression: str, params: Optional[Mapping[str, Any]] = None) -> "ExpressionPiece":
        lo_value = parse_real(lo, "interval[0]")
        hi_value = parse_real(hi, "interval[1]")
        if not lo_value < hi_value:
            raise TargetError(f"Piece interval [{lo_value}, {hi_value}] is empty")
        return cls(lo_value, hi_value, expression, _resolve_params(expression, params or {}))

    def __call__(self, t: np.ndarray) -> np.ndarray:
        return np.asarray(EXPRESSIONS[self.expression].evaluate(t, dict(self.params)), dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        params = {name: (list(value) if isinstance(value, tuple) else value) for name, value in self.params}
        return {"interval": [self.lo, self.hi], "expression": self.expression, "params": params}


@dataclass(frozen=True)
class TargetFunction:
    """Continuous function on ``[a, b]``."""

    kind: TargetKind
    a: float
    b: float
    samples: Tuple[Tuple[float, float], ...] = ()
    pieces: Tuple[ExpressionPiece, ...] = ()
    support: Support = Support.CONTINUOUS
    _abscissae: np.ndarray = field(init=False, repr=False, compare=False)
    _ordinates: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind is TargetKind.SAMPLED:
            xs = np.array([point[0] for point in self.samples], dtype=float)
            ys = np.array([point[1] for point in self.samples], dtype=float)
        else:
            xs = np.array([self.a, *(piece.hi for piece in self.pieces)], dtype=float)
            ys = np.empty(0)
        object.__setattr__(self, "_abscissae", xs)
        object.__setattr__(self, "_ordinates", ys)

    # -- constructors ----------------------------------------------------
    @classmethod
    def sampled(cls, points: Iterable[Sequence[Real]], support: Union[Support, str] = Support.CONTINUOUS) -> "TargetFunction":
        pairs = []
        for index, point in enumerate(points):
            if len(point) != 2:
                raise TargetError(f"Sample {index} must be a (t, f) pair")
            pairs.append((parse_real(point[0], f"points[{index}][0]"), parse_real(point[1], f"points[{index}][1]")))
        if len(pairs) < 2:
            raise TargetError("A sampled target needs at least two points")
        xs = np.array([t for t, _ in pairs])
        if np.any(np.diff(xs) <= 0):
            raise TargetError("Sample abscissae must be strictly increasing")
        return cls(
            kind=TargetKind.SAMPLED,
            a=pairs[0][0],
            b=pairs[-1][0],
            samples=tuple(pairs),
            support=Support(support),
        )

    @classmethod
    def from_pieces(cls, pieces: Sequence[ExpressionPiece]) -> "TargetFunction":
        if not pieces:
            raise TargetError("An expression target needs at least one piece")
        width = pieces[-1].hi - pieces[0].lo
        for left, right in zip(pieces, pieces[1:]):
            if abs(left.hi - right.lo) > 1e-12 * max(1.0, abs(width)):
                raise TargetError(f"Pieces are not contiguous at {left.hi} / {right.lo}")
            joint = np.array([right.lo])
            lhs, rhs = float(left(joint)[0]), float(right(joint)[0])
            scale = max(1.0, abs(lhs), abs(rhs))
            if abs(lhs - rhs) > CONTINUITY_RTOL * scale:
                raise TargetError(
                    f"Target is discontinuous at t={right.lo}: {lhs!r} from the left, {rhs!r} from the right"
                )
        return cls(kind=TargetKind.EXPRESSION, a=pieces[0].lo, b=pieces[-1].hi, pieces=tuple(pieces))

    # -- evaluation -------------------------------------------------------
    @property
    def breakpoints(self) -> np.ndarray:
        """Points where the target may lose smoothness (sample abscissae or piece joints)."""

        return self._abscissae.copy()

    @property
    def is_discrete(self) -> bool:
        return self.support is Support.SAMPLES

    def __call__(self, t: Union[float, Sequence[float], np.ndarray]) -> Union[float, np.ndarray]:
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        if ts.size and (ts.min() < self.a or ts.max() > self.b):
            raise TargetError(f"Target evaluated outside [{self.a}, {self.b}]")

        if self.kind is TargetKind.SAMPLED:
            values = np.interp(ts, self._abscissae, self._ordinates)
        else:
            values = np.empty_like(ts)
            bounds = np.array([piece.hi for piece in self.pieces[:-1]])
            index = np.searchsorted(bounds, ts, side="right")
            for position, piece in enumerate(self.pieces):
                mask = index == position
                if np.any(mask):
                    values[mask] = piece(ts[mask])
        return float(values[0]) if scalar else values

    def restrict(self, lo: float, hi: float) -> "TargetFunction":
        """The same function on ``[lo, hi]``, a sub-interval of the domain."""

        if lo == self.a and hi == self.b:
            return self
        if not self.a <= lo < hi <= self.b:
            raise TargetError(f"[{lo}, {hi}] is not a sub-interval of [{self.a}, {self.b}]")
        if self.is_discrete:
            raise TargetError("Targets with discrete support cannot be restricted")

        if self.kind is TargetKind.SAMPLED:
            inner = [point for point in self.samples if lo < point[0] < hi]
            points = [(lo, float(self(lo))), *inner, (hi, float(self(hi)))]
            return TargetFunction(kind=self.kind, a=lo, b=hi, samples=tuple(points))
        clipped = tuple(
            ExpressionPiece(max(lo, piece.lo), min(hi, piece.hi), piece.expression, piece.params)
            for piece in self.pieces
            if min(hi, piece.hi) > max(lo, piece.lo)
        )
        return TargetFunction(kind=self.kind, a=lo, b=hi, pieces=clipped)

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"kind": self.kind.value, "support": self.support.value}
        if self.kind is TargetKind.SAMPLED:
            payload["points"] = [list(point) for point in self.samples]
        else:
            payload["pieces"] = [piece.to_dict() for piece in self.pieces]
        return payload


def target_from_dict(payload: Mapping[str, Any]) -> TargetFunction:
    """Build a target from its JSON description; raises :class:`TargetError` naming the field."""

    kind = payload.get("kind")
    support = payload.get("support", Support.CONTINUOUS.value)
    try:
        support = Support(support)
    except ValueError as exc:
        raise TargetError(f"Unknown target support '{support}'") from exc

    if kind == TargetKind.SAMPLED.value:
        points = payload.get("points")
        if not isinstance(points, list):
            raise TargetError("Field 'target.points' must be a list of [t, f] pairs")
        return TargetFunction.sampled(points, support)
    if kind == TargetKind.EXPRESSION.value:
        if support is Support.SAMPLES:
            raise TargetError("Expression targets only support continuous evaluation")
        raw_pieces = payload.get("pieces")
        if not isinstance(raw_pieces, list):
            raise TargetError("Field 'target.pieces' must be a list")
        pieces: List[ExpressionPiece] = []
        for index, raw in enumerate(raw_pieces):
            try:
                lo, hi = raw["interval"]
                pieces.append(ExpressionPiece.build(lo, hi, raw["expression"], raw.get("params")))
            except (KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, TargetError):
                    raise TargetError(f"target.pieces[{index}]: {exc}") from exc
                raise TargetError(f"target.pieces[{index}] is malformed: {exc}") from exc
        return TargetFunction.from_pieces(pieces)
    raise TargetError(f"Unknown target kind {kind!r}")
