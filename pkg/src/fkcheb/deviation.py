"""Sup-norm deviation of a spline from its target, extreme points and alternation."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .config import DEFAULT_GRID
from .spline import KnotKind, SplineModel, classify_knots, evaluate, piece_polys
from .targets import TargetFunction

LOGGER = logging.getLogger(__name__)

TOL_EXTREME_RTOL = 1e-8
DEGENERATE_RTOL = 1e-12
MERGE_ATOL = 1e-9
REFINE_XATOL = 1e-12
GRID_FACTOR = 10


class ProfileError(ValueError):
    """Raised when a deviation profile cannot be computed for the given inputs."""


class Location(str, Enum):
    SMOOTH = "smooth"
    NEUTRAL_KNOT = "neutral_knot"
    MAX_KNOT = "max_knot"
    MIN_KNOT = "min_knot"


class Stability(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    NOT_APPLICABLE = "not_applicable"


_LOCATION_OF_KIND = {
    KnotKind.NEUTRAL: Location.NEUTRAL_KNOT,
    KnotKind.MAX_KNOT: Location.MAX_KNOT,
    KnotKind.MIN_KNOT: Location.MIN_KNOT,
}


def stability_of(location: Location, sign: int) -> Stability:
    """A max-knot with a negative deviation or a min-knot with a positive one is unstable."""

    if location is Location.MAX_KNOT:
        return Stability.STABLE if sign > 0 else Stability.UNSTABLE
    if location is Location.MIN_KNOT:
        return Stability.UNSTABLE if sign > 0 else Stability.STABLE
    return Stability.NOT_APPLICABLE


@dataclass(frozen=True)
class ExtremePoint:
    t: float
    sign: int
    location: Location
    stability: Stability
    knot_index: Optional[int] = None
    deviation: float = 0.0

    @property
    def is_unstable(self) -> bool:
        return self.stability is Stability.UNSTABLE

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "sign": self.sign,
            "location": self.location.value,
            "stability": self.stability.value,
            "knot_index": self.knot_index,
            "deviation": self.deviation,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "ExtremePoint":
        knot_index = payload.get("knot_index")
        return cls(
            t=float(payload["t"]),
            sign=int(payload["sign"]),
            location=Location(payload["location"]),
            stability=Stability(payload["stability"]),
            knot_index=None if knot_index is None else int(knot_index),
            deviation=float(payload["deviation"]),
        )


@dataclass(frozen=True)
class DeviationProfile:
    """Value of Psi with its classified extreme points, sorted by ``t``."""

    psi: float
    extremes: Tuple[ExtremePoint, ...]
    grid_resolution: int
    tol_extreme: float
    breakpoints: Tuple[float, ...]
    degenerate: bool = False

    @property
    def pieces(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def signs(self) -> List[int]:
        return [extreme.sign for extreme in self.extremes]

    def knot_tolerance(self) -> float:
        return 1e-12 * (self.breakpoints[-1] - self.breakpoints[0])

    def extremes_between(self, p: int, q: int) -> List[ExtremePoint]:
        """Extremes lying in ``[xi_p, xi_q]``."""

        if not 0 <= p < q <= self.pieces:
            raise ProfileError(f"Invalid knot interval ({p}, {q}) for {self.pieces} pieces")
        eps = self.knot_tolerance()
        lo, hi = self.breakpoints[p], self.breakpoints[q]
        return [extreme for extreme in self.extremes if lo - eps <= extreme.t <= hi + eps]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "psi": self.psi,
            "degenerate": self.degenerate,
            "grid_resolution": self.grid_resolution,
            "tol_extreme": self.tol_extreme,
            "breakpoints": list(self.breakpoints),
            "extremes": [extreme.to_dict() for extreme in self.extremes],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "DeviationProfile":
        return cls(
            psi=float(payload["psi"]),
            extremes=tuple(ExtremePoint.from_dict(item) for item in payload["extremes"]),
            grid_resolution=int(payload["grid_resolution"]),
            tol_extreme=float(payload["tol_extreme"]),
            breakpoints=tuple(float(value) for value in payload["breakpoints"]),
            degenerate=bool(payload.get("degenerate", False)),
        )


def minimum_grid_for(degree: int, pieces: int) -> int:
    """Smallest accepted extreme-search grid, ``10 (m + 1) N``."""

    return GRID_FACTOR * (degree + 1) * pieces


def minimum_grid(model: SplineModel) -> int:
    return minimum_grid_for(model.degree, model.pieces)


def deviation(model: SplineModel, target: TargetFunction, t: Any) -> Any:
    """Signed deviation ``s(t) - f(t)``."""

    return evaluate(model, t) - target(t)


def _check_inputs(model: SplineModel, target: TargetFunction) -> None:
    if not model.is_sorted:
        raise ProfileError("Spline model must be normalized before profiling")
    width = model.b - model.a
    if abs(target.a - model.a) > 1e-12 * width or abs(target.b - model.b) > 1e-12 * width:
        raise ProfileError(
            f"Target domain [{target.a}, {target.b}] differs from spline domain [{model.a}, {model.b}]"
        )


def _scalar_deviation(model: SplineModel, target: TargetFunction) -> Callable[[float], float]:
    polys = piece_polys(model)
    knots = np.asarray(model.knots)

    def value(x: float) -> float:
        index = int(np.searchsorted(knots, x, side="right"))
        return float(polys[index](x)) - float(target(x))

    return value


def candidate_maxima(
    model: SplineModel, target: TargetFunction, grid_n: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Local maxima of ``|s - f|`` after continuous refinement.

    Returns ``(t, dev, pinned, f_scale)`` where ``pinned`` marks endpoints,
    knots and target breakpoints, which are always candidates.
    """

    _check_inputs(model, target)

    if target.is_discrete:
        points = target.breakpoints
        devs = deviation(model, target, points)
        values = target(points)
        if not (np.all(np.isfinite(devs)) and np.all(np.isfinite(values))):
            raise ProfileError("Deviation is not finite on the sample set")
        return points, devs, np.ones(points.size, dtype=bool), float(np.abs(values).max())

    grid_n = max(DEFAULT_GRID, minimum_grid(model)) if grid_n is None else int(grid_n)
    if grid_n < minimum_grid(model):
        raise ProfileError(f"grid_n={grid_n} is below the minimum {minimum_grid(model)} for this model")

    breaks = target.breakpoints
    pinned_points = np.unique(
        np.concatenate(([model.a, model.b], model.knots, breaks[(breaks >= model.a) & (breaks <= model.b)]))
    )
    points = np.union1d(np.linspace(model.a, model.b, grid_n), pinned_points)
    pinned = np.isin(points, pinned_points)
    values = target(points)
    devs = evaluate(model, points) - values
    if not (np.all(np.isfinite(devs)) and np.all(np.isfinite(values))):
        raise ProfileError("Deviation is not finite on the evaluation grid")

    absdev = np.abs(devs)
    inner = np.arange(1, points.size - 1)
    left, mid, right = absdev[inner - 1], absdev[inner], absdev[inner + 1]
    peaks = inner[(mid >= left) & (mid >= right) & ((mid > left) | (mid > right)) & ~pinned[inner]]
    plateau = inner[(mid == left) & (mid == right) & ~pinned[inner]]

    scalar = _scalar_deviation(model, target)
    cand_t: List[float] = list(points[pinned])
    cand_dev: List[float] = list(devs[pinned])
    cand_pin: List[bool] = [True] * len(cand_t)
    for i in peaks:
        lo, hi = float(points[i - 1]), float(points[i + 1])
        result = minimize_scalar(
            lambda x: -abs(scalar(x)), bounds=(lo, hi), method="bounded", options={"xatol": REFINE_XATOL}
        )
        best_t, best_dev = float(points[i]), float(devs[i])
        if result.success and -result.fun > abs(best_dev):
            best_t, best_dev = float(result.x), scalar(float(result.x))
        cand_t.append(best_t)
        cand_dev.append(best_dev)
        cand_pin.append(False)
    for i in plateau:
        cand_t.append(float(points[i]))
        cand_dev.append(float(devs[i]))
        cand_pin.append(False)

    order = np.argsort(cand_t, kind="stable")
    return (
        np.asarray(cand_t)[order],
        np.asarray(cand_dev)[order],
        np.asarray(cand_pin, dtype=bool)[order],
        float(np.abs(values).max()),
    )


def _merge(
    ts: np.ndarray, devs: np.ndarray, pinned: np.ndarray, atol: float, peak_atol: float = 0.0
) -> List[Tuple[float, float, bool]]:
    """Collapse candidates closer than ``atol``; refined peaks of one sign merge within ``peak_atol``."""

    merged: List[Tuple[float, float, bool]] = []
    for t, dev, pin in zip(ts, devs, pinned):
        item = (float(t), float(dev), bool(pin))
        if merged:
            kept = merged[-1]
            gap = t - kept[0]
            same_peak = not pin and not kept[2] and (dev >= 0) == (kept[1] >= 0) and gap <= peak_atol
            if gap <= atol or same_peak:
                if (pin and not kept[2]) or (pin == kept[2] and abs(dev) > abs(kept[1])):
                    LOGGER.debug("Merging extreme candidates at %.17g and %.17g", kept[0], t)
                    merged[-1] = item
                continue
        merged.append(item)
    return merged


def deviation_profile(
    model: SplineModel,
    target: TargetFunction,
    grid_n: Optional[int] = None,
    tol_extreme: Optional[float] = None,
    *,
    tau_zero: Optional[float] = None,
) -> DeviationProfile:
    """Compute Psi and the classified extreme points of ``s - f``.

    Continuous targets are scanned on a uniform grid joined with the endpoints,
    knots and target breakpoints; each interior grid peak is refined with a
    bounded scalar search. Sampled targets with discrete support use the samples.
    """

    ts, devs, pinned, f_scale = candidate_maxima(model, target, grid_n)
    width = model.b - model.a
    resolution = int(target.breakpoints.size if target.is_discrete else (grid_n or max(DEFAULT_GRID, minimum_grid(model))))
    spacing = 0.0 if target.is_discrete else width / max(resolution - 1, 1)
    candidates = _merge(ts, devs, pinned, MERGE_ATOL * max(1.0, width), spacing)
    psi = max(abs(dev) for _, dev, _ in candidates)
    breakpoints = tuple(float(x) for x in model.breakpoints)
    tol = TOL_EXTREME_RTOL * max(1.0, psi) if tol_extreme is None else float(tol_extreme)
    if not tol > 0:
        raise ProfileError(f"tol_extreme must be positive, got {tol}")

    if psi <= DEGENERATE_RTOL * max(1.0, f_scale):
        LOGGER.debug("Deviation vanishes (psi=%.3g); profile is degenerate", psi)
        extremes = tuple(
            ExtremePoint(t=t, sign=1 if dev >= 0 else -1, location=Location.SMOOTH,
                         stability=Stability.NOT_APPLICABLE, deviation=dev)
            for t, dev, _ in (candidates[0], candidates[-1])
        )
        return DeviationProfile(psi, extremes, resolution, tol, breakpoints, degenerate=True)

    classes = classify_knots(model, tau_zero)
    knot_eps = 1e-12 * width
    extremes: List[ExtremePoint] = []
    for t, dev, _ in candidates:
        if abs(dev) < psi - tol:
            continue
        sign = 1 if dev >= 0 else -1
        location, knot_index = Location.SMOOTH, None
        if model.a + knot_eps < t < model.b - knot_eps:
            for knot_class, knot in zip(classes, model.knots):
                if abs(t - knot) <= knot_eps:
                    location, knot_index = _LOCATION_OF_KIND[knot_class.kind], knot_class.knot_index
                    break
        extremes.append(
            ExtremePoint(
                t=t,
                sign=sign,
                location=location,
                stability=stability_of(location, sign),
                knot_index=knot_index,
                deviation=dev,
            )
        )

    LOGGER.debug("Profile psi=%.17g with %d extreme points", psi, len(extremes))
    return DeviationProfile(psi, tuple(extremes), resolution, tol, breakpoints)


def alternation_sequence(
    profile: DeviationProfile, p: int, q: int, endpoint_rule: bool = False
) -> Tuple[int, List[ExtremePoint]]:
    """Longest run of extremes in ``[xi_p, xi_q]`` with strictly alternating signs.

    With ``endpoint_rule`` an unstable extreme sitting exactly on ``xi_p`` or
    ``xi_q`` is not admitted. Within each run of equal signs the extreme with the
    largest deviation represents the run, which yields a maximum-length sequence.
    """

    if p >= q:
        raise ProfileError(f"Interval needs p < q, got ({p}, {q})")
    eligible = profile.extremes_between(p, q)
    if endpoint_rule:
        eps = profile.knot_tolerance()
        lo, hi = profile.breakpoints[p], profile.breakpoints[q]
        eligible = [
            extreme
            for extreme in eligible
            if not (extreme.is_unstable and (abs(extreme.t - lo) <= eps or abs(extreme.t - hi) <= eps))
        ]

    sequence: List[ExtremePoint] = []
    for extreme in eligible:
        if sequence and sequence[-1].sign == extreme.sign:
            if abs(extreme.deviation) > abs(sequence[-1].deviation):
                sequence[-1] = extreme
            continue
        sequence.append(extreme)
    return len(sequence), sequence
