"""Reference Chebyshev solvers: best polynomial, best fixed-knot spline, two-step heuristic."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial
from numpy.polynomial import chebyshev as C
from scipy.optimize import linprog, minimize_scalar

from .config import DEFAULT_BREAKPOINT_GRID, DEFAULT_GRID
from .deviation import (
    GRID_FACTOR,
    DeviationProfile,
    ExtremePoint,
    alternation_sequence,
    candidate_maxima,
    deviation_profile,
    minimum_grid,
)
from .spline import SplineDomainError, SplineModel
from .targets import TargetError, TargetFunction

LOGGER = logging.getLogger(__name__)

REMEZ_MAX_ITER = 50
REMEZ_RTOL = 1e-12
REFINE_MAX_ROUNDS = 25
REFINE_RTOL = 1e-9
SEGMENT_GRID = 801
_HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


class SolverFailure(RuntimeError):
    """Raised when the LP backend does not return an optimal solution."""


@dataclass(frozen=True)
class SegmentFit:
    """Step-1 polynomial on one segment; ``coefficients`` are in powers of ``t - lo``."""

    lo: float
    hi: float
    coefficients: Tuple[float, ...]
    error: float
    converged: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "interval": [self.lo, self.hi],
            "coefficients": list(self.coefficients),
            "error": self.error,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "SegmentFit":
        lo, hi = payload["interval"]
        return cls(
            lo=float(lo),
            hi=float(hi),
            coefficients=tuple(float(value) for value in payload["coefficients"]),
            error=float(payload["error"]),
            converged=bool(payload.get("converged", True)),
        )


@dataclass(frozen=True, eq=False)
class FitResult:
    model: SplineModel
    achieved_psi: float
    equioscillation: Tuple[ExtremePoint, ...]
    iterations: int
    converged: bool
    degree: int
    profile: DeviationProfile
    segments: Tuple[SegmentFit, ...] = ()
    warnings: Tuple[str, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model.to_dict(),
            "achieved_psi": self.achieved_psi,
            "equioscillation": [extreme.to_dict() for extreme in self.equioscillation],
            "iterations": self.iterations,
            "converged": self.converged,
            "degree": self.degree,
            "profile": self.profile.to_dict(),
            "segments": [segment.to_dict() for segment in self.segments],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "FitResult":
        return cls(
            model=SplineModel.from_dict(payload["model"]),
            achieved_psi=float(payload["achieved_psi"]),
            equioscillation=tuple(ExtremePoint.from_dict(item) for item in payload["equioscillation"]),
            iterations=int(payload["iterations"]),
            converged=bool(payload["converged"]),
            degree=int(payload["degree"]),
            profile=DeviationProfile.from_dict(payload["profile"]),
            segments=tuple(SegmentFit.from_dict(item) for item in payload.get("segments", ())),
            warnings=tuple(payload.get("warnings", ())),
        )


# -- LP helpers ---------------------------------------------------------------

def _lp_minimax(design: np.ndarray, values: np.ndarray) -> Tuple[np.ndarray, float]:
    """Minimise ``max |design @ c - values|`` over free ``c``."""

    rows, cols = design.shape
    c = np.r_[np.zeros(cols), 1.0]
    A_ub = np.block([[design, -np.ones((rows, 1))], [-design, -np.ones((rows, 1))]])
    b_ub = np.r_[values, -values]
    result = linprog(
        c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * cols + [(0, None)],
        method="highs-ds", options=_HIGHS_OPTIONS,
    )
    if result.status != 0:
        raise SolverFailure(f"Minimax LP failed with status {result.status}: {result.message}")
    return result.x[:cols], float(result.x[-1])


def _grid_points(target: TargetFunction, lo: float, hi: float, count: int) -> np.ndarray:
    breaks = target.breakpoints
    return np.union1d(np.linspace(lo, hi, count), breaks[(breaks >= lo) & (breaks <= hi)])


# -- polynomials ---------------------------------------------------------------

def polynomial_model(poly: Chebyshev, a: float, b: float, degree: int) -> SplineModel:
    """Spline model with no internal knots equal to ``poly`` on ``[a, b]``.

    Degree 0 fits are stored with degree 1 and a zero slope.
    """

    local = poly.convert(kind=Polynomial, domain=[a, a + 1.0], window=[0.0, 1.0])
    stored = max(degree, 1)
    coef = np.zeros(stored + 1)
    coef[: min(local.coef.size, stored + 1)] = local.coef[: stored + 1]
    block = tuple(coef[stored + 1 - j] for j in range(1, stored + 1))
    return SplineModel(degree=stored, a=a, b=b, knots=(), a00=coef[0], blocks=(block,))


def _chebyshev_lp(target: TargetFunction, a: float, b: float, m: int, points: np.ndarray) -> Chebyshev:
    mapped = (2.0 * points - (a + b)) / (b - a)
    coef, _ = _lp_minimax(C.chebvander(mapped, m), target(points))
    return Chebyshev(coef, domain=[a, b])


def _sign_runs(values: np.ndarray) -> List[np.ndarray]:
    signs = np.sign(values)
    nonzero = np.flatnonzero(signs)
    if nonzero.size == 0:
        return []
    # zeros take the sign of the closest nonzero value to their left (or right at the start)
    filled = signs.copy()
    filled[: nonzero[0]] = signs[nonzero[0]]
    for index in range(nonzero[0] + 1, signs.size):
        if filled[index] == 0:
            filled[index] = filled[index - 1]
    cuts = np.flatnonzero(np.diff(filled)) + 1
    return np.split(np.arange(values.size), cuts)


def _exchange(
    grid: np.ndarray, errors: np.ndarray, error_fn: Callable[[float], float], count: int
) -> Optional[np.ndarray]:
    """New reference: one refined extremum per sign run, ``count`` consecutive ones kept."""

    runs = _sign_runs(errors)
    if len(runs) < count:
        return None
    points: List[Tuple[float, float]] = []
    for run in runs:
        i = int(run[np.argmax(np.abs(errors[run]))])
        best_t, best_e = float(grid[i]), float(errors[i])
        if 0 < i < grid.size - 1:
            result = minimize_scalar(
                lambda x: -abs(error_fn(x)), bounds=(grid[i - 1], grid[i + 1]),
                method="bounded", options={"xatol": 1e-12},
            )
            if result.success and -result.fun > abs(best_e):
                best_t, best_e = float(result.x), error_fn(float(result.x))
        points.append((best_t, best_e))

    magnitudes = np.abs([value for _, value in points])
    peak = int(np.argmax(magnitudes))
    starts = range(max(0, peak - count + 1), min(peak, len(points) - count) + 1)
    start = max(starts, key=lambda s: (magnitudes[s : s + count].min(), -s))
    return np.array([t for t, _ in points[start : start + count]])


def _remez(
    target: TargetFunction, a: float, b: float, m: int, grid: np.ndarray, max_iter: int
) -> Tuple[Optional[Chebyshev], int, bool]:
    count = m + 2
    reference = np.clip(0.5 * (a + b) - 0.5 * (b - a) * np.cos(np.pi * np.arange(count) / (m + 1)), a, b)
    alternating = (-1.0) ** np.arange(count)
    poly: Optional[Chebyshev] = None
    for iteration in range(1, max_iter + 1):
        mapped = (2.0 * reference - (a + b)) / (b - a)
        system = np.c_[C.chebvander(mapped, m), alternating]
        try:
            solution = np.linalg.solve(system, target(reference))
        except np.linalg.LinAlgError:
            return None, iteration, False
        poly = Chebyshev(solution[:-1], domain=[a, b])
        level = abs(float(solution[-1]))

        def error_fn(x: float, poly: Chebyshev = poly) -> float:
            return float(poly(x)) - float(target(x))

        errors = poly(grid) - target(grid)
        new_reference = _exchange(grid, errors, error_fn, count)
        if new_reference is None:
            return None, iteration, False
        e_max = max(float(np.abs(errors).max()), max(abs(error_fn(t)) for t in new_reference))
        LOGGER.debug("Remez iteration %d: level %.17g, max error %.17g", iteration, level, e_max)
        if e_max - level <= REMEZ_RTOL * max(1.0, e_max):
            return poly, iteration, True
        reference = new_reference
    return poly, max_iter, False


def best_polynomial(
    f: TargetFunction,
    interval: Optional[Tuple[float, float]] = None,
    m: int = 1,
    grid_n: Optional[int] = None,
    *,
    max_iter: int = REMEZ_MAX_ITER,
) -> FitResult:
    """Minimax polynomial of degree ``m`` by Remez exchange, with a grid-LP fallback."""

    a, b = interval if interval is not None else (f.a, f.b)
    target = f.restrict(a, b)
    if m < 0:
        raise ValueError(f"Polynomial degree must be non-negative, got {m}")
    grid_n = max(DEFAULT_GRID, 10 * (m + 1)) if grid_n is None else int(grid_n)
    if grid_n < 10 * (m + 1):
        raise ValueError(f"grid_n={grid_n} is below the minimum {10 * (m + 1)}")

    warnings: List[str] = []
    if target.is_discrete:
        poly = _chebyshev_lp(target, a, b, m, target.breakpoints)
        iterations, converged = 1, True
    else:
        grid = _grid_points(target, a, b, grid_n)
        poly, iterations, converged = _remez(target, a, b, m, grid, max_iter)
        if poly is None:
            message = f"Remez exchange found no alternating reference on [{a}, {b}]; using the grid LP"
            LOGGER.warning(message)
            warnings.append(message)
            poly = _chebyshev_lp(target, a, b, m, grid)
            converged = True
        elif not converged:
            LOGGER.warning("Remez exchange did not converge in %d iterations", iterations)

    model = polynomial_model(poly, a, b, m)
    profile_grid = max(grid_n, minimum_grid(model))
    profile = deviation_profile(model, target, profile_grid)
    _, sequence = alternation_sequence(profile, 0, model.pieces)
    return FitResult(
        model=model,
        achieved_psi=profile.psi,
        equioscillation=tuple(sequence),
        iterations=iterations,
        converged=converged,
        degree=m,
        profile=profile,
        warnings=tuple(warnings),
    )


# -- fixed-knot splines --------------------------------------------------------

def design_matrix(a: float, knots: Sequence[float], m: int, t: np.ndarray) -> np.ndarray:
    """Columns ``1, (t - xi_i)_+^(m+1-j)`` for the free coefficients of a fixed-knot spline."""

    ts = np.asarray(t, dtype=float)
    columns = [np.ones_like(ts)]
    for origin in (a, *knots):
        shifted = np.maximum(ts - origin, 0.0)
        columns.extend(shifted ** (m + 1 - j) for j in range(1, m + 1))
    return np.column_stack(columns)


def _fixed_knot_model(a: float, b: float, knots: Sequence[float], m: int, coef: np.ndarray) -> SplineModel:
    blocks = tuple(tuple(coef[1 + i * m : 1 + (i + 1) * m]) for i in range(len(knots) + 1))
    return SplineModel(degree=m, a=a, b=b, knots=tuple(knots), a00=coef[0], blocks=blocks)


def best_fixed_knot_spline(
    f: TargetFunction,
    knots: Sequence[float],
    m: int,
    grid_n: Optional[int] = None,
    *,
    tau_zero: Optional[float] = None,
    max_rounds: int = REFINE_MAX_ROUNDS,
) -> FitResult:
    """Best continuous spline with frozen knots, by LP over an adaptively refined point set.

    Local maxima of the continuous deviation that exceed the discrete optimum are
    added to the constraint set until the two agree.
    """

    a, b = f.a, f.b
    knots = tuple(float(knot) for knot in knots)
    if any(not a < knot < b for knot in knots) or any(np.diff(knots) <= 0):
        raise SplineDomainError(f"Knots must be strictly increasing inside ({a}, {b}): {knots}")
    pieces = len(knots) + 1
    grid_n = max(DEFAULT_GRID, GRID_FACTOR * (m + 1) * pieces) if grid_n is None else int(grid_n)

    if f.is_discrete:
        points = f.breakpoints
    else:
        points = np.union1d(_grid_points(f, a, b, grid_n), knots)

    converged = f.is_discrete
    rounds = 0
    while True:
        rounds += 1
        coef, level = _lp_minimax(design_matrix(a, knots, m, points), f(points))
        model = _fixed_knot_model(a, b, knots, m, coef)
        if f.is_discrete:
            break
        ts, devs, _, _ = candidate_maxima(model, f, grid_n)
        psi = float(np.abs(devs).max())
        gap = psi - level
        LOGGER.debug("Fixed-knot LP round %d: discrete %.17g, continuous %.17g", rounds, level, psi)
        if gap <= REFINE_RTOL * max(1.0, psi):
            converged = True
            break
        extra = ts[np.abs(devs) > level]
        fresh = np.setdiff1d(extra, points)
        if fresh.size == 0 or rounds >= max_rounds:
            LOGGER.warning("Fixed-knot refinement stopped after %d rounds with gap %.3g", rounds, gap)
            break
        points = np.union1d(points, fresh)

    profile = deviation_profile(model, f, None if f.is_discrete else grid_n, tau_zero=tau_zero)
    _, sequence = alternation_sequence(profile, 0, model.pieces)
    return FitResult(
        model=model,
        achieved_psi=profile.psi,
        equioscillation=tuple(sequence),
        iterations=rounds,
        converged=converged,
        degree=m,
        profile=profile,
    )


# -- two-step heuristic ---------------------------------------------------------

def meinardus_fit(
    f: TargetFunction,
    m: int,
    pieces: int,
    grid_n: Optional[int] = None,
    *,
    breakpoint_grid: int = DEFAULT_BREAKPOINT_GRID,
    tau_zero: Optional[float] = None,
) -> FitResult:
    """Two-step free-knot heuristic.

    Step 1 picks breakpoints minimising the largest per-segment minimax error of
    a discontinuous piecewise polynomial. Step 2 freezes them as knots of a
    continuous spline fitted by :func:`best_fixed_knot_spline`.
    """

    if pieces < 2:
        raise ValueError(f"The heuristic needs at least two pieces, got {pieces}")
    if f.is_discrete:
        raise TargetError("The two-step heuristic needs a target with continuous support")
    a, b = f.a, f.b
    breaks = f.breakpoints
    candidates = np.union1d(np.linspace(a, b, breakpoint_grid), breaks[(breaks >= a) & (breaks <= b)])
    last = candidates.size - 1

    @lru_cache(maxsize=None)
    def segment_error(i: int, j: int) -> float:
        lo, hi = float(candidates[i]), float(candidates[j])
        points = _grid_points(f, lo, hi, SEGMENT_GRID)
        mapped = (2.0 * points - (lo + hi)) / (hi - lo)
        _, level = _lp_minimax(C.chebvander(mapped, m), f(points))
        return level

    if pieces == 2:
        cut = min(range(1, last), key=lambda k: (max(segment_error(0, k), segment_error(k, last)), k))
        cuts = [cut]
    else:
        cuts = _balanced_cuts(segment_error, last, pieces)
    knots = [float(candidates[k]) for k in cuts]
    LOGGER.info("Step 1 breakpoints: %s", ", ".join(f"{knot:.17g}" for knot in knots))

    warnings: List[str] = []
    if breakpoint_grid - 1 < 10 * pieces:
        warnings.append(f"Breakpoint grid of {breakpoint_grid} points is coarse for {pieces} pieces")
    bounds = [a, *knots, b]
    segments: List[SegmentFit] = []
    for lo, hi in zip(bounds, bounds[1:]):
        fit = best_polynomial(f, (lo, hi), m, grid_n)
        segments.append(
            SegmentFit(
                lo=lo,
                hi=hi,
                coefficients=_local_coefficients(fit.model, m),
                error=fit.achieved_psi,
                converged=fit.converged,
            )
        )
    errors = [segment.error for segment in segments]
    if max(errors) > 0 and (max(errors) - min(errors)) > 1e-2 * max(errors):
        warnings.append(
            "Step-1 segment errors are unbalanced: " + ", ".join(f"{error:.6g}" for error in errors)
        )
    for message in warnings:
        LOGGER.warning(message)

    step2 = best_fixed_knot_spline(f, knots, m, grid_n, tau_zero=tau_zero)
    return FitResult(
        model=step2.model,
        achieved_psi=step2.achieved_psi,
        equioscillation=step2.equioscillation,
        iterations=step2.iterations,
        converged=step2.converged,
        degree=m,
        profile=step2.profile,
        segments=tuple(segments),
        warnings=tuple(warnings),
    )


def _local_coefficients(model: SplineModel, m: int) -> Tuple[float, ...]:
    """Ascending coefficients in ``t - a`` of a knot-free model, truncated to degree ``m``."""

    stored = model.degree
    coef = [model.a00] + [model.blocks[0][stored - r] for r in range(1, stored + 1)]
    return tuple(coef[: m + 1])


def _balanced_cuts(segment_error: Callable[[int, int], float], last: int, pieces: int) -> List[int]:
    """Dynamic program minimising the largest segment error over ``pieces`` segments.

    ``cost[n][j]`` covers candidates ``0..j`` with ``n`` segments. It grows with
    ``j`` while ``segment_error(i, j)`` shrinks with ``i``, so the best split
    point is found by bisection on the crossing.
    """

    cost = np.full((pieces + 1, last + 1), np.inf)
    split = np.zeros((pieces + 1, last + 1), dtype=int)
    for j in range(1, last + 1):
        cost[1, j] = segment_error(0, j)
    for n in range(2, pieces + 1):
        for j in range(n, last + 1):
            lo, hi = n - 1, j - 1
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if cost[n - 1, mid] < segment_error(mid, j):
                    lo = mid
                else:
                    hi = mid
            best = min(
                (max(cost[n - 1, i], segment_error(i, j)), i) for i in {lo, hi}
            )
            cost[n, j], split[n, j] = best
    cuts: List[int] = []
    j = last
    for n in range(pieces, 1, -1):
        j = int(split[n, j])
        cuts.append(j)
    return sorted(cuts)
