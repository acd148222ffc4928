"""Inf-stationarity tests: hull inclusion on intervals and alternation counts."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog, nnls

from .config import DEFAULT_MAX_UNSTABLE
from .deviation import DeviationProfile, ExtremePoint, alternation_sequence
from .quasidiff import confined_quasidiff
from .spline import SplineModel, classify_knots, effective_multiplicity
from .transform import TransformMatrices, build_transform, transformed_generators

LOGGER = logging.getLogger(__name__)

HULL_RTOL = 1e-8
_HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9}


def _pair(value: Sequence[Any]) -> Tuple[int, int]:
    p, q = value
    return int(p), int(q)


class SelectionLimitExceeded(RuntimeError):
    """Raised when an interval carries too many unstable knots to enumerate selections."""


@dataclass(frozen=True, eq=False)
class HullCertificate:
    """Convex weights showing that zero lies in the hull of ``members``."""

    members: np.ndarray
    lambdas: np.ndarray
    residual: float

    def combination(self) -> np.ndarray:
        return self.lambdas @ self.members

    def to_dict(self) -> Dict[str, Any]:
        return {
            "members": [[float(value) for value in row] for row in self.members],
            "lambdas": [float(value) for value in self.lambdas],
            "residual": self.residual,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "HullCertificate":
        return cls(
            members=np.asarray(payload["members"], dtype=float),
            lambdas=np.asarray(payload["lambdas"], dtype=float),
            residual=float(payload["residual"]),
        )


def default_hull_tol(points: np.ndarray) -> float:
    return HULL_RTOL * max(1.0, float(np.abs(points).max()) if points.size else 1.0)


def _certificate(points: np.ndarray, weights: np.ndarray) -> HullCertificate:
    lambdas = np.clip(weights, 0.0, None)
    total = lambdas.sum()
    lambdas = lambdas / total if total > 0 else np.full(points.shape[0], 1.0 / points.shape[0])
    residual = float(np.abs(lambdas @ points).max())
    return HullCertificate(members=points, lambdas=lambdas, residual=residual)


def _nnls_weights(points: np.ndarray) -> np.ndarray:
    # Appending a row of ones makes the least-squares solution a convex combination.
    A = np.r_[points.T, np.ones((1, points.shape[0]))]
    target = np.r_[np.zeros(points.shape[1]), np.ones(1)]
    weights, _ = nnls(A, target)
    return weights


def zero_in_hull(
    points: Union[Sequence[Sequence[float]], np.ndarray], tol: Optional[float] = None
) -> Tuple[bool, Union[HullCertificate, np.ndarray]]:
    """Decide ``0 in co(points)``.

    Returns ``(True, certificate)`` with ``max|sum(lambda_i v_i)| <= tol`` or
    ``(False, u)`` with ``<u, v_i> > tol`` for every point and ``max|u| <= 1``.
    """

    P = np.asarray(points, dtype=float)
    if P.ndim != 2:
        raise ValueError("Points must form a 2-D array with a common dimension")
    if P.shape[0] == 0:
        raise ValueError("Cannot test hull membership of an empty point set")
    k, d = P.shape
    tol = default_hull_tol(P) if tol is None else float(tol)

    # min r  s.t.  -r <= P^T lambda <= r,  sum(lambda) = 1,  lambda >= 0
    c = np.r_[np.zeros(k), 1.0]
    A_ub = np.block([[P.T, -np.ones((d, 1))], [-P.T, -np.ones((d, 1))]])
    A_eq = np.r_[np.ones(k), 0.0].reshape(1, -1)
    result = linprog(
        c, A_ub=A_ub, b_ub=np.zeros(2 * d), A_eq=A_eq, b_eq=[1.0],
        bounds=[(0, None)] * (k + 1), method="highs-ds", options=_HIGHS_OPTIONS,
    )
    if result.status == 0:
        certificate = _certificate(P, result.x[:k])
    else:
        LOGGER.warning("Hull LP ended with status %s (%s); using NNLS", result.status, result.message)
        certificate = _certificate(P, _nnls_weights(P))
    if certificate.residual <= tol:
        return True, certificate

    # max delta  s.t.  P u >= delta,  -1 <= u <= 1,  delta <= 1
    c = np.r_[np.zeros(d), -1.0]
    A_ub = np.c_[-P, np.ones(k)]
    separation = linprog(
        c, A_ub=A_ub, b_ub=np.zeros(k), bounds=[(-1, 1)] * d + [(None, 1)],
        method="highs-ds", options=_HIGHS_OPTIONS,
    )
    if separation.status == 0:
        direction = separation.x[:d]
        if float(np.min(P @ direction)) > tol:
            return False, direction
    else:
        direction = np.zeros(d)

    polished = _certificate(P, _nnls_weights(P))
    if polished.residual <= tol:
        LOGGER.debug("Hull membership settled by NNLS polish (residual %.3g)", polished.residual)
        return True, polished
    return False, direction


@dataclass(frozen=True, eq=False)
class StationarityEvidence:
    interval: Tuple[int, int]
    transformed: bool = False
    certificates: Tuple[HullCertificate, ...] = ()
    failing_selection: Optional[Tuple[int, ...]] = None
    direction: Optional[np.ndarray] = None
    reason: str = ""

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "interval": list(self.interval),
            "transformed": self.transformed,
            "reason": self.reason,
            "certificates": [certificate.to_dict() for certificate in self.certificates],
        }
        if self.failing_selection is not None:
            payload["failing_selection"] = list(self.failing_selection)
        if self.direction is not None:
            payload["direction"] = [float(value) for value in self.direction]
        return payload

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "StationarityEvidence":
        selection = payload.get("failing_selection")
        direction = payload.get("direction")
        return cls(
            interval=_pair(payload["interval"]),
            transformed=bool(payload.get("transformed", False)),
            certificates=tuple(HullCertificate.from_dict(item) for item in payload.get("certificates", ())),
            failing_selection=None if selection is None else tuple(int(index) for index in selection),
            direction=None if direction is None else np.asarray(direction, dtype=float),
            reason=payload.get("reason", ""),
        )


def interval_stationary(
    model: SplineModel,
    profile: DeviationProfile,
    mats: Optional[TransformMatrices],
    p: int,
    q: int,
    tol: Optional[float] = None,
    *,
    raw: bool = False,
    max_unstable: int = DEFAULT_MAX_UNSTABLE,
) -> Tuple[bool, StationarityEvidence]:
    """Test ``0 in co(S, C)`` for every selection ``C`` of one endpoint per unstable segment.

    The transformed block generators are used when ``mats`` is given and the
    interval is block-aligned; otherwise the raw parameter-space generators.
    """

    if profile.degenerate:
        return True, StationarityEvidence((p, q), reason="perfect_fit")
    qd = confined_quasidiff(model, profile, p, q)
    if qd.is_empty:
        return False, StationarityEvidence((p, q), reason="no_extremes")
    if qd.unstable.shape[0] > max_unstable:
        raise SelectionLimitExceeded(
            f"Interval ({p}, {q}) has {qd.unstable.shape[0]} unstable knots (limit {max_unstable})"
        )

    transformed = not raw and mats is not None and mats.structure.is_aligned(p, q)
    if transformed:
        A, B = transformed_generators(model, profile, mats, p, q)
    else:
        A, B = qd.stable, qd.unstable

    certificates: List[HullCertificate] = []
    for selection in itertools.product((0, 1), repeat=B.shape[0]):
        chosen = [B[index, end] for index, end in enumerate(selection)]
        members = np.vstack([A, *chosen]) if chosen else A
        inside, payload = zero_in_hull(members, tol)
        if not inside:
            return False, StationarityEvidence(
                (p, q), transformed, failing_selection=tuple(selection), direction=payload, reason="separated"
            )
        certificates.append(payload)
    return True, StationarityEvidence((p, q), transformed, certificates=tuple(certificates), reason="hull")


def raw_inclusion_stationary(
    model: SplineModel, profile: DeviationProfile, p: int, q: int, tol: Optional[float] = None
) -> bool:
    """Check ``-sup ⊂ sub`` over the generator vertices of the confined quasidifferential."""

    if profile.degenerate:
        return True
    qd = confined_quasidiff(model, profile, p, q)
    if qd.is_empty:
        return False
    sub = qd.sub_vertices()
    for vertex in qd.sup.vertices():
        inside, _ = zero_in_hull(sub + vertex, tol)
        if not inside:
            return False
    return True


@dataclass(frozen=True, eq=False)
class StationaryInterval:
    p: int
    q: int
    evidence: StationarityEvidence


def find_stationary_interval(
    model: SplineModel,
    profile: DeviationProfile,
    mats: Optional[TransformMatrices] = None,
    tol: Optional[float] = None,
    *,
    tau_zero: Optional[float] = None,
    max_unstable: int = DEFAULT_MAX_UNSTABLE,
) -> Optional[StationaryInterval]:
    """First stationary block-aligned interval, shortest first."""

    if profile.degenerate:
        return StationaryInterval(0, model.pieces, StationarityEvidence((0, model.pieces), reason="perfect_fit"))
    if mats is None:
        mats = build_transform(model, tau_zero=tau_zero)
    for p, q in mats.structure.aligned_intervals():
        stationary, evidence = interval_stationary(
            model, profile, mats, p, q, tol, max_unstable=max_unstable
        )
        if stationary:
            LOGGER.debug("Interval (%d, %d) is stationary", p, q)
            return StationaryInterval(p, q, evidence)
    return None


@dataclass(frozen=True)
class AlternationCheck:
    interval: Tuple[int, int]
    required: int
    found: int
    passes: bool
    sequence: Tuple[ExtremePoint, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "interval": list(self.interval),
            "required": self.required,
            "found": self.found,
            "passes": self.passes,
            "sequence": [extreme.to_dict() for extreme in self.sequence],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "AlternationCheck":
        return cls(
            interval=_pair(payload["interval"]),
            required=int(payload["required"]),
            found=int(payload["found"]),
            passes=bool(payload["passes"]),
            sequence=tuple(ExtremePoint.from_dict(item) for item in payload.get("sequence", ())),
        )


def characterization_check(
    model: SplineModel, profile: DeviationProfile, p: int, q: int, *, tau_zero: Optional[float] = None
) -> AlternationCheck:
    """Count alternating extremes on ``[xi_p, xi_q]`` against ``m (q - p) + 2 + l``.

    ``l`` is the number of non-neutral knots strictly inside the interval;
    unstable extremes on the interval ends are not admitted.
    """

    inner = [
        knot_class
        for knot_class in classify_knots(model, tau_zero)
        if p < knot_class.knot_index < q and not knot_class.is_neutral
    ]
    required = model.degree * (q - p) + 2 + len(inner)
    found, sequence = alternation_sequence(profile, p, q, endpoint_rule=True)
    return AlternationCheck((p, q), required, found, profile.degenerate or found >= required, tuple(sequence))


def theorem1_check(
    model: SplineModel, profile: DeviationProfile, *, tau_zero: Optional[float] = None
) -> AlternationCheck:
    """Classical fixed-knot alternation test over every knot interval.

    Requires ``q - p + m + 1 + sum(m_i)`` alternating extremes, ``m_i`` being the
    effective multiplicity of the internal knots of the interval. Returns the
    first passing interval, or the closest miss.
    """

    pieces = model.pieces
    if profile.degenerate:
        found, sequence = alternation_sequence(profile, 0, pieces)
        return AlternationCheck((0, pieces), 0, found, True, tuple(sequence))

    multiplicity = {l: effective_multiplicity(model, l, tau_zero) for l in range(1, pieces)}
    checks: List[AlternationCheck] = []
    for p, q in sorted(
        ((p, q) for p in range(pieces) for q in range(p + 1, pieces + 1)),
        key=lambda pair: (pair[1] - pair[0], pair[0]),
    ):
        required = q - p + model.degree + 1 + sum(multiplicity[i] for i in range(p + 1, q))
        found, sequence = alternation_sequence(profile, p, q)
        check = AlternationCheck((p, q), required, found, found >= required, tuple(sequence))
        if check.passes:
            return check
        checks.append(check)
    return max(checks, key=lambda item: (item.found - item.required, item.interval[1] - item.interval[0], -item.interval[0]))


@dataclass(frozen=True, eq=False)
class IntervalVerdict:
    interval: Tuple[int, int]
    alternation: AlternationCheck
    hull_verdict: Optional[bool] = None
    evidence: Optional[StationarityEvidence] = None

    def to_dict(self) -> Dict[str, Any]:
        payload = {
            "interval": list(self.interval),
            "hull_verdict": self.hull_verdict,
            "alternation_verdict": self.alternation.passes,
            "required": self.alternation.required,
            "found": self.alternation.found,
            "sequence": self.alternation.to_dict()["sequence"],
        }
        if self.evidence is not None:
            payload["evidence"] = self.evidence.to_dict()
        return payload

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "IntervalVerdict":
        interval = _pair(payload["interval"])
        alternation = AlternationCheck(
            interval,
            int(payload["required"]),
            int(payload["found"]),
            bool(payload["alternation_verdict"]),
            tuple(ExtremePoint.from_dict(item) for item in payload.get("sequence", ())),
        )
        evidence = payload.get("evidence")
        return cls(
            interval=interval,
            alternation=alternation,
            hull_verdict=payload.get("hull_verdict"),
            evidence=None if evidence is None else StationarityEvidence.from_dict(evidence),
        )


@dataclass(frozen=True, eq=False)
class StationarityReport:
    per_interval: Dict[Tuple[int, int], IntervalVerdict]
    inf_stationary: bool
    stationary_interval: Optional[Tuple[int, int]]
    alternation_stationary: bool
    degenerate: bool = False
    theorem1: Optional[AlternationCheck] = None
    delimiters: Tuple[int, ...] = ()

    @property
    def routes_agree(self) -> bool:
        return self.inf_stationary == self.alternation_stationary

    @property
    def required_counts(self) -> Dict[Tuple[int, int], int]:
        return {key: verdict.alternation.required for key, verdict in self.per_interval.items()}

    @property
    def found_counts(self) -> Dict[Tuple[int, int], int]:
        return {key: verdict.alternation.found for key, verdict in self.per_interval.items()}

    def to_dict(self) -> Dict[str, Any]:
        ordered = sorted(self.per_interval, key=lambda pair: (pair[1] - pair[0], pair[0]))
        return {
            "inf_stationary": self.inf_stationary,
            "alternation_stationary": self.alternation_stationary,
            "routes_agree": self.routes_agree,
            "degenerate": self.degenerate,
            "stationary_interval": list(self.stationary_interval) if self.stationary_interval else None,
            "delimiters": list(self.delimiters),
            "theorem1": self.theorem1.to_dict() if self.theorem1 else None,
            "intervals": [self.per_interval[key].to_dict() for key in ordered],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "StationarityReport":
        verdicts = [IntervalVerdict.from_dict(item) for item in payload.get("intervals", ())]
        stationary = payload.get("stationary_interval")
        theorem1 = payload.get("theorem1")
        return cls(
            per_interval={verdict.interval: verdict for verdict in verdicts},
            inf_stationary=bool(payload["inf_stationary"]),
            stationary_interval=None if stationary is None else _pair(stationary),
            alternation_stationary=bool(payload["alternation_stationary"]),
            degenerate=bool(payload.get("degenerate", False)),
            theorem1=None if theorem1 is None else AlternationCheck.from_dict(theorem1),
            delimiters=tuple(int(index) for index in payload.get("delimiters", ())),
        )


def analyze_stationarity(
    model: SplineModel,
    profile: DeviationProfile,
    tol: Optional[float] = None,
    *,
    tau_zero: Optional[float] = None,
    max_unstable: int = DEFAULT_MAX_UNSTABLE,
    include_theorem1: bool = False,
) -> StationarityReport:
    """Run the hull route on block-aligned intervals and the alternation route on all knot intervals."""

    pieces = model.pieces
    mats = build_transform(model, tau_zero=tau_zero)
    verdicts: Dict[Tuple[int, int], IntervalVerdict] = {}
    stationary_interval: Optional[Tuple[int, int]] = None
    for p, q in sorted(
        ((p, q) for p in range(pieces) for q in range(p + 1, pieces + 1)),
        key=lambda pair: (pair[1] - pair[0], pair[0]),
    ):
        alternation = characterization_check(model, profile, p, q, tau_zero=tau_zero)
        hull_verdict: Optional[bool] = None
        evidence: Optional[StationarityEvidence] = None
        if mats.structure.is_aligned(p, q):
            hull_verdict, evidence = interval_stationary(
                model, profile, mats, p, q, tol, max_unstable=max_unstable
            )
            if hull_verdict and stationary_interval is None:
                stationary_interval = (p, q)
        verdicts[(p, q)] = IntervalVerdict((p, q), alternation, hull_verdict, evidence)
    if profile.degenerate:
        stationary_interval = (0, pieces)

    report = StationarityReport(
        per_interval=verdicts,
        inf_stationary=stationary_interval is not None,
        stationary_interval=stationary_interval,
        alternation_stationary=any(verdict.alternation.passes for verdict in verdicts.values()),
        degenerate=profile.degenerate,
        theorem1=theorem1_check(model, profile, tau_zero=tau_zero) if include_theorem1 else None,
        delimiters=mats.structure.delimiters,
    )
    if not report.routes_agree:
        LOGGER.warning(
            "Hull and alternation routes disagree (hull=%s, alternation=%s)",
            report.inf_stationary,
            report.alternation_stationary,
        )
    return report
