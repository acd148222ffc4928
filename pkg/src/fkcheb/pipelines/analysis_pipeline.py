"""Pipeline orchestrator running fits, deviation profiles and stationarity analysis."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..config import AnalysisConfig
from ..deviation import DeviationProfile, deviation_profile
from ..problem import Mode, ProblemSpec
from ..solvers import FitResult, best_fixed_knot_spline, meinardus_fit
from ..spline import SplineModel, evaluate, normalize
from ..stationarity import StationarityReport, analyze_stationarity

LOGGER = logging.getLogger(__name__)

REPORT_FILE = "report.json"
DEVIATION_FILE = "deviation.csv"
EXTREMES_FILE = "extremes.csv"


@dataclass
class AnalysisReport:
    """Outcome of one pipeline run; failed stages are recorded instead of raised."""

    problem: str
    mode: str
    model: Optional[SplineModel] = None
    fit: Optional[FitResult] = None
    profile: Optional[DeviationProfile] = None
    stationarity: Optional[StationarityReport] = None
    errors: List[str] = field(default_factory=list)
    error_details: List[dict] = field(default_factory=list)

    @property
    def succeeded(self) -> bool:
        return not self.errors

    def as_dict(self, *, include_details: bool = False) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "problem": self.problem,
            "mode": self.mode,
            "psi": self.profile.psi if self.profile else None,
            "inf_stationary": self.stationarity.inf_stationary if self.stationarity else None,
            "errors": len(self.errors),
        }
        if include_details:
            payload["detail"] = {
                "model": self.model.to_dict() if self.model else None,
                "fit": self.fit.to_dict() if self.fit else None,
                "profile": self.profile.to_dict() if self.profile else None,
                "stationarity": self.stationarity.to_dict() if self.stationarity else None,
                "errors": self.error_details,
            }
        return payload

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "AnalysisReport":
        """Inverse of ``as_dict(include_details=True)``."""

        detail = payload.get("detail") or {}
        error_details = [dict(item) for item in detail.get("errors") or ()]
        model = detail.get("model")
        fit = detail.get("fit")
        profile = detail.get("profile")
        stationarity = detail.get("stationarity")
        return cls(
            problem=payload["problem"],
            mode=payload["mode"],
            model=SplineModel.from_dict(model) if model is not None else None,
            fit=FitResult.from_dict(fit) if fit is not None else None,
            profile=DeviationProfile.from_dict(profile) if profile is not None else None,
            stationarity=StationarityReport.from_dict(stationarity) if stationarity is not None else None,
            errors=[item["error_message"] for item in error_details],
            error_details=error_details,
        )

    def record_error(self, message: str, stage: str, exc: Optional[BaseException] = None) -> None:
        self.errors.append(message)
        self.error_details.append(
            {
                "stage": stage,
                "error_type": type(exc).__name__ if exc is not None else None,
                "error_message": message,
            }
        )


class AnalysisPipeline:
    """Runs the stages a problem's mode asks for and writes the artifacts."""

    def __init__(self, config: AnalysisConfig):
        self._config = config

    def run(self, spec: ProblemSpec) -> AnalysisReport:
        report = AnalysisReport(problem=spec.name, mode=spec.mode.value)
        config = self._config

        try:
            report.model, report.fit = self._model_for(spec)
        except Exception as exc:  # pylint: disable=broad-except
            LOGGER.exception("Failed to obtain a spline for problem %s", spec.name)
            report.record_error(f"fit failed: {exc}", "fit", exc)
            return report

        try:
            report.profile = deviation_profile(
                report.model,
                spec.target,
                config.grid_n,
                config.tol_extreme,
                tau_zero=config.tau_zero,
            )
        except Exception as exc:  # pylint: disable=broad-except
            LOGGER.exception("Failed to compute the deviation profile")
            report.record_error(f"profile failed: {exc}", "profile", exc)
            return report
        LOGGER.info("Psi = %.17g with %d extreme points", report.profile.psi, len(report.profile.extremes))

        try:
            report.stationarity = analyze_stationarity(
                report.model,
                report.profile,
                config.hull_tol,
                tau_zero=config.tau_zero,
                max_unstable=config.max_unstable_knots,
                include_theorem1=spec.mode is Mode.CHECK,
            )
        except Exception as exc:  # pylint: disable=broad-except
            LOGGER.exception("Stationarity analysis failed")
            report.record_error(f"stationarity failed: {exc}", "stationarity", exc)
            return report

        stationarity = report.stationarity
        LOGGER.info(
            "inf-stationary: %s (stationary interval %s)",
            stationarity.inf_stationary,
            stationarity.stationary_interval,
        )
        return report

    # -- helpers ---------------------------------------------------------
    def _model_for(self, spec: ProblemSpec) -> tuple[SplineModel, Optional[FitResult]]:
        config = self._config
        if spec.mode is Mode.FIT_FIXED:
            fit = best_fixed_knot_spline(
                spec.target, spec.fixed_knots(), spec.degree, config.grid_n, tau_zero=config.tau_zero
            )
            return fit.model, fit
        if spec.mode is Mode.FIT_HEURISTIC:
            fit = meinardus_fit(
                spec.target,
                spec.degree,
                spec.pieces,
                config.grid_n,
                breakpoint_grid=config.breakpoint_grid,
                tau_zero=config.tau_zero,
            )
            return fit.model, fit

        assert spec.initial_model is not None
        model = spec.initial_model
        if not model.is_sorted:
            LOGGER.info("Normalizing the initial model's knots")
            model = normalize(model)
        return model, None


# -- artifacts -------------------------------------------------------------------

def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else None
    return value


def render_report(report: AnalysisReport, spec: ProblemSpec) -> str:
    """Deterministic JSON text: sorted keys and shortest round-trip floats."""

    payload = report.as_dict(include_details=True)
    payload["spec"] = spec.to_dict()
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def load_report(path: Path) -> Tuple[AnalysisReport, ProblemSpec]:
    """Read a ``report.json`` back; rendering the result reproduces the file byte for byte."""

    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    spec = ProblemSpec.from_dict(payload["spec"])
    report = AnalysisReport.from_dict(payload)
    LOGGER.info("Loaded report for problem %s from %s", report.problem, path)
    return report, spec


def write_artifacts(report: AnalysisReport, spec: ProblemSpec, output_dir: Path, grid_n: Optional[int] = None) -> List[Path]:
    output_dir.mkdir(parents=True, exist_ok=True)
    written = [output_dir / REPORT_FILE]
    written[0].write_text(render_report(report, spec), encoding="utf-8")

    if report.model is not None:
        path = output_dir / DEVIATION_FILE
        _write_deviation_csv(path, report.model, spec, grid_n)
        written.append(path)
    if report.profile is not None:
        path = output_dir / EXTREMES_FILE
        _write_extremes_csv(path, report.profile)
        written.append(path)
    LOGGER.info("Wrote %s", ", ".join(str(path) for path in written))
    return written


def _write_deviation_csv(path: Path, model: SplineModel, spec: ProblemSpec, grid_n: Optional[int]) -> None:
    target = spec.target
    if target.is_discrete:
        ts = target.breakpoints
    else:
        count = grid_n or 2001
        ts = np.union1d(np.linspace(model.a, model.b, count), model.knots)
    f_values = target(ts)
    s_values = evaluate(model, ts)
    with path.open("w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp)
        writer.writerow(["t", "f", "s", "s_minus_f"])
        for t, f_value, s_value in zip(ts, f_values, s_values):
            writer.writerow([repr(float(t)), repr(float(f_value)), repr(float(s_value)), repr(float(s_value - f_value))])


def _write_extremes_csv(path: Path, profile: DeviationProfile) -> None:
    with path.open("w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp)
        writer.writerow(["t", "sign", "location", "stability", "knot_index", "deviation"])
        for extreme in profile.extremes:
            writer.writerow(
                [
                    repr(float(extreme.t)),
                    extreme.sign,
                    extreme.location.value,
                    extreme.stability.value,
                    "" if extreme.knot_index is None else extreme.knot_index,
                    repr(float(extreme.deviation)),
                ]
            )
