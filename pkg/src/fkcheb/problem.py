"""Problem files: JSON descriptions of a target, a spline space and an analysis mode."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .deviation import minimum_grid_for
from .spline import SplineDomainError, SplineModel
from .targets import TargetError, TargetFunction, parse_real, target_from_dict

LOGGER = logging.getLogger(__name__)

KNOWN_FIELDS = {
    "name",
    "interval",
    "degree",
    "pieces",
    "target",
    "initial_model",
    "knots",
    "grid",
    "breakpoint_grid",
    "tolerances",
    "mode",
}
TOLERANCE_FIELDS = ("tau_zero", "tol_extreme", "hull_tol")


class ProblemValidationError(Exception):
    """Raised when a problem file does not follow the documented schema."""

    def __init__(self, errors: Sequence[str]):
        super().__init__("\n".join(errors))
        self.errors = list(errors)


class Mode(str, Enum):
    ANALYZE = "analyze"
    FIT_FIXED = "fit-fixed"
    FIT_HEURISTIC = "fit-heuristic"
    CHECK = "check"


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    a: float
    b: float
    degree: int
    pieces: int
    target: TargetFunction
    mode: Mode = Mode.ANALYZE
    initial_model: Optional[SplineModel] = None
    knots: Optional[Tuple[float, ...]] = None
    grid_n: Optional[int] = None
    breakpoint_grid: Optional[int] = None
    tau_zero: Optional[float] = None
    tol_extreme: Optional[float] = None
    hull_tol: Optional[float] = None

    def fixed_knots(self) -> Tuple[float, ...]:
        """Knots for ``fit-fixed``: the explicit list, else the initial model's knots."""

        if self.knots is not None:
            return self.knots
        if self.initial_model is not None:
            return self.initial_model.knots
        raise ProblemValidationError(["fit-fixed needs 'knots' or 'initial_model'"])

    def with_mode(self, mode: Mode) -> "ProblemSpec":
        errors = _mode_errors(mode, self.initial_model is not None, self.knots is not None, self.pieces)
        if errors:
            raise ProblemValidationError(errors)
        return replace(self, mode=mode)

    def summary(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "interval": [self.a, self.b],
            "degree": self.degree,
            "pieces": self.pieces,
            "mode": self.mode.value,
            "target": self.target.kind.value,
            "support": self.target.support.value,
            "initial_model": self.initial_model is not None,
        }

    def to_dict(self) -> Dict[str, Any]:
        payload = self.summary()
        payload["target"] = self.target.to_dict()
        payload["initial_model"] = self.initial_model.to_dict() if self.initial_model else None
        payload["knots"] = list(self.knots) if self.knots is not None else None
        payload["grid"] = self.grid_n
        payload["breakpoint_grid"] = self.breakpoint_grid
        payload["tolerances"] = {name: getattr(self, name) for name in TOLERANCE_FIELDS}
        return payload

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "ProblemSpec":
        """Rebuild a spec from :meth:`to_dict` output; summary-only keys are dropped."""

        return problem_from_dict({key: value for key, value in payload.items() if key in KNOWN_FIELDS})


def bundled_problem(name: str) -> Path:
    """Path of a problem file shipped with the package, e.g. ``"example1"``."""

    stem = name[:-5] if name.endswith(".json") else name
    path = Path(str(resources.files("fkcheb") / "data" / f"{stem}.json"))
    if not path.is_file():
        raise FileNotFoundError(f"No bundled problem named '{name}'")
    return path


def load_problem(path: Path) -> ProblemSpec:
    """Load and validate a problem file; every schema violation is reported at once."""

    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise ProblemValidationError([f"Problem file {path} is empty"])
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemValidationError([f"Problem file {path} is not valid JSON: {exc}"]) from exc
    if not isinstance(payload, dict):
        raise ProblemValidationError(["Problem file must contain a JSON object"])
    spec = problem_from_dict(payload, default_name=Path(path).stem)
    LOGGER.info("Loaded problem '%s' (m=%d, N=%d, mode=%s)", spec.name, spec.degree, spec.pieces, spec.mode.value)
    return spec


def problem_from_dict(payload: Mapping[str, Any], default_name: str = "problem") -> ProblemSpec:
    errors: List[str] = []

    unknown = sorted(set(payload) - KNOWN_FIELDS)
    if unknown:
        errors.append(f"Unknown field(s): {', '.join(unknown)}")

    name = payload.get("name", default_name)
    if not isinstance(name, str) or not name:
        errors.append("Field 'name' must be a non-empty string")
        name = default_name

    interval = _collect(errors, _parse_interval, payload.get("interval"))
    degree = _collect(errors, _parse_int, payload.get("degree"), "degree", 1)
    pieces = _collect(errors, _parse_int, payload.get("pieces"), "pieces", 1)

    mode = Mode.ANALYZE
    if "mode" in payload:
        try:
            mode = Mode(payload["mode"])
        except ValueError:
            errors.append(f"Field 'mode' must be one of {', '.join(item.value for item in Mode)}")

    target: Optional[TargetFunction] = None
    raw_target = payload.get("target")
    if not isinstance(raw_target, Mapping):
        errors.append("Field 'target' is required and must be an object")
    else:
        try:
            target = target_from_dict(raw_target)
        except TargetError as exc:
            errors.append(f"target: {exc}")
    if target is not None and interval is not None:
        a, b = interval
        width = b - a
        if abs(target.a - a) > 1e-12 * width or abs(target.b - b) > 1e-12 * width:
            errors.append(f"Target domain [{target.a}, {target.b}] does not match 'interval' [{a}, {b}]")

    initial_model: Optional[SplineModel] = None
    if payload.get("initial_model") is not None and interval is not None and degree is not None:
        initial_model = _collect(errors, _parse_model, payload["initial_model"], degree, interval)
        if initial_model is not None and pieces is not None and initial_model.pieces != pieces:
            errors.append(
                f"initial_model has {initial_model.pieces} pieces but 'pieces' is {pieces}"
            )

    knots: Optional[Tuple[float, ...]] = None
    if payload.get("knots") is not None:
        knots = _collect(errors, _parse_reals, payload["knots"], "knots")
        if knots is not None and pieces is not None and len(knots) != pieces - 1:
            errors.append(f"Field 'knots' needs {pieces - 1} entries, got {len(knots)}")

    grid_n = _collect(errors, _parse_int, payload.get("grid"), "grid", 2, True)
    if grid_n is not None and degree is not None and pieces is not None:
        floor = minimum_grid_for(degree, pieces)
        if grid_n < floor:
            errors.append(f"Field 'grid' must be at least {floor} for degree {degree} with {pieces} pieces, got {grid_n}")
    breakpoint_grid = _collect(errors, _parse_int, payload.get("breakpoint_grid"), "breakpoint_grid", 3, True)

    tolerances: Dict[str, Optional[float]] = {name: None for name in TOLERANCE_FIELDS}
    raw_tolerances = payload.get("tolerances") or {}
    if not isinstance(raw_tolerances, Mapping):
        errors.append("Field 'tolerances' must be an object")
    else:
        for key in sorted(set(raw_tolerances) - set(TOLERANCE_FIELDS)):
            errors.append(f"Unknown tolerance '{key}'")
        for key in TOLERANCE_FIELDS:
            if raw_tolerances.get(key) is not None:
                tolerances[key] = _collect(errors, _parse_positive, raw_tolerances[key], f"tolerances.{key}")

    errors.extend(
        _mode_errors(mode, payload.get("initial_model") is not None, payload.get("knots") is not None, pieces)
    )

    if errors:
        raise ProblemValidationError(errors)

    assert interval is not None and degree is not None and pieces is not None and target is not None
    return ProblemSpec(
        name=name,
        a=interval[0],
        b=interval[1],
        degree=degree,
        pieces=pieces,
        target=target,
        mode=mode,
        initial_model=initial_model,
        knots=knots,
        grid_n=grid_n,
        breakpoint_grid=breakpoint_grid,
        **tolerances,
    )


# -- helpers -------------------------------------------------------------------

def _mode_errors(mode: Mode, has_model: bool, has_knots: bool, pieces: Optional[int]) -> List[str]:
    errors: List[str] = []
    if mode in (Mode.ANALYZE, Mode.CHECK) and not has_model:
        errors.append(f"Mode '{mode.value}' requires 'initial_model'")
    if mode is Mode.FIT_FIXED and not (has_knots or has_model):
        errors.append("Mode 'fit-fixed' requires 'knots' or 'initial_model'")
    if mode is Mode.FIT_HEURISTIC and pieces is not None and pieces < 2:
        errors.append("Mode 'fit-heuristic' requires 'pieces' >= 2")
    return errors


def _collect(errors: List[str], parser: Any, *args: Any) -> Any:
    try:
        return parser(*args)
    except (TargetError, SplineDomainError, ValueError, TypeError) as exc:
        errors.append(str(exc))
        return None


def _parse_interval(value: Any) -> Tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ValueError("Field 'interval' must be a pair [a, b]")
    a, b = parse_real(value[0], "interval[0]"), parse_real(value[1], "interval[1]")
    if not a < b:
        raise ValueError(f"Field 'interval' must satisfy a < b, got [{a}, {b}]")
    return a, b


def _parse_int(value: Any, field: str, minimum: int, optional: bool = False) -> Optional[int]:
    if value is None:
        if optional:
            return None
        raise ValueError(f"Field '{field}' is required")
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"Invalid integer value for '{field}': {value!r}")
    if value < minimum:
        raise ValueError(f"Field '{field}' must be at least {minimum}, got {value}")
    return value


def _parse_positive(value: Any, field: str) -> float:
    number = parse_real(value, field)
    if not number > 0:
        raise ValueError(f"Field '{field}' must be positive, got {number}")
    return number


def _parse_reals(value: Any, field: str) -> Tuple[float, ...]:
    if not isinstance(value, (list, tuple)):
        raise ValueError(f"Field '{field}' must be a list of reals")
    return tuple(parse_real(item, f"{field}[{index}]") for index, item in enumerate(value))


def _parse_model(value: Any, degree: int, interval: Tuple[float, float]) -> SplineModel:
    if not isinstance(value, Mapping):
        raise ValueError("Field 'initial_model' must be an object")
    blocks = value.get("blocks")
    if not isinstance(blocks, list) or not all(isinstance(block, list) for block in blocks):
        raise ValueError("Field 'initial_model.blocks' must be a list of coefficient lists")
    if "a00" not in value:
        raise ValueError("Field 'initial_model.a00' is required")
    return SplineModel(
        degree=degree,
        a=interval[0],
        b=interval[1],
        knots=_parse_reals(value.get("knots", []), "initial_model.knots"),
        a00=parse_real(value["a00"], "initial_model.a00"),
        blocks=tuple(
            _parse_reals(block, f"initial_model.blocks[{index}]") for index, block in enumerate(blocks)
        ),
    )
