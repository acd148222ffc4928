"""Configuration utilities for the fkcheb analysis tools."""
from __future__ import annotations

from dataclasses import dataclass, replace
import os
from pathlib import Path
from typing import Callable, Optional, TypeVar

DEFAULT_GRID = 2000
DEFAULT_BREAKPOINT_GRID = 121
DEFAULT_MAX_UNSTABLE = 20

_T = TypeVar("_T")


class InvalidConfiguration(RuntimeError):
    """Raised when a configuration variable cannot be interpreted."""


@dataclass(frozen=True)
class AnalysisConfig:
    """Numerical settings and output location shared by the pipeline and the CLI.

    Tolerances left as ``None`` fall back to the scale-aware defaults of the
    module that uses them (``tau_zero`` in :mod:`fkcheb.spline`,
    ``tol_extreme`` in :mod:`fkcheb.deviation`, ``hull_tol`` in
    :mod:`fkcheb.stationarity`).
    """

    output_dir: Path = Path("fkcheb-out")
    grid_n: Optional[int] = None
    tau_zero: Optional[float] = None
    tol_extreme: Optional[float] = None
    hull_tol: Optional[float] = None
    max_unstable_knots: int = DEFAULT_MAX_UNSTABLE
    breakpoint_grid: int = DEFAULT_BREAKPOINT_GRID

    @staticmethod
    def from_env(prefix: str = "FKCHEB_") -> "AnalysisConfig":
        """Create an :class:`AnalysisConfig` from environment variables.

        Parameters
        ----------
        prefix:
            Prefix used for environment variables. ``FKCHEB_OUT`` sets the
            output directory; ``FKCHEB_GRID``, ``FKCHEB_TAU_ZERO``,
            ``FKCHEB_TOL_EXTREME``, ``FKCHEB_HULL_TOL``,
            ``FKCHEB_MAX_UNSTABLE`` and ``FKCHEB_BREAKPOINT_GRID`` set the
            numerical knobs.
        """

        out_env = os.getenv(f"{prefix}OUT")
        output_dir = Path(out_env).expanduser() if out_env else Path("fkcheb-out")

        max_unstable = _optional_env(f"{prefix}MAX_UNSTABLE", int)
        breakpoint_grid = _optional_env(f"{prefix}BREAKPOINT_GRID", int)

        config = AnalysisConfig(
            output_dir=output_dir,
            grid_n=_optional_env(f"{prefix}GRID", int),
            tau_zero=_optional_env(f"{prefix}TAU_ZERO", float),
            tol_extreme=_optional_env(f"{prefix}TOL_EXTREME", float),
            hull_tol=_optional_env(f"{prefix}HULL_TOL", float),
            max_unstable_knots=DEFAULT_MAX_UNSTABLE if max_unstable is None else max_unstable,
            breakpoint_grid=DEFAULT_BREAKPOINT_GRID if breakpoint_grid is None else breakpoint_grid,
        )
        config.validate()
        return config

    def with_overrides(self, **values: object) -> "AnalysisConfig":
        """Return a copy where every non-``None`` override replaces the current value."""

        changes = {key: value for key, value in values.items() if value is not None}
        if "output_dir" in changes:
            changes["output_dir"] = Path(str(changes["output_dir"])).expanduser()
        updated = replace(self, **changes)
        updated.validate()
        return updated

    def validate(self) -> None:
        for name in ("tau_zero", "tol_extreme", "hull_tol"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise InvalidConfiguration(f"Tolerance '{name}' must be positive, got {value}")
        if self.grid_n is not None and self.grid_n < 2:
            raise InvalidConfiguration(f"Grid size must be at least 2, got {self.grid_n}")
        if self.max_unstable_knots < 0:
            raise InvalidConfiguration("max_unstable_knots cannot be negative")
        if self.breakpoint_grid < 3:
            raise InvalidConfiguration("breakpoint_grid must be at least 3")


def _optional_env(name: str, cast: Callable[[str], _T]) -> Optional[_T]:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        return cast(raw.strip())
    except (TypeError, ValueError) as exc:
        raise InvalidConfiguration(f"Invalid value provided via {name}: {raw!r}") from exc
