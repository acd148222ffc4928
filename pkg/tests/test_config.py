from pathlib import Path

import pytest

from fkcheb.config import DEFAULT_BREAKPOINT_GRID, DEFAULT_MAX_UNSTABLE, AnalysisConfig, InvalidConfiguration


def test_defaults_without_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    for name in ("OUT", "GRID", "TAU_ZERO", "TOL_EXTREME", "HULL_TOL", "MAX_UNSTABLE", "BREAKPOINT_GRID"):
        monkeypatch.delenv(f"FKCHEB_{name}", raising=False)

    config = AnalysisConfig.from_env()

    assert config.output_dir == Path("fkcheb-out")
    assert config.grid_n is None
    assert config.hull_tol is None
    assert config.max_unstable_knots == DEFAULT_MAX_UNSTABLE
    assert config.breakpoint_grid == DEFAULT_BREAKPOINT_GRID


def test_environment_overrides(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    monkeypatch.setenv("FKCHEB_OUT", str(tmp_path / "reports"))
    monkeypatch.setenv("FKCHEB_GRID", "5000")
    monkeypatch.setenv("FKCHEB_HULL_TOL", "1e-9")
    monkeypatch.setenv("FKCHEB_MAX_UNSTABLE", "4")
    monkeypatch.setenv("FKCHEB_TAU_ZERO", " ")

    config = AnalysisConfig.from_env()

    assert config.output_dir == tmp_path / "reports"
    assert config.grid_n == 5000
    assert config.hull_tol == pytest.approx(1e-9)
    assert config.max_unstable_knots == 4
    assert config.tau_zero is None


def test_custom_prefix(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("ALT_GRID", "300")

    assert AnalysisConfig.from_env(prefix="ALT_").grid_n == 300


@pytest.mark.parametrize(
    "name, value",
    [("FKCHEB_GRID", "many"), ("FKCHEB_GRID", "1"), ("FKCHEB_HULL_TOL", "-1"), ("FKCHEB_BREAKPOINT_GRID", "2")],
)
def test_invalid_environment_values(monkeypatch: pytest.MonkeyPatch, name: str, value: str) -> None:
    monkeypatch.setenv(name, value)

    with pytest.raises(InvalidConfiguration):
        AnalysisConfig.from_env()


def test_overrides_skip_missing_values() -> None:
    base = AnalysisConfig(grid_n=800, hull_tol=1e-8)

    updated = base.with_overrides(grid_n=None, hull_tol=1e-6, output_dir="~/fk")

    assert updated.grid_n == 800
    assert updated.hull_tol == pytest.approx(1e-6)
    assert updated.output_dir == Path("~/fk").expanduser()
    assert base.hull_tol == pytest.approx(1e-8)
    with pytest.raises(InvalidConfiguration):
        base.with_overrides(tol_extreme=0.0)
