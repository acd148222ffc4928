import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from fkcheb.config import AnalysisConfig
from fkcheb.pipelines import analysis_pipeline
from fkcheb.pipelines.analysis_pipeline import (
    AnalysisPipeline,
    AnalysisReport,
    load_report,
    render_report,
    write_artifacts,
)
from fkcheb.problem import Mode, ProblemSpec, problem_from_dict


def read_rows(path: Path) -> list:
    with path.open(newline="", encoding="utf-8") as fp:
        return list(csv.DictReader(fp))


def test_check_mode_reports_both_characterizations(example1: ProblemSpec, out_dir: Path) -> None:
    report = AnalysisPipeline(AnalysisConfig(output_dir=out_dir)).run(example1)

    assert isinstance(report, AnalysisReport)
    assert report.succeeded
    assert report.fit is None
    assert report.profile is not None and report.profile.psi == pytest.approx(1.0)
    assert report.stationarity is not None
    assert not report.stationarity.inf_stationary
    assert report.stationarity.theorem1 is not None and report.stationarity.theorem1.passes
    assert report.as_dict() == {
        "problem": "example1",
        "mode": "check",
        "psi": report.profile.psi,
        "inf_stationary": False,
        "errors": 0,
    }


def test_analyze_mode_skips_the_fixed_knot_count(example1: ProblemSpec) -> None:
    report = AnalysisPipeline(AnalysisConfig()).run(example1.with_mode(Mode.ANALYZE))

    assert report.succeeded
    assert report.stationarity is not None and report.stationarity.theorem1 is None


def test_artifacts_are_written(example1: ProblemSpec, out_dir: Path) -> None:
    report = AnalysisPipeline(AnalysisConfig(output_dir=out_dir)).run(example1)

    written = write_artifacts(report, example1, out_dir)

    assert [path.name for path in written] == ["report.json", "deviation.csv", "extremes.csv"]
    extremes = read_rows(out_dir / "extremes.csv")
    assert len(extremes) == 7
    assert [int(row["sign"]) for row in extremes] == [1, -1, 1, -1, 1, -1, 1]
    assert extremes[3]["location"] == "neutral_knot"
    deviation = read_rows(out_dir / "deviation.csv")
    assert [float(row["t"]) for row in deviation] == [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]
    payload = json.loads((out_dir / "report.json").read_text(encoding="utf-8"))
    assert payload["spec"]["name"] == "example1"
    assert payload["detail"]["stationarity"]["theorem1"]["passes"] is True


def test_rendered_report_is_deterministic(example1: ProblemSpec) -> None:
    pipeline = AnalysisPipeline(AnalysisConfig())

    first = render_report(pipeline.run(example1), example1)
    second = render_report(pipeline.run(example1), example1)

    assert first == second
    assert first.endswith("\n")
    assert list(json.loads(first)) == sorted(json.loads(first))


def test_fixed_knot_mode_fits_before_analysing(example1: ProblemSpec) -> None:
    report = AnalysisPipeline(AnalysisConfig()).run(example1.with_mode(Mode.FIT_FIXED))

    assert report.succeeded
    assert report.fit is not None
    assert report.model is report.fit.model
    assert report.profile is not None and report.profile.psi < 1.0 - 1e-3


def test_fit_failures_are_recorded(example1: ProblemSpec) -> None:
    report = AnalysisPipeline(AnalysisConfig()).run(example1.with_mode(Mode.FIT_HEURISTIC))

    assert not report.succeeded
    assert report.model is None
    assert report.error_details[0]["stage"] == "fit"
    assert report.error_details[0]["error_type"] == "TargetError"


def test_profile_failures_are_recorded(example1: ProblemSpec, monkeypatch: pytest.MonkeyPatch, out_dir: Path) -> None:
    def broken_profile(*args: object, **kwargs: object) -> None:
        raise RuntimeError("grid exploded")

    monkeypatch.setattr(analysis_pipeline, "deviation_profile", broken_profile)

    report = AnalysisPipeline(AnalysisConfig()).run(example1)

    assert report.errors == ["profile failed: grid exploded"]
    assert report.error_details == [
        {"stage": "profile", "error_type": "RuntimeError", "error_message": "profile failed: grid exploded"}
    ]
    assert report.stationarity is None
    written = write_artifacts(report, example1, out_dir)
    assert [path.name for path in written] == ["report.json", "deviation.csv"]


@pytest.mark.parametrize("mode", [Mode.CHECK, Mode.ANALYZE, Mode.FIT_FIXED])
def test_saved_report_reloads_to_identical_text(example1: ProblemSpec, out_dir: Path, mode: Mode) -> None:
    spec = example1.with_mode(mode)
    write_artifacts(AnalysisPipeline(AnalysisConfig()).run(spec), spec, out_dir)
    saved = (out_dir / "report.json").read_text(encoding="utf-8")

    loaded, loaded_spec = load_report(out_dir / "report.json")

    assert render_report(loaded, loaded_spec) == saved
    assert render_report(loaded, spec) == saved
    assert loaded.mode == mode.value
    assert loaded.profile is not None and loaded.profile.breakpoints == (-2.0, 0.0, 2.0)


def test_reloaded_report_keeps_verdicts_and_certificates(example1: ProblemSpec, out_dir: Path) -> None:
    report = AnalysisPipeline(AnalysisConfig()).run(example1)
    write_artifacts(report, example1, out_dir)

    loaded, _ = load_report(out_dir / "report.json")

    assert loaded.stationarity is not None and report.stationarity is not None
    assert loaded.stationarity.found_counts == report.stationarity.found_counts
    assert loaded.stationarity.required_counts == report.stationarity.required_counts
    assert loaded.stationarity.stationary_interval == report.stationarity.stationary_interval
    assert loaded.stationarity.theorem1 == report.stationarity.theorem1
    assert loaded.profile == report.profile
    assert loaded.model == report.model
    for key, verdict in report.stationarity.per_interval.items():
        twin = loaded.stationarity.per_interval[key]
        assert twin.alternation == verdict.alternation
        assert twin.hull_verdict == verdict.hull_verdict
        if verdict.evidence is not None:
            assert twin.evidence is not None
            for mine, theirs in zip(verdict.evidence.certificates, twin.evidence.certificates):
                np.testing.assert_array_equal(theirs.members, mine.members)
                np.testing.assert_array_equal(theirs.lambdas, mine.lambdas)


def test_heuristic_and_failed_reports_reload(counterexample: ProblemSpec, example1: ProblemSpec, tmp_path: Path) -> None:
    heuristic = AnalysisPipeline(AnalysisConfig(grid_n=counterexample.grid_n)).run(counterexample)
    failed = AnalysisPipeline(AnalysisConfig()).run(example1.with_mode(Mode.FIT_HEURISTIC))
    for name, report, spec in (("heuristic", heuristic, counterexample), ("failed", failed, example1)):
        write_artifacts(report, spec, tmp_path / name)
        saved = (tmp_path / name / "report.json").read_text(encoding="utf-8")

        loaded, loaded_spec = load_report(tmp_path / name / "report.json")

        assert render_report(loaded, loaded_spec) == saved
        assert loaded.errors == report.errors

    assert failed.model is None
    loaded_heuristic, _ = load_report(tmp_path / "heuristic" / "report.json")
    assert loaded_heuristic.fit is not None and heuristic.fit is not None
    assert loaded_heuristic.fit.segments == heuristic.fit.segments
    assert loaded_heuristic.fit.profile == heuristic.fit.profile


def test_heuristic_counterexample_fails_the_characterization(counterexample: ProblemSpec) -> None:
    report = AnalysisPipeline(AnalysisConfig(grid_n=counterexample.grid_n)).run(counterexample)

    assert report.succeeded
    assert report.fit is not None and report.model is report.fit.model
    assert report.model.knots[0] == pytest.approx(math.pi, abs=1e-12)
    assert report.stationarity is not None
    assert not report.stationarity.inf_stationary
    assert report.stationarity.stationary_interval is None
    spanning = report.stationarity.per_interval[(0, 2)].alternation
    assert (spanning.required, spanning.found, spanning.passes) == (5, 4, False)


def test_perfect_fit_is_reported_stationary() -> None:
    spec = problem_from_dict(
        {
            "name": "abs",
            "interval": [-1, 1],
            "degree": 1,
            "pieces": 2,
            "target": {"kind": "named_expression_pieces", "pieces": [{"interval": [-1, 1], "expression": "abs"}]},
            "initial_model": {"knots": [0], "a00": 1, "blocks": [[-1], [2]]},
        }
    )

    report = AnalysisPipeline(AnalysisConfig()).run(spec)

    assert report.succeeded
    assert report.profile is not None and report.profile.degenerate
    assert report.profile.psi == pytest.approx(0.0, abs=1e-12)
    assert report.stationarity is not None and report.stationarity.inf_stationary
    assert report.stationarity.stationary_interval == (0, 2)
    assert report.as_dict()["inf_stationary"] is True
