import json
import math
from pathlib import Path
from textwrap import dedent

import pytest

from fkcheb.problem import (
    Mode,
    ProblemSpec,
    ProblemValidationError,
    bundled_problem,
    load_problem,
    problem_from_dict,
)
from fkcheb.targets import Support, TargetKind


def write_problem(tmp_path: Path, payload: object) -> Path:
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def abs_problem(**overrides: object) -> dict:
    payload = {
        "name": "abs",
        "interval": [-1, 1],
        "degree": 1,
        "pieces": 2,
        "target": {"kind": "named_expression_pieces", "pieces": [{"interval": [-1, 1], "expression": "abs"}]},
        "initial_model": {"knots": [0], "a00": 1, "blocks": [[-1], [2]]},
    }
    payload.update(overrides)
    return payload


def test_loads_the_bundled_samples_problem(example1: ProblemSpec) -> None:
    assert example1.name == "example1"
    assert (example1.a, example1.b, example1.degree, example1.pieces) == (-2.0, 2.0, 3, 2)
    assert example1.mode is Mode.CHECK
    assert example1.target.kind is TargetKind.SAMPLED
    assert example1.target.support is Support.SAMPLES
    assert example1.initial_model is not None
    assert example1.initial_model.knots == (0.0,)
    assert example1.fixed_knots() == (0.0,)


def test_loads_the_bundled_heuristic_problem(counterexample: ProblemSpec) -> None:
    assert counterexample.mode is Mode.FIT_HEURISTIC
    assert counterexample.b == pytest.approx(1.5 * math.pi)
    assert counterexample.grid_n == 3001
    assert counterexample.initial_model is None
    assert counterexample.target(math.pi / 2) == pytest.approx(1.0)


def test_unknown_bundled_name_is_reported() -> None:
    assert bundled_problem("example1.json") == bundled_problem("example1")
    with pytest.raises(FileNotFoundError):
        bundled_problem("does-not-exist")


def test_every_schema_violation_is_collected(tmp_path: Path) -> None:
    path = write_problem(
        tmp_path,
        {
            "interval": [1, 0],
            "degree": 0,
            "pieces": "two",
            "mode": "optimise",
            "colour": "blue",
            "target": {"kind": "sampled_piecewise_linear", "points": [[0, 1]]},
            "tolerances": {"hull_tol": -1, "speed": 3},
        },
    )

    with pytest.raises(ProblemValidationError) as excinfo:
        load_problem(path)

    text = "\n".join(excinfo.value.errors)
    assert "Unknown field(s): colour" in text
    assert "a < b" in text
    assert "'degree' must be at least 1" in text
    assert "Invalid integer value for 'pieces'" in text
    assert "Field 'mode' must be one of" in text
    assert "at least two points" in text
    assert "Unknown tolerance 'speed'" in text
    assert "tolerances.hull_tol" in text
    assert len(excinfo.value.errors) >= 8


def test_empty_and_malformed_files(tmp_path: Path) -> None:
    path = tmp_path / "empty.json"
    path.write_text("   \n", encoding="utf-8")
    with pytest.raises(ProblemValidationError, match="empty"):
        load_problem(path)

    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ProblemValidationError, match="not valid JSON"):
        load_problem(path)

    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ProblemValidationError, match="JSON object"):
        load_problem(path)


def test_discontinuous_target_is_rejected(tmp_path: Path) -> None:
    content = dedent(
        """
        {
          "interval": [0, 2],
          "degree": 1,
          "pieces": 2,
          "mode": "fit-heuristic",
          "target": {
            "kind": "named_expression_pieces",
            "pieces": [
              {"interval": [0, 1], "expression": "constant", "params": {"value": 0}},
              {"interval": [1, 2], "expression": "constant", "params": {"value": 1}}
            ]
          }
        }
        """
    ).strip()
    path = tmp_path / "jump.json"
    path.write_text(content, encoding="utf-8")

    with pytest.raises(ProblemValidationError) as excinfo:
        load_problem(path)

    assert any("discontinuous" in message for message in excinfo.value.errors)


def test_target_domain_must_match_the_interval() -> None:
    with pytest.raises(ProblemValidationError, match="does not match"):
        problem_from_dict(abs_problem(interval=[-1, 2]))


def test_mode_requirements() -> None:
    payload = abs_problem(mode="analyze")
    payload.pop("initial_model")
    with pytest.raises(ProblemValidationError, match="requires 'initial_model'"):
        problem_from_dict(payload)

    with pytest.raises(ProblemValidationError, match="'pieces' >= 2"):
        problem_from_dict(abs_problem(pieces=1, initial_model=None, mode="fit-heuristic"))

    spec = problem_from_dict(abs_problem(knots=[0.25], initial_model=None, mode="fit-fixed"))
    assert spec.fixed_knots() == (0.25,)


def test_knot_count_must_match_the_pieces() -> None:
    with pytest.raises(ProblemValidationError, match="needs 1 entries"):
        problem_from_dict(abs_problem(knots=[-0.5, 0.5]))
    with pytest.raises(ProblemValidationError, match="pieces but 'pieces' is 3"):
        problem_from_dict(abs_problem(pieces=3))


def test_mode_override(counterexample: ProblemSpec) -> None:
    with pytest.raises(ProblemValidationError, match="requires 'initial_model'"):
        counterexample.with_mode(Mode.ANALYZE)

    spec = problem_from_dict(abs_problem())
    assert spec.with_mode(Mode.CHECK).mode is Mode.CHECK
    assert spec.with_mode(Mode.FIT_FIXED).fixed_knots() == (0.0,)


def test_tolerances_and_grids_are_read() -> None:
    spec = problem_from_dict(
        abs_problem(grid=500, breakpoint_grid=41, tolerances={"tau_zero": 1e-9, "tol_extreme": 1e-7})
    )

    assert (spec.grid_n, spec.breakpoint_grid) == (500, 41)
    assert spec.tau_zero == pytest.approx(1e-9)
    assert spec.tol_extreme == pytest.approx(1e-7)
    assert spec.hull_tol is None
    assert spec.to_dict()["tolerances"]["tau_zero"] == pytest.approx(1e-9)
    with pytest.raises(ProblemValidationError, match="'grid' must be at least 2"):
        problem_from_dict(abs_problem(grid=1))


@pytest.mark.parametrize(("degree", "pieces", "floor"), [(1, 2, 40), (3, 2, 80), (2, 4, 120)])
def test_grid_must_cover_the_parameter_count(degree: int, pieces: int, floor: int) -> None:
    knots = [-1 + 2 * index / pieces for index in range(1, pieces)]
    payload = abs_problem(
        degree=degree,
        pieces=pieces,
        initial_model={"knots": knots, "a00": 0, "blocks": [[0] * degree for _ in range(pieces)]},
    )

    assert problem_from_dict(dict(payload, grid=floor)).grid_n == floor
    with pytest.raises(ProblemValidationError) as excinfo:
        problem_from_dict(dict(payload, grid=floor - 1))
    assert excinfo.value.errors == [
        f"Field 'grid' must be at least {floor} for degree {degree} with {pieces} pieces, got {floor - 1}"
    ]


@pytest.mark.parametrize("name", ["example1", "counterexample"])
def test_spec_dict_rebuilds_the_same_spec(name: str) -> None:
    spec = load_problem(bundled_problem(name))

    rebuilt = ProblemSpec.from_dict(json.loads(json.dumps(spec.to_dict())))

    assert rebuilt.to_dict() == spec.to_dict()
    assert rebuilt.mode is spec.mode
    assert rebuilt.grid_n == spec.grid_n
