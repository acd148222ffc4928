import math

import numpy as np
import pytest

from fkcheb.targets import (
    ExpressionPiece,
    Support,
    TargetError,
    TargetFunction,
    parse_real,
    target_from_dict,
)


def test_parse_real_accepts_pi_expressions() -> None:
    assert parse_real("pi") == pytest.approx(math.pi)
    assert parse_real("3*pi/2") == pytest.approx(1.5 * math.pi)
    assert parse_real("-pi/2") == pytest.approx(-0.5 * math.pi)
    assert parse_real("1/3") == pytest.approx(1.0 / 3.0)
    assert parse_real(2) == 2.0


@pytest.mark.parametrize("value", ["pie", "1/0", "2**3", True, None, float("inf")])
def test_parse_real_rejects_other_values(value: object) -> None:
    with pytest.raises(TargetError):
        parse_real(value, "interval[0]")  # type: ignore[arg-type]


def test_sampled_target_interpolates_linearly() -> None:
    target = TargetFunction.sampled([(0, 0), (1, 2), (3, 0)])

    assert target(0.5) == pytest.approx(1.0)
    assert target(2.0) == pytest.approx(1.0)
    np.testing.assert_allclose(target.breakpoints, [0.0, 1.0, 3.0])
    assert not target.is_discrete
    with pytest.raises(TargetError):
        target(3.5)


def test_sampled_target_needs_increasing_abscissae() -> None:
    with pytest.raises(TargetError):
        TargetFunction.sampled([(0, 0), (0, 1)])
    with pytest.raises(TargetError):
        TargetFunction.sampled([(0, 0)])


def test_expression_pieces_must_join_continuously() -> None:
    sine = ExpressionPiece.build(0, "pi", "sin")
    folded = ExpressionPiece.build("pi", "3*pi/2", "sin", {"amplitude": -1, "frequency": 2})
    target = TargetFunction.from_pieces([sine, folded])

    assert target(math.pi / 2) == pytest.approx(1.0)
    assert target(1.25 * math.pi) == pytest.approx(-1.0)

    jump = ExpressionPiece.build("pi", "3*pi/2", "constant", {"value": 1})
    with pytest.raises(TargetError, match="discontinuous"):
        TargetFunction.from_pieces([sine, jump])


def test_unknown_expression_and_parameters_are_reported() -> None:
    with pytest.raises(TargetError, match="Unknown expression"):
        ExpressionPiece.build(0, 1, "cosh")
    with pytest.raises(TargetError, match="does not accept"):
        ExpressionPiece.build(0, 1, "sin", {"period": 2})
    with pytest.raises(TargetError, match="requires"):
        ExpressionPiece.build(0, 1, "monomial")


def test_target_from_dict_builds_both_kinds() -> None:
    sampled = target_from_dict(
        {"kind": "sampled_piecewise_linear", "support": "samples", "points": [[-1, 1], [0, 0], [1, 1]]}
    )
    assert sampled.is_discrete
    assert sampled.support is Support.SAMPLES

    expression = target_from_dict(
        {
            "kind": "named_expression_pieces",
            "pieces": [{"interval": [0, 1], "expression": "monomial", "params": {"power": 2}}],
        }
    )
    assert expression(0.5) == pytest.approx(0.25)

    with pytest.raises(TargetError):
        target_from_dict({"kind": "named_expression_pieces", "support": "samples", "pieces": []})
    with pytest.raises(TargetError):
        target_from_dict({"kind": "spline"})


def test_restrict_keeps_values_on_the_subinterval() -> None:
    target = TargetFunction.sampled([(0, 0), (1, 2), (3, 0)])

    inner = target.restrict(0.5, 2.0)

    assert (inner.a, inner.b) == (0.5, 2.0)
    for t in (0.5, 1.0, 1.7, 2.0):
        assert inner(t) == pytest.approx(target(t))

    discrete = TargetFunction.sampled([(0, 0), (1, 2)], Support.SAMPLES)
    with pytest.raises(TargetError):
        discrete.restrict(0.0, 0.5)
