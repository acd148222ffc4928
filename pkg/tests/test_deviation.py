import itertools
import math

import numpy as np
import pytest

from factories import abs_model, linear_model, random_model
from fkcheb.deviation import (
    DeviationProfile,
    ExtremePoint,
    Location,
    ProfileError,
    Stability,
    alternation_sequence,
    deviation_profile,
    stability_of,
)
from fkcheb.problem import ProblemSpec
from fkcheb.targets import ExpressionPiece, TargetFunction


def square_target() -> TargetFunction:
    return TargetFunction.from_pieces([ExpressionPiece.build(0, 1, "monomial", {"power": 2})])


def test_samples_support_reproduces_seven_alternating_extremes(
    example1: ProblemSpec, example1_profile: DeviationProfile
) -> None:
    profile = example1_profile

    assert profile.psi == pytest.approx(1.0, abs=1e-9)
    assert [extreme.t for extreme in profile.extremes] == [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]
    assert profile.signs == [1, -1, 1, -1, 1, -1, 1]

    at_knot = profile.extremes[3]
    assert at_knot.location is Location.NEUTRAL_KNOT
    assert at_knot.knot_index == 1
    assert at_knot.stability is Stability.NOT_APPLICABLE

    count, sequence = alternation_sequence(profile, 0, 2)
    assert count == 7
    assert [extreme.t for extreme in sequence] == [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]


def test_best_line_for_a_parabola_equioscillates_three_times() -> None:
    profile = deviation_profile(linear_model(0.0, 1.0, -0.125, 1.0), square_target())

    assert profile.psi == pytest.approx(0.125, abs=1e-12)
    np.testing.assert_allclose([extreme.t for extreme in profile.extremes], [0.0, 0.5, 1.0], atol=1e-6)
    assert profile.signs == [-1, 1, -1]
    assert all(extreme.location is Location.SMOOTH for extreme in profile.extremes)


def test_constant_half_against_sine() -> None:
    target = TargetFunction.from_pieces([ExpressionPiece.build(0, "pi", "sin")])

    profile = deviation_profile(linear_model(0.0, math.pi, 0.5, 0.0), target)

    assert profile.psi == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose([extreme.t for extreme in profile.extremes], [0.0, math.pi / 2, math.pi], atol=1e-6)
    assert profile.signs == [1, -1, 1]


def test_knot_extremes_carry_stability() -> None:
    assert stability_of(Location.MAX_KNOT, 1) is Stability.STABLE
    assert stability_of(Location.MAX_KNOT, -1) is Stability.UNSTABLE
    assert stability_of(Location.MIN_KNOT, 1) is Stability.UNSTABLE
    assert stability_of(Location.MIN_KNOT, -1) is Stability.STABLE
    assert stability_of(Location.SMOOTH, -1) is Stability.NOT_APPLICABLE

    target = TargetFunction.sampled([(-1, 1), (0, 1), (1, 1)], "samples")
    profile = deviation_profile(abs_model(), target)

    assert len(profile.extremes) == 1
    extreme = profile.extremes[0]
    assert (extreme.t, extreme.sign) == (0.0, -1)
    assert extreme.location is Location.MAX_KNOT
    assert extreme.is_unstable


def test_perfect_fit_gives_a_degenerate_profile() -> None:
    target = TargetFunction.from_pieces(
        [ExpressionPiece.build(0, 1, "polynomial", {"coefficients": [-0.125, 1.0]})]
    )

    profile = deviation_profile(linear_model(0.0, 1.0, -0.125, 1.0), target)

    assert profile.degenerate
    assert profile.psi <= 1e-12
    assert [extreme.t for extreme in profile.extremes] == [0.0, 1.0]


def test_profile_input_checks() -> None:
    model = linear_model(0.0, 1.0, 0.0, 1.0)

    with pytest.raises(ProfileError, match="below the minimum"):
        deviation_profile(model, square_target(), grid_n=5)
    with pytest.raises(ProfileError, match="differs"):
        deviation_profile(linear_model(0.0, 2.0, 0.0, 1.0), square_target())
    with pytest.raises(ProfileError):
        deviation_profile(model, square_target(), tol_extreme=0.0)


def test_tolerance_band_admits_near_extremes() -> None:
    target = TargetFunction.sampled([(0, 0), (0.5, 1.0), (1, 0.999)], "samples")
    model = linear_model(0.0, 1.0, 0.0, 0.0)

    assert len(deviation_profile(model, target).extremes) == 1
    assert len(deviation_profile(model, target, tol_extreme=1e-2).extremes) == 2


def test_endpoint_rule_drops_unstable_extremes_on_interval_ends() -> None:
    extremes = (
        ExtremePoint(0.0, 1, Location.SMOOTH, Stability.NOT_APPLICABLE, deviation=1.0),
        ExtremePoint(0.5, -1, Location.SMOOTH, Stability.NOT_APPLICABLE, deviation=-1.0),
        ExtremePoint(1.0, 1, Location.MIN_KNOT, Stability.UNSTABLE, knot_index=1, deviation=1.0),
        ExtremePoint(1.5, -1, Location.SMOOTH, Stability.NOT_APPLICABLE, deviation=-1.0),
    )
    profile = DeviationProfile(1.0, extremes, 100, 1e-8, (0.0, 1.0, 2.0))

    assert alternation_sequence(profile, 0, 1)[0] == 3
    assert alternation_sequence(profile, 0, 1, endpoint_rule=True)[0] == 2
    assert alternation_sequence(profile, 0, 2, endpoint_rule=True)[0] == 4
    with pytest.raises(ProfileError):
        alternation_sequence(profile, 1, 1)


def test_equal_sign_runs_keep_the_largest_deviation() -> None:
    extremes = (
        ExtremePoint(0.0, 1, Location.SMOOTH, Stability.NOT_APPLICABLE, deviation=0.99),
        ExtremePoint(0.2, 1, Location.SMOOTH, Stability.NOT_APPLICABLE, deviation=1.0),
        ExtremePoint(0.6, -1, Location.SMOOTH, Stability.NOT_APPLICABLE, deviation=-1.0),
    )
    profile = DeviationProfile(1.0, extremes, 100, 1e-2, (0.0, 1.0))

    count, sequence = alternation_sequence(profile, 0, 1)

    assert count == 2
    assert [extreme.t for extreme in sequence] == [0.2, 0.6]


@pytest.mark.parametrize("grid_n", [200, 400, 1000])
def test_refining_the_grid_never_loses_the_maximum(rng: np.random.Generator, grid_n: int) -> None:
    target = TargetFunction.from_pieces([ExpressionPiece.build(0, 2, "sin", {"frequency": 9.0, "phase": 0.3})])
    for degree in (1, 2, 3):
        model = random_model(rng, degree, 3, 0.0, 2.0)

        coarse = deviation_profile(model, target, grid_n)
        fine = deviation_profile(model, target, 2 * grid_n)

        assert fine.psi >= coarse.psi - 1e-9


def brute_force_alternation(extremes: list) -> int:
    for size in range(len(extremes), 0, -1):
        for chosen in itertools.combinations(extremes, size):
            if all(left.sign != right.sign for left, right in zip(chosen, chosen[1:])):
                return size
    return 0


def test_alternation_sequence_is_as_long_as_any_subsequence(rng: np.random.Generator) -> None:
    for _ in range(40):
        count = int(rng.integers(1, 13))
        ts = np.sort(rng.uniform(0.05, 0.95, count))
        extremes = tuple(
            ExtremePoint(float(t), sign, Location.SMOOTH, Stability.NOT_APPLICABLE, deviation=sign * float(rng.uniform(0.99, 1.0)))
            for t, sign in zip(ts, rng.choice([-1, 1], size=count).tolist())
        )
        profile = DeviationProfile(1.0, extremes, 100, 1e-2, (0.0, 1.0))

        found, sequence = alternation_sequence(profile, 0, 1)

        assert found == len(sequence) == brute_force_alternation(list(extremes))
        assert all(left.sign != right.sign for left, right in zip(sequence, sequence[1:]))
        assert [extreme.t for extreme in sequence] == sorted(extreme.t for extreme in sequence)
        assert set(sequence) <= set(extremes)
