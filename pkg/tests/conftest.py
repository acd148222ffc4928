from pathlib import Path

import numpy as np
import pytest

from fkcheb.deviation import DeviationProfile, deviation_profile
from fkcheb.problem import ProblemSpec, bundled_problem, load_problem


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def example1() -> ProblemSpec:
    return load_problem(bundled_problem("example1"))


@pytest.fixture
def counterexample() -> ProblemSpec:
    return load_problem(bundled_problem("counterexample"))


@pytest.fixture
def example1_profile(example1: ProblemSpec) -> DeviationProfile:
    assert example1.initial_model is not None
    return deviation_profile(example1.initial_model, example1.target)


@pytest.fixture
def out_dir(tmp_path: Path) -> Path:
    return tmp_path / "out"
