import numpy as np
import pytest
from roughsk.core.models import builtin_model, list_models
from roughsk.core.sde import SamplePath
from roughsk.harness.config import DtRule, ExperimentConfig


def random_stable(rng: np.random.Generator, d: int) -> np.ndarray:
    """Matrix whose symmetric part is >= 1/2."""
    a = rng.normal(size=(d, d))
    s = rng.normal(size=(d, d))
    return a @ a.T + 0.5 * np.eye(d) + (s - s.T)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(params=list_models())
def registry_model(request):
    return builtin_model(request.param)


@pytest.fixture
def stable_corpus(rng) -> list[np.ndarray]:
    return [random_stable(rng, int(d)) for d in rng.integers(1, 6, size=1000)]


@pytest.fixture
def random_walk(rng):
    def make(n: int = 64, d: int = 2, dt: float = 1.0 / 64) -> SamplePath:
        steps = np.sqrt(dt) * rng.normal(size=(n, d))
        values = np.vstack([np.zeros((1, d)), np.cumsum(steps, axis=0)])
        return SamplePath(0.0, dt, values)

    return make


@pytest.fixture
def tiny_config(tmp_path) -> ExperimentConfig:
    return ExperimentConfig(
        model_name="const_iso",
        epsilons=[0.5, 0.25],
        fine_dt_rule=DtRule(c=0.05),
        coarsen=4,
        n_paths=4,
        batch_size=2,
        seed=11,
        outputs=tmp_path / "out",
    )
