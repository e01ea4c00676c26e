import numpy as np
import pytest

from exprensemble.core import NUM_CLASSES, Dataset, PredictionMatrix
from exprensemble.pipeline import RunConfig, run_pipeline
from exprensemble.synthetic import SyntheticSpec, generate_synthetic


def random_matrix(rng, n, source_id="src", concentration=1.0, frame_prefix="f"):
    probs = rng.dirichlet(np.full(NUM_CLASSES, concentration), size=n)
    return PredictionMatrix(
        source_id,
        [f"{frame_prefix}{i:05d}" for i in range(n)],
        [f"v{i // 10}" for i in range(n)],
        probs,
    )


def blob_dataset(seed=0, n_per_class=100, spread=0.7):
    """Three separable 2-D Gaussian blobs, labels 0..2."""
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 4.0], [-3.5, -2.0], [3.5, -2.0]])
    y = np.repeat(np.arange(3), n_per_class)
    x = centers[y] + rng.normal(0.0, spread, size=(len(y), 2))
    n = len(y)
    return Dataset([f"b{i:04d}" for i in range(n)], [f"bv{i:04d}" for i in range(n)], x, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def seed42():
    return generate_synthetic(SyntheticSpec(seed=42))


@pytest.fixture(scope="session")
def pipeline_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipeline") / "run"
    return run_pipeline(RunConfig(output_dir=str(out), seed=42)), out


# One line per acceptance criterion, printed at the end of the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
