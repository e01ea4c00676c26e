import numpy as np
import pytest

from exprensemble.core import ValidationError, validate_prediction_matrix
from exprensemble.synthetic import SyntheticSpec, generate_synthetic, write_synthetic


def test_byte_identical(tmp_path):
    spec = SyntheticSpec(videos=8, eval_videos=2, seed=3)
    a = write_synthetic(spec, tmp_path / "a")
    b = write_synthetic(spec, tmp_path / "b")
    assert a.keys() == b.keys()
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()


def test_class_frequencies_match_priors():
    spec = SyntheticSpec(videos=1000, eval_videos=0, frames_per_video=(10, 20), seed=7)
    data = generate_synthetic(spec)
    assert len(data.pool) >= 10_000
    # counted independently of the generator
    counts = {}
    for y in data.pool.labels.tolist():
        counts[y] = counts.get(y, 0) + 1
    freq = np.array([counts.get(c, 0) for c in range(8)]) / len(data.pool)
    assert np.abs(freq - np.array(spec.class_priors)).max() <= 0.03


def test_prediction_rows_valid(seed42):
    for src in seed42.sources:
        assert validate_prediction_matrix(src) is src
        assert len(src) == len(seed42.pool) + len(seed42.evaluation)


def test_sources_are_heterogeneous(seed42):
    y = np.concatenate([seed42.pool.labels, seed42.evaluation.labels])
    recalls = np.array([[np.mean(s.labels()[y == c] == c) for c in range(8)] for s in seed42.sources])
    # each class has a best source that differs across classes
    assert len(set(np.argmax(recalls, axis=0).tolist())) == 3


def test_benchmark_size(seed42):
    assert len(set(seed42.pool.video_ids)) == 50
    assert 4000 <= len(seed42.pool) <= 6000


@pytest.mark.parametrize(
    "kw",
    [{"class_priors": (0.5,) * 8}, {"class_priors": (1.0,) + (0.0,) * 6}, {"source_noise": ((-1.0,) * 8,)}],
)
def test_invalid_spec(kw):
    with pytest.raises(ValidationError):
        SyntheticSpec(**kw)


def test_spec_dict_round_trip():
    spec = SyntheticSpec(videos=7, seed=1)
    assert SyntheticSpec.from_dict(spec.to_dict()) == spec
