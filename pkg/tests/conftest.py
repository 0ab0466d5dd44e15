import numpy as np
import pytest

from acton.core import ActivitySequence, Vocabulary
from acton.ingest import Dataset


def dataset_from_raw(raw_by_subject: dict, sampling_period_s: int = 30) -> Dataset:
    """Build an encoded Dataset straight from raw count arrays (-1 = missing)."""
    from acton.ingest import _vocab_from_raw

    arrays = {sid: np.asarray(v, dtype=np.int64) for sid, v in raw_by_subject.items()}
    vocab = _vocab_from_raw(arrays.values())
    sequences = tuple(
        ActivitySequence(sid, vocab.encode_array(v), sampling_period_s)
        for sid, v in arrays.items()
    )
    return Dataset(sequences, vocab)


@pytest.fixture
def rng():
    return np.random.default_rng(11)


@pytest.fixture
def tiny_dataset(rng):
    """4 subjects, 40 samples each; 'day' granularity = 10 samples at 8640s."""
    raw = {f"s{i}": rng.integers(0, 12, 40) for i in range(4)}
    return dataset_from_raw(raw, sampling_period_s=8640)
