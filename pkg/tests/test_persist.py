"""Round-trip and integrity contracts for every persisted artifact."""

import numpy as np
import pytest

from acton.embedding import TrainConfig, train_embeddings
from acton.exceptions import (
    DigestMismatch,
    DimensionMismatch,
    HeaderMismatch,
    TruncatedFile,
    VersionMismatch,
)
from acton.ingest import parse_activity_csv, parse_labels_csv
from acton.models import ConvNetClassifier, MultiTaskConvNet
from acton.persist import (
    load_checkpoint,
    load_embeddings,
    save_checkpoint,
    save_embeddings,
    write_activity_csv,
    write_labels_csv,
)
from acton.synthgen import SynthConfig, generate_cohort

from conftest import dataset_from_raw


@pytest.fixture(scope="module")
def trained_space():
    rng = np.random.default_rng(2)
    raw = {f"s{i}": rng.integers(0, 9, 40) for i in range(3)}
    raw["s0"][5] = -1                       # one missing entry
    ds = dataset_from_raw(raw, sampling_period_s=8640)
    cfg = TrainConfig(granularity="day", dim=5, window=4, epochs=2, seed=1,
                      convergence_tol=0.0)
    space, _ = train_embeddings(ds, cfg)
    return ds, space


class TestEmbeddingsFile:
    def test_round_trip_is_bit_exact(self, trained_space, tmp_path):
        ds, space = trained_space
        path = str(tmp_path / "emb.txt")
        save_embeddings(path, space, ds.vocab)
        loaded, vocab = load_embeddings(path)
        assert np.array_equal(loaded.segment_vectors, space.segment_vectors)
        assert np.array_equal(loaded.segment_out_weights, space.segment_out_weights)
        assert np.array_equal(loaded.symbol_out_weights, space.symbol_out_weights)
        assert np.array_equal(loaded.symbol_counts, space.symbol_counts)
        assert loaded.subject_index == space.subject_index
        assert loaded.granularity == space.granularity
        assert vocab.raw_values.tolist() == ds.vocab.raw_values.tolist()
        assert vocab.counts.tolist() == ds.vocab.counts.tolist()

    def test_sample_granularity_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        ds = dataset_from_raw({"a": rng.integers(0, 6, 30)})
        cfg = TrainConfig(granularity="sample", dim=4, window=3, epochs=1, seed=0)
        space, _ = train_embeddings(ds, cfg)
        path = str(tmp_path / "emb.txt")
        save_embeddings(path, space, ds.vocab)
        loaded, _ = load_embeddings(path)
        assert np.array_equal(loaded.symbol_vectors, space.symbol_vectors)
        assert len(loaded.segment_vectors) == 0

    def test_save_and_reload_after_reload(self, trained_space, tmp_path):
        ds, space = trained_space
        p1, p2 = str(tmp_path / "a.txt"), str(tmp_path / "b.txt")
        save_embeddings(p1, space, ds.vocab)
        loaded, vocab = load_embeddings(p1)
        save_embeddings(p2, loaded, vocab)
        assert open(p1).read() == open(p2).read()

    def test_truncated_table_detected(self, trained_space, tmp_path):
        import hashlib

        ds, space = trained_space
        path = str(tmp_path / "emb.txt")
        save_embeddings(path, space, ds.vocab)
        lines = open(path).read().splitlines()[:-1]   # strip digest line
        del lines[3]                                  # drop a vector row
        body = "\n".join(lines) + "\n"
        digest = hashlib.sha256(body.encode()).hexdigest()
        (tmp_path / "cut.txt").write_text(body + f"# sha256 {digest}\n")
        with pytest.raises((TruncatedFile, HeaderMismatch)):
            load_embeddings(str(tmp_path / "cut.txt"))

    def test_dim_mismatch_for_consumer(self, trained_space, tmp_path):
        ds, space = trained_space
        path = str(tmp_path / "emb.txt")
        save_embeddings(path, space, ds.vocab)
        with pytest.raises(DimensionMismatch):
            load_embeddings(path, expect_dim=64)

    def test_corruption_fails_digest(self, trained_space, tmp_path):
        ds, space = trained_space
        path = str(tmp_path / "emb.txt")
        save_embeddings(path, space, ds.vocab)
        text = open(path).read().replace("0.", "1.", 1)
        (tmp_path / "bad.txt").write_text(text)
        with pytest.raises(DigestMismatch):
            load_embeddings(str(tmp_path / "bad.txt"))


def _toy_training_set(seed=4, n=10):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 6, size=(n, 12)).astype(np.int32)
    y = rng.integers(0, 2, n)
    return x, y


def _cnn(epochs, seed=7):
    return ConvNetClassifier(task="apnea", embedding_dim=4, depth=1, n_filters=4,
                             kernel=3, pool=2, dense_units=8, dropout=0.5,
                             lambda1=0.1, lambda2=0.1, lr=0.01, batch_size=4,
                             epochs=epochs, seed=seed, vocab_size=6)


class TestCheckpoints:
    def test_round_trip_parameters(self, tmp_path):
        x, y = _toy_training_set()
        model = _cnn(epochs=3).fit(x, y)
        path = str(tmp_path / "model.npz")
        save_checkpoint(path, model)
        loaded = load_checkpoint(path)
        for name, arr in model.core_.params().items():
            assert np.array_equal(arr, loaded.core_.params()[name]), name
        assert np.array_equal(model.predict_proba(x), loaded.predict_proba(x))

    def test_resume_equivalence_bit_exact(self, tmp_path):
        x, y = _toy_training_set()
        straight = _cnn(epochs=10).fit(x, y)

        half = _cnn(epochs=5).fit(x, y)
        path = str(tmp_path / "half.npz")
        save_checkpoint(path, half)
        resumed = load_checkpoint(path)
        resumed.train_more(x, y, epochs=5)

        for name, arr in straight.core_.params().items():
            assert np.array_equal(arr, resumed.core_.params()[name]), name
        for name, arr in straight.core_.encoder.running_stats().items():
            assert np.array_equal(arr, resumed.core_.encoder.running_stats()[name])
        assert straight.core_.loss_trace == pytest.approx(resumed.core_.loss_trace,
                                                          abs=0.0)

    def test_multitask_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        x = rng.integers(0, 6, size=(8, 12)).astype(np.int32)
        labels = {"apnea": rng.integers(0, 2, 8),
                  "diabetes": rng.integers(0, 3, 8),
                  "hypertension": np.full(8, -1),
                  "insomnia": rng.integers(0, 3, 8)}
        model = MultiTaskConvNet(embedding_dim=4, depth=1, n_filters=4, kernel=3,
                                 pool=2, dense_units=8, dropout=0.0, lr=0.01,
                                 batch_size=4, epochs=2, seed=1,
                                 vocab_size=6).fit(x, labels)
        path = str(tmp_path / "multi.npz")
        save_checkpoint(path, model)
        loaded = load_checkpoint(path)
        preds_a, preds_b = model.predict(x), loaded.predict(x)
        for task in preds_a:
            assert np.array_equal(preds_a[task], preds_b[task])

    def test_corrupted_blob_detected(self, tmp_path):
        x, y = _toy_training_set()
        model = _cnn(epochs=1).fit(x, y)
        path = str(tmp_path / "model.npz")
        save_checkpoint(path, model)
        blob = bytearray(open(path, "rb").read())
        blob[len(blob) // 2] ^= 0xFF
        bad = tmp_path / "bad.npz"
        bad.write_bytes(bytes(blob))
        with pytest.raises((DigestMismatch, Exception)):
            load_checkpoint(str(bad))

    def test_version_mismatch(self, tmp_path):
        import io, json

        x, y = _toy_training_set()
        model = _cnn(epochs=1).fit(x, y)
        path = str(tmp_path / "model.npz")
        save_checkpoint(path, model)
        with np.load(path) as blob:
            arrays = {k: blob[k] for k in blob.files}
        meta = json.loads(arrays.pop("meta").tobytes().decode())
        meta["version"] = 99
        buf = io.BytesIO()
        np.savez(buf, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
                 **arrays)
        (tmp_path / "v99.npz").write_bytes(buf.getvalue())
        with pytest.raises(VersionMismatch):
            load_checkpoint(str(tmp_path / "v99.npz"))


class TestDatasetCsv:
    def test_activity_and_labels_round_trip(self, tmp_path):
        cfg = SynthConfig(n_subjects=4, days=1, sampling_period_s=600, seed=9,
                          missing_rate=0.05)
        ds = generate_cohort(cfg)
        apath, lpath = str(tmp_path / "a.csv"), str(tmp_path / "l.csv")
        write_activity_csv(ds, apath)
        write_labels_csv(ds.labels, lpath)

        again = parse_activity_csv(open(apath).read(), source=apath)
        labels = parse_labels_csv(open(lpath).read())
        assert again.subject_ids == ds.subject_ids
        for a, b in zip(ds.sequences, again.sequences):
            assert np.array_equal(a.symbols, b.symbols)
        assert labels == ds.labels
