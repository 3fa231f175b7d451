import numpy as np
import pytest

from t2meval.embed import (
    EmbeddingProvider,
    GaussianStats,
    compose_batches,
    fid,
    gaussian_stats,
    load_embeddings,
    multimodal_distance,
    r_precision,
    r_precision_per_sample,
    save_embeddings,
    train_coembedding,
)
from t2meval.errors import ConfigError, DataError, FormatError, NumericalError, TrainingError
from t2meval.motion import MotionFeatures
from t2meval import synthetic, motion


def scalar_fid(mu1, var1, mu2, var2):
    return (mu1 - mu2) ** 2 + var1 + var2 - 2 * np.sqrt(var1 * var2)


class TestGaussianStats:
    def test_hand_covariance(self):
        stats = gaussian_stats(np.array([[0.0, 0.0], [2.0, 0.0]]))
        np.testing.assert_array_equal(stats.mean, [1.0, 0.0])
        np.testing.assert_array_equal(stats.cov, [[2.0, 0.0], [0.0, 0.0]])
        assert stats.n == 2

    def test_identical_samples_zero_cov(self):
        stats = gaussian_stats(np.ones((5, 3)))
        np.testing.assert_array_equal(stats.cov, np.zeros((3, 3)))

    def test_large_sample_recovers_truth(self):
        rng = np.random.default_rng(0)
        truth = np.array([1.0, 4.0, 0.25])
        samples = rng.normal(size=(10000, 3)) * np.sqrt(truth)
        stats = gaussian_stats(samples)
        np.testing.assert_allclose(np.diag(stats.cov), truth, rtol=0.05)
        off = stats.cov - np.diag(np.diag(stats.cov))
        assert np.abs(off).max() < 0.05 * truth.max()

    def test_needs_two_samples(self):
        with pytest.raises(DataError):
            gaussian_stats(np.ones((1, 3)))


class TestFid:
    def test_identical_distributions(self, rng):
        x = rng.normal(size=(200, 4))
        stats = gaussian_stats(x)
        assert abs(fid(stats, stats)) < 1e-8

    def test_scalar_closed_form(self):
        a = GaussianStats(mean=np.array([0.0]), cov=np.array([[1.0]]), n=10)
        b = GaussianStats(mean=np.array([1.0]), cov=np.array([[4.0]]), n=10)
        assert fid(a, b) == pytest.approx(2.0, abs=1e-12)
        assert fid(a, b) == pytest.approx(scalar_fid(0, 1, 1, 4), abs=1e-12)

    def test_diagonal_decomposes_per_axis(self):
        mu1 = np.array([0.0, 1.0, -2.0])
        mu2 = np.array([0.5, 0.0, 1.0])
        v1 = np.array([1.0, 2.0, 0.5])
        v2 = np.array([2.0, 1.0, 3.0])
        a = GaussianStats(mean=mu1, cov=np.diag(v1), n=10)
        b = GaussianStats(mean=mu2, cov=np.diag(v2), n=10)
        want = sum(scalar_fid(mu1[i], v1[i], mu2[i], v2[i]) for i in range(3))
        assert fid(a, b) == pytest.approx(want, abs=1e-10)

    def test_symmetry(self, rng):
        x = rng.normal(size=(300, 5))
        y = rng.normal(size=(300, 5)) @ np.diag([1.0, 2.0, 0.5, 1.5, 1.0]) + 0.3
        a, b = gaussian_stats(x), gaussian_stats(y)
        assert fid(a, b) == pytest.approx(fid(b, a), abs=1e-8)

    def test_rotation_invariance(self, rng):
        x = rng.normal(size=(400, 4)) * np.array([1.0, 2.0, 0.5, 1.0])
        y = rng.normal(size=(400, 4)) + 0.7
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        base = fid(gaussian_stats(x), gaussian_stats(y))
        rotated = fid(gaussian_stats(x @ q.T), gaussian_stats(y @ q.T))
        assert rotated == pytest.approx(base, abs=1e-6)

    def test_non_psd_rejected(self):
        bad = GaussianStats(mean=np.zeros(2), cov=np.array([[1.0, 0.0], [0.0, -1.0]]), n=5)
        ok = GaussianStats(mean=np.zeros(2), cov=np.eye(2), n=5)
        with pytest.raises(NumericalError):
            fid(bad, ok)

    def test_linear_mean_reading(self):
        a = GaussianStats(mean=np.array([0.0]), cov=np.array([[1.0]]), n=10)
        b = GaussianStats(mean=np.array([3.0]), cov=np.array([[1.0]]), n=10)
        assert fid(a, b, mu_norm="squared") == pytest.approx(9.0, abs=1e-12)
        assert fid(a, b, mu_norm="linear") == pytest.approx(3.0, abs=1e-12)
        with pytest.raises(ConfigError):
            fid(a, b, mu_norm="manhattan")


class TestRPrecision:
    def test_perfect_coembedding(self):
        embs = np.eye(32)
        hits, mean = r_precision(embs, embs, allowance=1)
        assert mean == 1.0
        assert set(hits.tolist()) == {1}

    def test_max_allowance_covers_all_but_last_rank(self):
        # hit convention is rank < k, so k=31 admits every rank but the
        # dead-last one; with full ties ranks equal the batch index
        m = np.zeros((32, 3))
        t = np.zeros((32, 3))
        _, mean = r_precision(m, t, allowance=31)
        assert mean == 31 / 32

    def test_monotone_in_allowance(self, rng):
        m = rng.normal(size=(32, 6))
        t = rng.normal(size=(32, 6))
        means = [r_precision(m, t, allowance=k)[1] for k in range(1, 32)]
        assert all(b >= a for a, b in zip(means, means[1:]))

    def test_ties_break_by_batch_index(self):
        # all texts identical: every distance ties, rank of truth = index
        m = np.zeros((32, 3))
        t = np.zeros((32, 3))
        for k in (1, 5, 20):
            hits, mean = r_precision(m, t, allowance=k)
            np.testing.assert_array_equal(hits, (np.arange(32) < k).astype(int))
            assert mean == k / 32

    def test_hits_are_binary(self, rng):
        hits, _ = r_precision(rng.normal(size=(32, 4)), rng.normal(size=(32, 4)), 3)
        assert set(np.unique(hits)) <= {0, 1}

    def test_batch_size_enforced(self, rng):
        with pytest.raises(DataError):
            r_precision(rng.normal(size=(16, 4)), rng.normal(size=(16, 4)), 1)
        hits, _ = r_precision(rng.normal(size=(16, 4)), rng.normal(size=(16, 4)), 1,
                              batch_size=16)
        assert len(hits) == 16

    def test_allowance_bounds(self, rng):
        m = rng.normal(size=(32, 4))
        with pytest.raises(ConfigError):
            r_precision(m, m, allowance=0)
        with pytest.raises(ConfigError):
            r_precision(m, m, allowance=32)

    def test_random_embeddings_match_expectation(self):
        rng = np.random.default_rng(11)
        means = []
        for _ in range(200):
            m = rng.normal(size=(32, 8))
            t = rng.normal(size=(32, 8))
            means.append(r_precision(m, t, allowance=2)[1])
        mean = np.mean(means)
        se = np.std(means, ddof=1) / np.sqrt(len(means))
        assert abs(mean - 2 / 32) < 3 * se

    def test_per_sample_batches_seeded(self, rng):
        m = rng.normal(size=(50, 4))
        t = rng.normal(size=(50, 4))
        a = r_precision_per_sample(m, t, allowance=3, seed=5)
        b = r_precision_per_sample(m, t, allowance=3, seed=5)
        np.testing.assert_array_equal(a, b)
        batches = compose_batches(50, seed=5)
        assert all(len(set(b.tolist())) == 32 for b in batches)
        assert all(b[0] == i for i, b in enumerate(batches))


class _PairProvider(EmbeddingProvider):
    def __init__(self, mapping):
        self.mapping = mapping

    @property
    def dim(self):
        return 2

    def embed_motion(self, features):
        return np.asarray(self.mapping["motion"], dtype=np.float64)

    def embed_text(self, text):
        return np.asarray(self.mapping["text"], dtype=np.float64)


class TestMultimodalDistance:
    def test_identical_embeddings(self):
        provider = _PairProvider({"motion": [1.0, 2.0], "text": [1.0, 2.0]})
        f = MotionFeatures(values=np.zeros((3, 263)))
        assert multimodal_distance(f, "x", provider) == 0.0

    def test_three_four_five(self):
        provider = _PairProvider({"motion": [0.0, 0.0], "text": [3.0, 4.0]})
        f = MotionFeatures(values=np.zeros((3, 263)))
        assert multimodal_distance(f, "x", provider) == pytest.approx(5.0, abs=1e-12)

    def test_symmetric_under_swap(self):
        fwd = _PairProvider({"motion": [1.0, -2.0], "text": [0.5, 3.0]})
        rev = _PairProvider({"motion": [0.5, 3.0], "text": [1.0, -2.0]})
        f = MotionFeatures(values=np.zeros((3, 263)))
        assert multimodal_distance(f, "x", fwd) == multimodal_distance(f, "x", rev)


class TestEmbeddingFiles:
    def test_binary_roundtrip(self, tmp_path, rng):
        arr = rng.normal(size=(12, 5)).astype(np.float32).astype(np.float64)
        save_embeddings(tmp_path / "m.f32", arr, "motion")
        loaded = load_embeddings(tmp_path / "m.f32")
        np.testing.assert_allclose(loaded, arr, atol=1e-6)

    def test_csv_roundtrip(self, tmp_path, rng):
        arr = rng.normal(size=(7, 3))
        save_embeddings(tmp_path / "t.csv", arr, "text")
        loaded = load_embeddings(tmp_path / "t.csv")
        np.testing.assert_allclose(loaded, arr, atol=1e-12)

    def test_manifest_mismatch(self, tmp_path, rng):
        arr = rng.normal(size=(7, 3))
        save_embeddings(tmp_path / "t.f32", arr, "text")
        (tmp_path / "t.json").write_text('{"dim": 4, "count": 7, "modality": "text"}')
        with pytest.raises(FormatError):
            load_embeddings(tmp_path / "t.f32")

    def test_missing_manifest_field(self, tmp_path, rng):
        arr = rng.normal(size=(4, 2))
        save_embeddings(tmp_path / "t.f32", arr, "text")
        (tmp_path / "t.json").write_text('{"dim": 2, "count": 4}')
        with pytest.raises(FormatError, match="modality"):
            load_embeddings(tmp_path / "t.f32")


def direction_corpus(n=96, seed=0):
    task = synthetic.make_direction_task(n, seed=seed)
    return [(motion.extract_features(m), t) for m, t, _ in task]


class TestToyCoembedding:
    def test_reaches_retrieval_gate(self):
        corpus = direction_corpus(n=96, seed=3)
        provider = train_coembedding(corpus, seed=1)
        held = direction_corpus(n=32, seed=99)
        m = np.stack([provider.embed_motion(f) for f, _ in held])
        t = np.stack([provider.embed_text(s) for _, s in held])
        _, precision = r_precision(m, t, allowance=1)
        # 8 distinct texts in a batch of 32: ties broken by index still
        # retrieve a same-class text; count class hits instead
        d2 = ((m[:, None, :] - t[None, :, :]) ** 2).sum(axis=2)
        nearest = d2.argmin(axis=1)
        same_text = np.array([held[i][1] == held[j][1] for i, j in enumerate(nearest)])
        assert same_text.mean() >= 0.8

    def test_deterministic_embeddings(self):
        corpus = direction_corpus(n=64, seed=5)
        provider = train_coembedding(corpus, dim=8, seed=2)
        f, s = corpus[0]
        np.testing.assert_array_equal(provider.embed_motion(f), provider.embed_motion(f))
        np.testing.assert_array_equal(provider.embed_text(s), provider.embed_text(s))

    def test_dims_match(self):
        corpus = direction_corpus(n=64, seed=5)
        provider = train_coembedding(corpus, dim=6, seed=2)
        assert provider.dim == 6
        assert provider.embed_motion(corpus[0][0]).shape == (6,)
        assert provider.embed_text("a person walks north").shape == (6,)

    def test_too_few_pairs(self):
        with pytest.raises(DataError):
            train_coembedding(direction_corpus(n=10, seed=0))

    def test_unreachable_target_raises(self):
        corpus = direction_corpus(n=64, seed=5)
        with pytest.raises(TrainingError):
            train_coembedding(corpus, dim=4, seed=0, iters=1, target_fraction=1.01)
