import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from childbot.activity import (
    Codebook,
    DimMismatch,
    InsufficientData,
    LengthMismatch,
    LoocvConfig,
    NonpositiveNormalizer,
    OneVsAllSVM,
    TooFewDescriptors,
    UntrainedModel,
    chi2_distance,
    chi2_kernel_matrix,
    chi2_multiview_kernel,
    chi2_normalizers,
    classify_one_vs_all,
    encode_bovw,
    encode_vlad,
    fuse_scores,
    kmeans,
    load_descriptors,
    run_loocv,
    save_descriptors,
    synthetic_corpus,
    train_codebook,
)
from childbot.activity.data import DescriptorSet, Video

# k-means

def test_exact_fit():
    x = np.random.default_rng(0).normal(size=(5, 3))
    res = kmeans(x, 5, seed=1)
    assert res.objective[-1] == 0.0
    assert sorted(map(tuple, res.centroids)) == sorted(map(tuple, x))


def test_two_blobs():
    rng = np.random.default_rng(1)
    n, sigma = 200, 0.5
    a = rng.normal((0, 0), sigma, size=(n, 2))
    b = rng.normal((10, 10), sigma, size=(n, 2))
    cent = kmeans(np.vstack([a, b]), 2, seed=0).centroids
    cent = cent[np.argsort(cent[:, 0])]
    tol = 3 * sigma / np.sqrt(n)
    assert np.all(np.abs(cent[0]) < tol)
    assert np.all(np.abs(cent[1] - 10) < tol)


def test_objective_monotone_over_seeds():
    x = np.random.default_rng(2).normal(size=(300, 4))
    for seed in range(50):
        obj = kmeans(x, 8, seed=seed).objective
        assert all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(obj, obj[1:]))


def test_objective_matches_direct_cost():
    x = np.random.default_rng(3).normal(size=(200, 3))
    res = kmeans(x, 6, seed=0)
    d2 = ((x[:, None, :] - res.centroids[None]) ** 2).sum(axis=2)
    assert res.objective[-1] == pytest.approx(d2.min(axis=1).sum())
    assert res.converged or res.iterations == 100


def test_too_few():
    with pytest.raises(TooFewDescriptors):
        kmeans(np.zeros((3, 2)), 4)
    with pytest.raises(TooFewDescriptors):
        train_codebook([[np.zeros((10, 2))]], 4)


def test_shared_book_pools_sensors():
    rng = np.random.default_rng(4)
    s0 = [rng.normal(0, 0.1, (30, 2))]
    s1 = [rng.normal(5, 0.1, (30, 2))]
    book = train_codebook([s0, s1], 2, "shared")
    c = np.sort(book.book()[:, 0])
    assert c[0] == pytest.approx(0, abs=0.1) and c[1] == pytest.approx(5, abs=0.1)
    per = train_codebook([s0 + s0, s1 + s1], 2, "per-sensor")
    assert len(per.books) == 2 and per.book(1).mean() > 4


# BoVW

EYE_BOOK = Codebook((np.eye(4) * 10,), "shared")


def test_bovw_one_hot():
    rep = encode_bovw(np.array([[0, 9.0, 0, 0]]), EYE_BOOK)
    assert rep.raw.tolist() == [0, 1, 0, 0]
    assert np.linalg.norm(rep.values) == pytest.approx(1.0)


def test_bovw_sum_pooling_over_sensors():
    s1 = np.array([[10.0, 0, 0, 0]])
    s2 = np.array([[0, 0, 10.0, 0]])
    rep = encode_bovw([s1, s2], EYE_BOOK, multiview=True)
    assert rep.raw.tolist() == [1, 0, 1, 0]


def test_bovw_empty_is_degenerate():
    rep = encode_bovw(np.zeros((0, 4)), EYE_BOOK)
    assert rep.degenerate and not rep.values.any()


def test_dim_mismatch():
    with pytest.raises(DimMismatch):
        encode_bovw(np.zeros((2, 3)), EYE_BOOK)
    with pytest.raises(DimMismatch):
        encode_vlad(np.zeros((2, 5)), EYE_BOOK)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 40), st.integers(0, 2**31))
def test_bovw_counts_sum(m, seed):
    rng = np.random.default_rng(seed)
    rep = encode_bovw([rng.normal(size=(m, 4)), rng.normal(size=(3, 4))], EYE_BOOK)
    assert rep.raw.sum() == m + 3
    assert np.linalg.norm(rep.values) == pytest.approx(1.0)


# VLAD

def test_vlad_zero_residual():
    rep = encode_vlad(np.array([[0, 10.0, 0, 0]]), EYE_BOOK)
    assert not rep.values.any() and rep.degenerate


def test_vlad_single_residual():
    x = np.array([[1.0, 9.0, 0.5, 0]])
    rep = encode_vlad(x, EYE_BOOK)
    block = rep.values.reshape(4, 4)[1]
    expected = (x[0] - EYE_BOOK.book()[1])
    assert np.allclose(block, expected / np.linalg.norm(expected))
    assert np.linalg.norm(rep.values) == pytest.approx(1.0)


def test_vlad_concat_dimension():
    rng = np.random.default_rng(0)
    books = Codebook(tuple(rng.normal(size=(8, 16)) for _ in range(4)), "per-sensor")
    rep = encode_vlad([rng.normal(size=(20, 16)) for _ in range(4)], books, multiview=False)
    assert rep.kind == "vlad-concat" and rep.values.shape == (4 * 8 * 16,) == (512,)
    assert np.linalg.norm(rep.values) == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 50), st.integers(0, 2**31))
def test_vlad_blocks_unit_or_zero(m, seed):
    rng = np.random.default_rng(seed)
    book = Codebook((rng.normal(size=(5, 3)),))
    rep = encode_vlad(rng.normal(size=(m, 3)), book)
    norms = np.linalg.norm(np.asarray(rep.raw).reshape(5, 3), axis=1)
    assert np.linalg.norm(rep.values) == pytest.approx(1.0)
    assert np.sum(norms > 0) >= 1


# chi2 kernel

def random_reps(rng, n, s=2, c=3, k=6):
    h = rng.random((n, s, c, k)) * (rng.random((n, s, c, k)) > 0.3)
    return h / np.maximum(np.linalg.norm(h, axis=-1, keepdims=True), 1e-12)


def test_chi2_skips_empty_bins():
    assert chi2_distance([0, 1, 0], [0, 1, 0]) == 0.0
    assert chi2_distance([1, 0], [0, 1]) == 1.0


def test_kernel_identity_value():
    rng = np.random.default_rng(0)
    h = random_reps(rng, 1, s=4, c=5)[0]
    A = rng.uniform(0.1, 2.0, size=(4, 5))
    assert chi2_multiview_kernel(h, h, A) == 20.0


def test_kernel_unit_distance():
    a = np.array([[[1.0, 0.0]]])
    b = np.array([[[0.0, 1.0]]])
    assert chi2_multiview_kernel(a, b, np.ones((1, 1))) == pytest.approx(np.exp(-1))


def test_kernel_psd_and_max_on_diagonal():
    rng = np.random.default_rng(5)
    reps = random_reps(rng, 20)
    A = chi2_normalizers(reps)
    K = chi2_kernel_matrix(reps, reps, A)
    assert np.allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() >= -1e-8
    assert np.all(K <= np.diag(K)[:, None] + 1e-12)


def test_nonpositive_normalizer():
    h = np.ones((1, 1, 3))
    with pytest.raises(NonpositiveNormalizer):
        chi2_multiview_kernel(h, h, np.zeros((1, 1)))
    with pytest.raises(NonpositiveNormalizer):
        chi2_normalizers(np.ones((3, 1, 1, 4)))


def test_kernel_matches_scalar_definition():
    rng = np.random.default_rng(6)
    reps = random_reps(rng, 5)
    A = chi2_normalizers(reps)
    K = chi2_kernel_matrix(reps, reps, A)
    for i in range(5):
        for j in range(5):
            assert K[i, j] == pytest.approx(chi2_multiview_kernel(reps[i], reps[j], A))


# classifier and fusion

def toy_kernel(seed=0, n=12):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(-3, 0.5, (n, 2)), rng.normal(3, 0.5, (n, 2)), rng.normal((3, -3), 0.5, (n, 2))])
    y = np.repeat(["a", "b", "c"], n)
    return x, y


def test_memorisation_on_separable_data():
    x, y = toy_kernel()
    d = ((x[:, None] - x[None]) ** 2).sum(-1)
    gram = np.exp(-d / d.mean())
    model = OneVsAllSVM().fit(gram, y)
    p, labels = classify_one_vs_all(model, gram)
    assert (labels == y).all()
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_linear_vlad_separable():
    x, y = toy_kernel(1)
    gram = x @ x.T
    mask = y != "c"
    model = OneVsAllSVM().fit(gram[np.ix_(mask, mask)], y[mask])
    assert (model.predict(gram[np.ix_(mask, mask)]) == y[mask]).all()


def test_probabilities_sum_to_one():
    x, y = toy_kernel(2)
    gram = x @ x.T
    model = OneVsAllSVM().fit(gram, y)
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(100, 2)) * 5 @ x.T
    p = model.predict_proba(rows)
    assert np.max(np.abs(p.sum(axis=1) - 1)) <= 1e-9


def test_untrained():
    with pytest.raises(UntrainedModel):
        OneVsAllSVM().predict_proba(np.zeros((1, 3)))


def test_fuse_scores():
    p, k = fuse_scores([[0.8, 0.2], [0.4, 0.6]])
    assert np.allclose(p, [0.6, 0.4]) and k == 0
    same = [0.1, 0.7, 0.2]
    assert np.allclose(fuse_scores([same, same])[0], same)
    with pytest.raises(LengthMismatch):
        fuse_scores([[0.5, 0.5], [1.0]])
    assert fuse_scores([[0.5, 0.5]])[1] == 0


@settings(max_examples=100)
@given(st.integers(1, 6), st.integers(2, 5), st.integers(0, 2**31), st.floats(0.1, 10))
def test_fusion_permutation_and_scale(s, c, seed, scale):
    rng = np.random.default_rng(seed)
    ps = rng.dirichlet(np.ones(c), size=s)
    fused, k = fuse_scores(list(ps))
    perm = rng.permutation(s)
    fused2, k2 = fuse_scores(list(ps[perm]))
    assert np.allclose(fused, fused2) and k == k2
    scaled = [p * scale / (p * scale).sum() for p in ps]
    assert fuse_scores(scaled)[1] == k


# data and LOOCV

def test_descriptor_file_roundtrip(tmp_path):
    ds = synthetic_corpus(1, videos_per_class=2, m_mean=5)
    save_descriptors(ds, tmp_path)
    again = load_descriptors(tmp_path)
    assert again.labels == ds.labels and again.sensors == ds.sensors
    for a, b in zip(again.videos, ds.videos):
        for c in ds.channels:
            for x, y in zip(a.desc[c], b.desc[c]):
                assert np.allclose(x, y.astype(np.float32))


def test_insufficient_data():
    ds = synthetic_corpus(1, videos_per_class=1, m_mean=30)
    with pytest.raises(InsufficientData):
        run_loocv(ds, LoocvConfig())


def test_loocv_never_leaks():
    ds = synthetic_corpus(2, videos_per_class=3, m_mean=30)
    for fusion in ("feature", "encoding", "score"):
        res = run_loocv(ds, LoocvConfig("bovw", fusion, k=8), keep_folds=True)
        assert len(res.folds) == len(ds)
        for art in res.folds:
            for book in list(art.shared.values()) + list(art.per_sensor.values()):
                assert art.held_out not in book.trained_on
                assert book.trained_on == frozenset(art.train_ids)
            for ids in art.normalizer_ids.values():
                assert art.held_out not in ids
        assert res.confusion.sum() == len(ds)


def test_codebook_unchanged_when_test_video_is_altered():
    ds = synthetic_corpus(3, videos_per_class=3, m_mean=30)
    r1 = run_loocv(ds, LoocvConfig("vlad", "feature", k=4), keep_folds=True)
    for c in ds.channels:
        ds.videos[0].desc[c] = [x + 100.0 for x in ds.videos[0].desc[c]]
    r2 = run_loocv(ds, LoocvConfig("vlad", "feature", k=4), keep_folds=True)
    for c in ds.channels:
        assert np.array_equal(r1.folds[0].shared[c].book(), r2.folds[0].shared[c].book())


def test_noise_view_does_not_hurt_fusion():
    rng_q = (0.6, 0.5, 0.5, 0.0)
    ds = synthetic_corpus(4, informativeness=rng_q, occlusion=0.0, m_mean=40)
    noise_acc = run_loocv(ds, LoocvConfig("bovw", "single", view=3, k=16)).accuracy
    for fusion in ("feature", "encoding", "score"):
        assert run_loocv(ds, LoocvConfig("bovw", fusion, k=16)).accuracy >= noise_acc


def test_empty_sensor_blocks_allowed():
    v = Video("a", {"traj": [np.zeros((0, 2)), np.ones((3, 2))]})
    ds = DescriptorSet(("traj",), {"traj": 2}, 2, [v])
    assert ds.videos[0].sensor("traj", 0).shape == (0, 2)
