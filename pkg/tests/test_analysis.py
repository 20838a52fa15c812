import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsmil.analysis import (
    bag_size_correlation,
    classical_mds,
    disagreement,
    hard_labels,
    per_subspace_auc,
    positive_fraction,
    rank_dissimilarities,
)
from dsmil.data import concept_membership, generate_concept_dataset
from dsmil.ensemble import EnsembleConfig, SubspaceEnsemble, SubspaceSpec, member_posteriors
from dsmil.evaluation import auc
from dsmil.linear import LinearModel
from dsmil.pipelines import Pipeline


def _member(idx, w, w0=0.0):
    return SubspaceSpec(idx, ("random", 0, 0)), LinearModel(np.asarray(w, float), w0, 1.0, "hinge")


class TestPerSubspaceAUC:
    X = np.array([[0.0, 3.0], [1.0, 2.0], [2.0, 1.0], [3.0, 0.5]])
    y = np.array([-1, -1, 1, 1])

    def test_perfect_member_and_duplicates(self):
        good = _member([0], [1.0])
        bad = _member([0], [-1.0])
        ens = SubspaceEnsemble((good, bad, good))
        np.testing.assert_array_equal(per_subspace_auc(ens, self.X, self.y), [1.0, 0.0, 1.0])

    def test_matches_manual_evaluation(self):
        members = (_member([0], [0.5]), _member([1], [1.0], 2.0), _member([0, 1], [1.0, 1.0]))
        ens = SubspaceEnsemble(members)
        expected = []
        for spec, model in members:
            s = self.X[:, spec.indices] @ model.w + model.w0
            expected.append(auc(s, self.y))
        np.testing.assert_array_equal(per_subspace_auc(ens, self.X, self.y), expected)

    def test_single_class(self):
        with pytest.raises(ValueError):
            per_subspace_auc(SubspaceEnsemble((_member([0], [1.0]),)), self.X, np.ones(4))


def _pearson(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    dx, dy = x - x.mean(), y - y.mean()
    return (dx @ dy) / np.sqrt((dx @ dx) * (dy @ dy))


class TestBagSizeCorrelation:
    def test_affine(self):
        sizes = np.array([3, 7, 1, 9, 4])
        r, rho = bag_size_correlation(sizes, 0.01 * sizes + 0.5)
        assert r == pytest.approx(1.0, abs=1e-12) and rho == pytest.approx(1.0)

    def test_reversed_monotone(self):
        _, rho = bag_size_correlation([1, 2, 3, 4], [0.9, 0.8, 0.6, 0.55])
        assert rho == pytest.approx(-1.0)

    def test_fixture_against_formula(self):
        sizes = [4, 10, 6, 12, 8]
        aucs = [0.61, 0.83, 0.70, 0.78, 0.81]
        r, rho = bag_size_correlation(sizes, aucs)
        # ranks computed by hand: sizes -> 1,4,2,5,3 ; aucs -> 1,5,2,3,4
        assert r == pytest.approx(_pearson(sizes, aucs), abs=1e-12)
        assert rho == pytest.approx(_pearson([1, 4, 2, 5, 3], [1, 5, 2, 3, 4]), abs=1e-12)

    def test_constant_input(self):
        with pytest.raises(ValueError, match="constant"):
            bag_size_correlation([5, 5, 5], [0.1, 0.2, 0.3])

    def test_too_short(self):
        with pytest.raises(ValueError):
            bag_size_correlation([1, 2], [0.1, 0.2])


class TestDisagreement:
    def test_identical_rows(self):
        d = disagreement(np.ones((3, 5)))
        assert not d.counts.any() and d.n_test == 5

    def test_complementary(self):
        row = np.array([1, -1, 1, 1, -1, -1, 1])
        d = disagreement([row, -row])
        np.testing.assert_array_equal(d.counts, [[0, 7], [7, 0]])

    def test_ragged(self):
        with pytest.raises(ValueError):
            disagreement([[1, -1], [1]])

    def test_hard_labels_threshold(self):
        np.testing.assert_array_equal(hard_labels([0.2, 0.5, 0.51]), [-1, -1, 1])

    @settings(max_examples=50, deadline=None)
    @given(
        p=st.integers(1, 12).flatmap(
            lambda n: st.lists(st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n), min_size=2, max_size=7)
        ),
        data=st.data(),
    )
    def test_properties(self, p, data):
        p = np.array(p)
        c = disagreement(p).counts
        L = c.shape[0]
        assert np.array_equal(c, c.T) and not np.diag(c).any() and c.max() <= p.shape[1]
        for i in range(L):
            for j in range(L):
                assert np.all(c[i, j] <= c[i] + c[:, j])
        perm = list(data.draw(st.permutations(range(L))))
        np.testing.assert_array_equal(disagreement(p[perm]).counts, c[np.ix_(perm, perm)])


def _procrustes_error(A, B):
    A = A - A.mean(0)
    B = B - B.mean(0)
    u, _, vt = np.linalg.svd(B.T @ A)
    return np.abs(B @ (u @ vt) - A).max()


class TestMDS:
    def test_two_points(self):
        c = classical_mds([[0, 3], [3, 0]])
        np.testing.assert_allclose(np.sort(c[:, 0]), [-1.5, 1.5], atol=1e-12)
        np.testing.assert_allclose(c[:, 1], 0, atol=1e-12)

    def test_zero_distances(self):
        np.testing.assert_array_equal(classical_mds(np.zeros((4, 4))), 0)

    def test_planar_recovery(self):
        pts = np.random.default_rng(0).normal(size=(15, 2)) * [3, 1]
        D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        c = classical_mds(D)
        Dc = np.sqrt(((c[:, None] - c[None]) ** 2).sum(-1))
        np.testing.assert_allclose(Dc, D, atol=1e-9)
        assert _procrustes_error(pts, c) < 1e-9
        np.testing.assert_allclose(c.mean(0), 0, atol=1e-9)
        # descending eigenvalue order: the first axis carries more spread
        assert c[:, 0].var() >= c[:, 1].var()

    def test_non_euclidean_input_clamped(self):
        D = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], float)
        c = classical_mds(D, dims=3)
        assert np.all(np.isfinite(c))
        np.testing.assert_allclose(c.mean(0), 0, atol=1e-9)

    def test_errors(self):
        with pytest.raises(ValueError, match="symmetric"):
            classical_mds([[0, 1], [2, 0]])
        with pytest.raises(ValueError, match="square"):
            classical_mds(np.zeros((2, 3)))


class TestRanking:
    def test_single_member(self):
        w = np.array([0.3, -2.0, 0.0, 1.1])
        r = rank_dissimilarities(SubspaceEnsemble((_member([0, 1, 2, 3], w),)), 4)
        np.testing.assert_array_equal(r.columns, [1, 3, 0, 2])
        np.testing.assert_array_equal(r.ranks, [1, 2, 3, 4])
        assert r.rank_of(3) == 2

    def test_average_and_unselected(self):
        ens = SubspaceEnsemble((_member([0, 2], [0.2, 1.0]), _member([0], [-0.4])))
        r = rank_dissimilarities(ens, 4)
        assert r.mean_abs_weight[list(r.columns).index(0)] == pytest.approx(0.3)
        assert r.selection_count[list(r.columns).index(0)] == 2
        np.testing.assert_array_equal(r.unselected, [1, 3])
        assert r.rank_of(1) is None

    def test_duplicate_draws_count_each(self):
        r = rank_dissimilarities(SubspaceEnsemble((_member([1, 1], [0.1, 0.5]),)), 2)
        assert r.mean_abs_weight[0] == pytest.approx(0.3) and r.selection_count[0] == 2

    def test_ties_by_column(self):
        r = rank_dissimilarities(SubspaceEnsemble((_member([2, 0, 1], [1.0, -1.0, 1.0]),)), 3)
        np.testing.assert_array_equal(r.columns, [0, 1, 2])

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(5))
    def test_concept_instances_enriched(self, seed):
        ds = generate_concept_dataset(seed=seed)
        fitted = Pipeline("DRS", EnsembleConfig(seed=seed)).fit(ds)
        ranking = rank_dissimilarities(fitted.ensemble, fitted.train_matrix.shape[1])
        X, _ = ds.stacked()
        inside = concept_membership(X, (5.0, 5.0), 0.5)
        base = inside.mean()
        top = inside[ranking.columns[:100]].mean()
        assert top > 3 * base


def test_positive_fraction():
    protos = generate_concept_dataset(n_pos=2, n_neg=2, bag_size=3, seed=0)
    from dsmil.dissimilarity import build_matrices

    _, inst = build_matrices(protos, protos)
    ens = SubspaceEnsemble((_member([0, 1, 2], [1, 1, 1]), _member([0, 11], [1, 1])))
    np.testing.assert_allclose(positive_fraction(ens, inst), [1.0, 0.5])
    np.testing.assert_allclose(member_posteriors(ens, inst).shape, (2, 4))


def _variable_size_concept(seed, n_bags=80, hit_rate=0.15):
    """Bags of 2 to 40 uniform points; each positive-bag instance falls in the
    concept disc with probability ``hit_rate`` (at least one per bag)."""
    from dsmil.data import bags_from_arrays

    rng = np.random.default_rng(seed)
    arrays, labels = [], []
    for i in range(n_bags):
        n = int(rng.integers(2, 41))
        x = rng.uniform(0, 10, (n, 2))
        label = 1 if i < n_bags // 2 else -1
        if label == 1:
            hit = rng.random(n) < hit_rate
            hit[rng.integers(n)] = True
            ang = rng.uniform(0, 2 * np.pi, hit.sum())
            rad = 0.5 * np.sqrt(rng.uniform(size=hit.sum()))
            x[hit] = np.c_[5 + rad * np.cos(ang), 5 + rad * np.sin(ang)]
        arrays.append(x)
        labels.append(label)
    return bags_from_arrays(arrays, labels)


@pytest.mark.slow
def test_bag_size_correlation_is_positive_on_variable_size_concept():
    from dsmil.evaluation import stratified_kfold

    coeffs = []
    for seed in range(5):
        ds = _variable_size_concept(seed)
        for tr, te in stratified_kfold(ds.labels, 5, seed).folds():
            fitted = Pipeline("DBS").fit(ds.subset(tr))
            test = ds.subset(te)
            aucs = per_subspace_auc(fitted.ensemble, fitted.represent(test), test.labels)
            coeffs.append(bag_size_correlation([len(s) for s in fitted.ensemble.specs], aucs))
    pearson, spearman = np.mean(coeffs, axis=0)
    assert 0 < pearson < 1 and 0 < spearman < 1
