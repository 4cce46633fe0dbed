import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from conftest import graph_from_dense, random_instance
from oracles import kkt_projection, nonbacktracking_walks, random_connected_graph

from sslh.compatibility import CompatibilityMatrix, n_free_params, to_h
from sslh.errors import DegenerateCountsError, DimensionError, RepresentationError
from sslh.estimation import (
    DheConfig,
    dhe,
    dhe_objective,
    estimate,
    lhe,
    lhe_objective,
    load_compatibility,
    mhe,
    neighbor_stats,
    nonbacktracking_matrix,
    normalize_observed,
    project_doubly_stochastic,
)
from sslh.generator import PlantedGraphSpec, generate
from sslh.graph import LabelMatrix, build_propagation_matrix, center_labels
from sslh.harness import split_labels

PATH4 = np.diag(np.ones(3), 1) + np.diag(np.ones(3), -1)


class TestNonBacktracking:
    def test_path_counts(self):
        g = graph_from_dense(PATH4)
        assert np.array_equal(nonbacktracking_matrix(g, 1).toarray(), PATH4)
        two = nonbacktracking_matrix(g, 2).toarray()
        assert two[0, 2] == two[1, 3] == 1 and np.trace(two) == 0
        three = nonbacktracking_matrix(g, 3).toarray()
        assert three[0, 3] == three[3, 0] == 1 and three.sum() == 2

    def test_triangle_closed_form(self, k3):
        # on K3 every non-backtracking walk of length 3 returns to its start
        assert np.array_equal(nonbacktracking_matrix(k3, 3).toarray(), 2 * np.eye(3))

    @settings(max_examples=25)
    @given(st.integers(0, 10**6), st.integers(1, 5))
    def test_matches_enumeration(self, seed, ell):
        rng = np.random.default_rng(seed)
        A = random_connected_graph(int(rng.integers(3, 9)), 5, rng)
        g = graph_from_dense(A)
        assert np.array_equal(nonbacktracking_matrix(g, ell).toarray(), nonbacktracking_walks(A, ell))

    def test_guard(self, k3):
        with pytest.raises(DimensionError):
            nonbacktracking_matrix(k3, 2, size_limit=2)

    @settings(max_examples=25)
    @given(st.integers(0, 10**6), st.booleans())
    def test_neighbor_stats_match_explicit_matrices(self, seed, ec):
        rng = np.random.default_rng(seed)
        A, g, X, _ = random_instance(rng, frac=0.6)
        stats = neighbor_stats(g, X, ell_max=4, ec=ec)
        Xv = X.values
        for ell in range(1, 5):
            W_ell = nonbacktracking_walks(A, ell) if ec else np.linalg.matrix_power(A, ell)
            assert np.allclose(stats.M[ell - 1], Xv.T @ W_ell @ Xv, atol=1e-9)

    def test_residual_labels_accepted(self, rng):
        _, g, X, _ = random_instance(rng, 20, frac=0.7)
        a = neighbor_stats(g, X, 3)
        b = neighbor_stats(g, center_labels(X), 3)
        assert all(np.array_equal(x, y) for x, y in zip(a.M, b.M))


class TestNormalize:
    M = np.array([[0, 2, 0], [1, 0, 1], [0, 2, 0]], dtype=float)

    def test_row_stochastic(self):
        assert np.allclose(normalize_observed(self.M, 1), [[0, 1, 0], [0.5, 0, 0.5], [0, 1, 0]])

    def test_symmetric(self):
        S = np.array([[2, 2], [2, 8]], dtype=float)
        out = normalize_observed(S, 2)
        assert np.allclose(out, [[0.5, 2 / np.sqrt(40)], [2 / np.sqrt(40), 0.8]])

    def test_scaled(self):
        assert np.allclose(normalize_observed(self.M, 3), 0.5 * self.M)

    def test_zero_row(self):
        bad = self.M.copy()
        bad[1] = 0
        with pytest.raises(DegenerateCountsError):
            normalize_observed(bad, 1)
        with pytest.raises(DegenerateCountsError):
            normalize_observed(np.zeros((3, 3)), 3)


class TestProjection:
    @given(st.integers(0, 10**6), st.integers(2, 6))
    def test_matches_kkt(self, seed, k):
        Ht = np.random.default_rng(seed).normal(size=(k, k))
        got = project_doubly_stochastic(Ht).values
        assert np.allclose(got, kkt_projection(Ht), atol=1e-10)
        assert np.allclose(got, got.T) and np.allclose(got.sum(axis=1), 1.0)

    def test_fixed_point(self):
        H = CompatibilityMatrix.planted(5).values
        assert np.allclose(project_doubly_stochastic(H).values, H, atol=1e-14)


def planted(n=3000, h=8, d=10, seed=0, directed=False):
    H = CompatibilityMatrix.planted(h).values
    spec = PlantedGraphSpec(n, n * d // 2, (1 / 3,) * 3, H, "powerlaw:0.3", seed=seed)
    return generate(spec), H


class TestMHE:
    def test_fully_labeled_recovers_exactly(self):
        pg, H = planted()
        assert np.allclose(mhe(pg.graph, pg.labels).values, H, atol=1e-12)

    def test_no_labeled_pairs(self, path3):
        with pytest.raises(DegenerateCountsError):
            mhe(path3, LabelMatrix.from_classes([0, -1, 1], 2))

    def test_estimate_dispatch(self):
        pg, H = planted()
        res = estimate("mhe", pg.graph, pg.labels)
        assert res.method == "mhe" and res.objective < 1e-20
        with pytest.raises(ValueError):
            estimate("nope", pg.graph, pg.labels)


class TestLHE:
    def instance(self, seed):
        rng = np.random.default_rng(seed)
        A, g, X, _ = random_instance(rng, 40, frac=0.6)
        return g, center_labels(X)

    @pytest.mark.parametrize("seed", range(5))
    def test_exact_minimizer(self, seed):
        g, X = self.instance(seed)
        P = build_propagation_matrix(g, 0.5, 0.5, 0)
        res = lhe(P, X)
        h = to_h(res.H.values)
        assert res.objective == pytest.approx(lhe_objective(P, X, h), rel=1e-9, abs=1e-12)
        num = optimize.minimize(lambda z: lhe_objective(P, X, z), np.zeros(h.size), method="BFGS",
                                options={"gtol": 1e-10})
        assert np.allclose(h, num.x, atol=1e-5)
        rng = np.random.default_rng(seed)
        for _ in range(20):
            assert lhe_objective(P, X, h + rng.normal(scale=0.1, size=h.size)) >= res.objective - 1e-12

    def test_requires_residual(self):
        g, X = self.instance(0)
        from sslh.graph import uncenter_labels

        with pytest.raises(RepresentationError):
            lhe(build_propagation_matrix(g), uncenter_labels(X))

    def test_rank_deficient_warns(self, path3):
        X = center_labels(LabelMatrix.from_classes([0, -1, 1], 2))
        with pytest.warns(RuntimeWarning):
            lhe(build_propagation_matrix(path3), X)

    def test_too_few_labels(self, path3):
        with pytest.raises(DegenerateCountsError):
            lhe(build_propagation_matrix(path3), center_labels(LabelMatrix.from_classes([0, -1, -1], 2)))


class TestDHE:
    def test_powers_of_planted_H(self):
        H = CompatibilityMatrix.planted(8).values
        got = [np.linalg.matrix_power(H, ell)[2, 2] for ell in range(1, 5)]
        assert np.allclose(got, [0.8, 0.66, 0.562, 0.4934], atol=1e-12)

    def test_objective_zero_at_exact_powers(self):
        H = CompatibilityMatrix.planted(5).values
        targets = [(ell, 10.0 ** (ell - 1), np.linalg.matrix_power(H, ell)) for ell in range(1, 6)]
        val, grad = dhe_objective(to_h(H), targets, 3)
        assert val == pytest.approx(0.0, abs=1e-20) and np.abs(grad).max() < 1e-10

    @given(st.integers(0, 10**6))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 5))
        targets = [(ell, 2.0 ** ell, rng.normal(size=(k, k))) for ell in (1, 2, 4)]
        h = rng.uniform(0, 2 / k, size=n_free_params(k))
        _, g = dhe_objective(h, targets, k)
        step = 1e-6
        num = [(dhe_objective(h + step * e, targets, k)[0] - dhe_objective(h - step * e, targets, k)[0]) / (2 * step)
               for e in np.eye(h.size)]
        assert np.allclose(g, num, rtol=1e-5, atol=1e-5)

    def test_single_level_equals_mhe(self, rng):
        _, g, X, _ = random_instance(rng, 40, frac=0.7)
        res = dhe(g, X, DheConfig(ell_max=1, ec=False, tol=1e-12))
        assert np.allclose(res.H.values, mhe(g, X).values, atol=1e-7)

    def test_history_is_monotone(self):
        pg, H = planted(seed=3)
        X, _ = split_labels(pg.labels, 0.05, 1)
        res = dhe(pg.graph, X)
        hist = np.array(res.diagnostics["history"])
        assert np.all(np.diff(hist) <= 1e-12 * max(1.0, hist[0]))
        assert res.diagnostics["converged"]

    @pytest.mark.parametrize("seed", range(3))
    def test_recovers_planted_from_sparse_labels(self, seed):
        pg, H = planted(n=10000, seed=seed)
        X, _ = split_labels(pg.labels, 0.01, seed)
        res = dhe(pg.graph, X, DheConfig(seed=seed))
        assert np.abs(res.H.values - H).max() < 0.1
        assert np.abs(mhe(pg.graph, X).values - H).max() > np.abs(res.H.values - H).max()

    def test_drops_empty_levels(self, path3):
        X = LabelMatrix.from_classes([0, -1, 1], 2)
        res = dhe(path3, X, DheConfig(ell_max=2, ec=True))
        assert res.diagnostics["dropped"] == [1]
        assert res.diagnostics["levels"] == [2]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DheConfig(ell_max=30)
        with pytest.raises(ValueError):
            DheConfig(lam=0)
        assert DheConfig(ell_max=3, lam=2).weights().tolist() == [1, 2, 4]
        assert DheConfig().to_dict()["lambda"] == 10.0

    def test_save_and_load(self, tmp_path):
        pg, H = planted()
        res = estimate("dhe", pg.graph, pg.labels)
        res.save(tmp_path / "h.json")
        back = load_compatibility(tmp_path / "h.json")
        assert np.array_equal(back.values, res.H.values)
