import numpy as np
import pytest

from lensless_crb import (
    CrbMap,
    EpsilonPolicy,
    FisherMatrix,
    GaussianNoise,
    PoissonNoise,
    SingularRateError,
    build_system_matrix,
    crb_from_fisher,
    crb_summary,
    fisher_gaussian,
    fisher_monte_carlo,
    fisher_poisson,
    forward,
    generate_psf,
    hessian_log_likelihood,
    sample,
    score,
    vectorize,
)
from lensless_crb.oracles import relative_error
from lensless_crb.psf import Lenslets, PsfSpec


def triple_loop_weighted_gram(M, w):
    """Naive O(k d^2) evaluation of M^T diag(w) M."""
    k, d = M.shape
    J = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            for l in range(k):
                J[i, j] += M[l, i] * w[l] * M[l, j]
    return J


class TestFisherGaussian:
    def test_identity_diagonal(self):
        H = build_system_matrix(np.ones((1, 1)), (2, 2))
        J = fisher_gaussian(H, 2.0)
        np.testing.assert_allclose(J.entries, 0.5 * np.eye(4))

    def test_matches_triple_loop_oracle(self):
        H = build_system_matrix(np.ones((2, 2)), (2, 2), (2, 2))
        J = fisher_gaussian(H, 1.7)
        expected = triple_loop_weighted_gram(H.matrix, np.full(H.k, 1 / 1.7))
        np.testing.assert_allclose(J.entries, expected, rtol=1e-12)

    def test_variance_scaling_exact(self, small_lenslet_h):
        J1 = fisher_gaussian(small_lenslet_h, 1.0)
        J2 = fisher_gaussian(small_lenslet_h, 2.0)
        np.testing.assert_array_equal(J2.entries, 0.5 * J1.entries)

    def test_object_independent(self, small_lenslet_h):
        # the closed form takes no object at all; repeated calls are identical
        a = fisher_gaussian(small_lenslet_h, 1.0)
        b = fisher_gaussian(small_lenslet_h, 1.0)
        np.testing.assert_array_equal(a.entries, b.entries)


class TestFisherPoisson:
    def test_identity_diagonal(self):
        H = build_system_matrix(np.ones((1, 1)), (1, 2))
        J = fisher_poisson(H, np.array([4.0, 9.0]), 0.0)
        np.testing.assert_allclose(J.entries, np.diag([0.25, 1 / 9]))

    def test_brightness_scaling(self, unpadded_lenslet_h):
        rng = np.random.default_rng(0)
        v = rng.uniform(0.5, 2.0, size=unpadded_lenslet_h.d)
        J1 = fisher_poisson(unpadded_lenslet_h, v, 0.0)
        J3 = fisher_poisson(unpadded_lenslet_h, 3.0 * v, 0.0)
        np.testing.assert_allclose(J3.entries, J1.entries / 3.0, rtol=1e-12)

    def test_matches_triple_loop_oracle(self):
        psf = np.zeros((3, 3))
        psf[0, 1] = 0.6
        psf[2, 2] = 0.4
        H = build_system_matrix(psf, (3, 3), (3, 3))
        rng = np.random.default_rng(1)
        v = rng.uniform(0.5, 3.0, size=9)
        beta = 0.01
        J = fisher_poisson(H, v, beta)
        w = 1.0 / (H.matrix @ v + beta)
        np.testing.assert_allclose(J.entries,
                                   triple_loop_weighted_gram(H.matrix, w),
                                   rtol=1e-12)

    def test_zero_rate_rejected(self):
        H = build_system_matrix(np.ones((1, 1)), (1, 2))
        with pytest.raises(SingularRateError):
            fisher_poisson(H, np.array([0.0, 1.0]), 0.0)


class TestFisherMonteCarlo:
    def test_gaussian_matches_closed_form(self):
        H = build_system_matrix(np.ones((1, 1)), (1, 2))
        J = fisher_monte_carlo(GaussianNoise(1.0), H, np.ones(2), 200_000, seed=0)
        np.testing.assert_allclose(J.entries, np.eye(2), atol=0.03)
        assert J.n_samples == 200_000

    def test_poisson_matches_closed_form(self):
        H = build_system_matrix(np.ones((1, 1)), (1, 1))
        J = fisher_monte_carlo(PoissonNoise(0.0), H, np.array([100.0]), 200_000,
                               seed=1)
        assert J.entries[0, 0] == pytest.approx(0.01, rel=0.03)

    def test_single_sample_is_score_outer_product(self):
        H = build_system_matrix(np.ones((1, 1)), (1, 2))
        model = GaussianNoise(1.0)
        v = np.array([1.0, 2.0])
        J = fisher_monte_carlo(model, H, v, 1, seed=5)
        # replicate the sampler's seed path to recover the single draw
        child = np.random.SeedSequence(5).spawn(1)[0]
        noise = np.random.default_rng(child).normal(0, 1.0, size=(1, H.k))
        s = score(model, H, v, forward(H, v) + noise[0])
        np.testing.assert_allclose(J.entries, np.outer(s, s), rtol=1e-12)

    @pytest.mark.parametrize("model", [GaussianNoise(1.0), PoissonNoise(1e-3)])
    def test_oracle_equivalence_small_instance(self, model, small_lenslet_h):
        rng = np.random.default_rng(2)
        v = rng.uniform(0.5, 2.0, size=small_lenslet_h.d)
        if isinstance(model, GaussianNoise):
            closed = fisher_gaussian(small_lenslet_h, model.sigma2)
        else:
            closed = fisher_poisson(small_lenslet_h, v, model.background)
        mc = fisher_monte_carlo(model, small_lenslet_h, v, 200_000, seed=3)
        assert relative_error(mc.entries, closed.entries) < 0.05

    def test_invariants(self, small_lenslet_h):
        mc = fisher_monte_carlo(GaussianNoise(1.0), small_lenslet_h,
                                np.ones(small_lenslet_h.d), 5000, seed=4)
        assert np.max(np.abs(mc.entries - mc.entries.T)) < 1e-10
        assert np.linalg.eigvalsh(mc.entries).min() >= -1e-8


class TestHessianAverageEquivalence:
    def test_gaussian_exact_with_one_sample(self, small_lenslet_h):
        H = small_lenslet_h
        v = np.ones(H.d)
        model = GaussianNoise(1.5)
        y = sample(model, forward(H, v), seed=0)
        neg_hess = -hessian_log_likelihood(model, H, v, y)
        np.testing.assert_allclose(neg_hess, fisher_gaussian(H, 1.5).entries,
                                   rtol=1e-12)

    def test_poisson_sample_average(self, small_lenslet_h):
        H = small_lenslet_h
        rng = np.random.default_rng(6)
        v = rng.uniform(0.5, 2.0, size=H.d)
        model = PoissonNoise(1e-3)
        b = forward(H, v) + model.background
        # the Hessian is linear in y ...
        y1 = sample(model, forward(H, v), seed=1)
        y2 = sample(model, forward(H, v), seed=2)
        lhs = hessian_log_likelihood(model, H, v, y1) \
            + hessian_log_likelihood(model, H, v, y2)
        rhs = 2 * hessian_log_likelihood(model, H, v, (y1 + y2) / 2)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10)
        # ... so the sample average equals the Hessian at the sample-mean y
        n = 200_000
        rng2 = np.random.default_rng(7)
        y_bar = rng2.poisson(b, size=(n, H.k)).mean(axis=0)
        avg_neg_hess = -hessian_log_likelihood(model, H, v, y_bar)
        closed = fisher_poisson(H, v, model.background)
        assert relative_error(avg_neg_hess, closed.entries) < 0.05


class TestCrb:
    def test_diagonal_inversion(self):
        J = FisherMatrix(np.diag([0.25, 1 / 9, 1.0, 4.0]), "poisson")
        cmap = crb_from_fisher(J, EpsilonPolicy(absolute=0.0))
        np.testing.assert_allclose(cmap.values, [4.0, 9.0, 1.0, 0.25])
        assert cmap.epsilon_used == 0.0

    def test_identity_gaussian_crb_is_sigma2(self):
        H = build_system_matrix(np.ones((1, 1)), (4, 4))
        cmap = crb_from_fisher(fisher_gaussian(H, 1.0))
        np.testing.assert_allclose(cmap.values, 1.0, rtol=1e-6)

    def test_center_worse_than_corner_for_two_lenslets(self):
        psf = generate_psf(PsfSpec(Lenslets(2), (8, 8), 0))
        H = build_system_matrix(psf, (8, 8), (10, 10))
        grid = crb_from_fisher(fisher_gaussian(H, 1.0)).grid()
        assert grid[4, 4] > grid[0, 0]

    def test_sigma2_scaling_linear(self, small_lenslet_h):
        c = 3.5
        crb1 = crb_from_fisher(fisher_gaussian(small_lenslet_h, 1.0))
        crbc = crb_from_fisher(fisher_gaussian(small_lenslet_h, c))
        np.testing.assert_allclose(crbc.values, c * crb1.values, rtol=1e-9)

    def test_brightness_scaling_linear(self, unpadded_lenslet_h):
        rng = np.random.default_rng(3)
        v = rng.uniform(0.5, 2.0, size=unpadded_lenslet_h.d)
        c = 4.0
        crb1 = crb_from_fisher(fisher_poisson(unpadded_lenslet_h, v, 0.0))
        crbc = crb_from_fisher(fisher_poisson(unpadded_lenslet_h, c * v, 0.0))
        np.testing.assert_allclose(crbc.values, c * crb1.values, rtol=1e-9)

    def test_epsilon_monotonicity(self, small_lenslet_h):
        J = fisher_gaussian(small_lenslet_h, 1.0)
        maps = [crb_from_fisher(J, EpsilonPolicy(relative=r)).values
                for r in (1e-9, 1e-6, 1e-3)]
        assert np.all(maps[1] <= maps[0] + 1e-12)
        assert np.all(maps[2] <= maps[1] + 1e-12)

    def test_epsilon_recorded(self, small_lenslet_h):
        J = fisher_gaussian(small_lenslet_h, 1.0)
        cmap = crb_from_fisher(J, EpsilonPolicy(relative=1e-6))
        assert cmap.epsilon_used == pytest.approx(1e-6 * np.diag(J.entries).max())


class TestCrbSummary:
    def test_uniform_map(self):
        cmap = CrbMap(np.full(4, 4.0), 0.0, (2, 2))
        s = crb_summary(cmap)
        assert s["mean"] == s["median"] == s["max"] == 4.0

    def test_cross_section_row_convention(self):
        cmap = CrbMap(np.array([1.0, 2.0, 3.0, 4.0]), 0.0, (2, 2))
        np.testing.assert_array_equal(crb_summary(cmap)["cross_section"], [3.0, 4.0])

    def test_dense_object_mean_ordering(self):
        # Poisson bounds on a dense object degrade with multiplexing
        from lensless_crb import DenseCells, ObjectSpec, generate_object
        from lensless_crb.psf import Diffuser

        obj = generate_object(ObjectSpec(DenseCells(), (16, 16), 100.0, 0))
        v = vectorize(obj)
        means = []
        for kind in (Lenslets(1), Lenslets(5), Diffuser()):
            psf = generate_psf(PsfSpec(kind, (16, 16), 42))
            H = build_system_matrix(psf, obj.shape, (18, 18))
            cmap = crb_from_fisher(fisher_poisson(H, v, 1e-3),
                                   object_shape=obj.shape)
            means.append(crb_summary(cmap)["mean"])
        assert means[0] <= means[1] <= means[2]
