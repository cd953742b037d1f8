import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from plsopt.errors import DimensionMismatch, InvalidSpec, RankDeficientKrylov, SingularGram
from plsopt.sample import (
    Dataset,
    cross_validate,
    empirical_moments,
    fit_pls,
    krylov_vectors,
    nipals_pls,
    predict,
    skew_project,
)

from conftest import random_phi


def random_data(rng, n, p, noise=0.5):
    X = rng.standard_normal((n, p)) @ rng.standard_normal((p, p))
    y = X @ rng.standard_normal(p) + noise * rng.standard_normal(n) + 3.0
    return Dataset(X + rng.standard_normal(p), y)


def whitened_data(rng, n, p):
    """Centered X with X'X/(n-1) = I exactly."""
    Z = rng.standard_normal((n, p))
    Z -= Z.mean(axis=0)
    Q, _ = np.linalg.qr(Z)
    X = Q * np.sqrt(n - 1)
    return Dataset(X, X @ rng.standard_normal(p) + rng.standard_normal(n))


def pls_oracle(data, a):
    """Brute force: minimize (b - b_ols)' S (b - b_ols) over b in the Krylov span, via SVD basis."""
    _, _, Xc, yc, S, s = empirical_moments(data)
    K = krylov_vectors(S, s, a)
    U, sv, _ = np.linalg.svd(K / np.linalg.norm(K, axis=0), full_matrices=False)
    c, *_ = np.linalg.lstsq(Xc @ U, yc, rcond=None)
    return U @ c


class TestDataset:
    def test_validation(self):
        with pytest.raises(InvalidSpec):
            Dataset(np.ones((1, 2)), [1.0])
        with pytest.raises(DimensionMismatch):
            Dataset(np.ones((3, 2)), [1.0, 2.0])
        with pytest.raises(InvalidSpec):
            Dataset([[1.0, np.nan], [0.0, 1.0]], [1.0, 2.0])

    def test_csv_round_trip(self, rng, tmp_path):
        data = random_data(rng, 7, 3)
        for header in (False, True):
            path = tmp_path / f"d{header}.csv"
            data.to_csv(path, header=header)
            back = Dataset.from_csv(path, header=header)
            assert np.array_equal(back.X, data.X)
            assert np.array_equal(back.y, data.y)

    def test_csv_bad_cells(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2,3\n4,x,6\n")
        with pytest.raises(InvalidSpec):
            Dataset.from_csv(path)

    def test_csv_ragged(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2,3\n4,5\n")
        with pytest.raises(InvalidSpec):
            Dataset.from_csv(path)

    def test_moments_divisor(self, rng):
        data = random_data(rng, 20, 3)
        _, _, _, _, S, s = empirical_moments(data)
        assert_allclose(S, np.cov(data.X, rowvar=False), rtol=1e-12)
        _, _, _, _, S0, _ = empirical_moments(data, ddof=0)
        assert_allclose(S0, np.cov(data.X, rowvar=False, bias=True), rtol=1e-12)


class TestFitPls:
    def test_one_step_whitened(self, rng):
        data = whitened_data(rng, 30, 4)
        fit = fit_pls(data, 1)
        s = fit.sigma_xy_hat
        factor = (s @ s) / (s @ fit.sigma_xx_hat @ s)
        assert factor == pytest.approx(1.0, rel=1e-12)
        assert_allclose(fit.beta_hat, s, rtol=1e-10)

    def test_exhaustion_gives_ols(self, rng):
        data = random_data(rng, 40, 5)
        fit = fit_pls(data, 5)
        _, _, _, _, S, s = empirical_moments(data)
        assert_allclose(fit.beta_hat, np.linalg.solve(S, s), rtol=1e-6, atol=1e-8)

    def test_constant_response(self, rng):
        data = Dataset(rng.standard_normal((10, 3)), np.full(10, 2.0))
        with pytest.raises(RankDeficientKrylov):
            fit_pls(data, 1)

    def test_a_out_of_range(self, rng):
        data = random_data(rng, 10, 3)
        with pytest.raises(InvalidSpec):
            fit_pls(data, 4)
        with pytest.raises(InvalidSpec):
            fit_pls(data, 0)

    def test_rank_deficient_krylov(self, rng):
        # response depends on a single eigen-direction of a diagonal design
        X = np.zeros((40, 3))
        X[:, 0] = rng.standard_normal(40)
        X[:, 1:] = rng.standard_normal((40, 2))
        X -= X.mean(axis=0)
        # make the columns exactly uncorrelated
        Q, _ = np.linalg.qr(X)
        X = Q * np.array([3.0, 2.0, 1.0]) * np.sqrt(39)
        data = Dataset(X, X[:, 0])
        assert fit_pls(data, 1).beta_hat[0] == pytest.approx(1.0)
        with pytest.raises(RankDeficientKrylov):
            fit_pls(data, 2)

    def test_representations_reconcile(self, rng):
        for _ in range(30):
            data = random_data(rng, 30, 6)
            fit = fit_pls(data, int(rng.integers(1, 5)))
            assert fit.reconciliation_error <= 1e-8 * max(1.0, np.linalg.norm(fit.beta_hat))
            E = fit.e_hat
            assert_allclose(E[:, 0], fit.sigma_xy_hat)
            for j in range(1, fit.a):
                assert_allclose(E[:, j], fit.sigma_xx_hat @ E[:, j - 1])

    def test_matches_oracle(self, rng):
        for _ in range(30):
            data = random_data(rng, int(rng.integers(20, 60)), 6)
            a = int(rng.integers(1, 5))
            assert_allclose(fit_pls(data, a).beta_hat, pls_oracle(data, a), atol=1e-8)

    def test_cross_check_flag(self, rng):
        data = random_data(rng, 30, 4)
        fit = fit_pls(data, 2, cross_check=True)
        assert fit.a == 2

    def test_intercept_invariance(self, rng):
        data = random_data(rng, 30, 4)
        shifted = Dataset(data.X, data.y + 100.0)
        a, b = fit_pls(data, 2), fit_pls(shifted, 2)
        assert_allclose(a.beta_hat, b.beta_hat, atol=1e-10)
        assert b.y_mean == pytest.approx(a.y_mean + 100.0)


class TestNipalsAgreement:
    def test_random_datasets(self, rng):
        for _ in range(300):
            n = int(rng.integers(20, 101))
            p = int(rng.integers(1, 16))
            a = int(rng.integers(1, min(5, p) + 1))
            data = random_data(rng, n, p)
            fit = fit_pls(data, a)
            _, _, Xc, yc, _, _ = empirical_moments(data)
            other = nipals_pls(Xc, yc, a)
            assert np.linalg.norm(other - fit.beta_hat) <= 1e-6 * max(1.0, np.linalg.norm(fit.beta_hat))


class TestPredict:
    def test_at_mean(self, rng):
        data = random_data(rng, 20, 3)
        fit = fit_pls(data, 2)
        assert predict(fit, fit.x_mean) == pytest.approx(fit.y_mean)

    def test_noiseless_full_rank(self, rng):
        X = rng.standard_normal((50, 5)) * np.array([5.0, 4.0, 3.0, 2.0, 1.0])
        beta = np.array([1.0, -1.0, 0.0, 0.0, 0.0])
        data = Dataset(X, X @ beta)
        fit = fit_pls(data, 5)
        x_new = rng.standard_normal((4, 5))
        assert_allclose(predict(fit, x_new), x_new @ beta, atol=1e-6)

    def test_noiseless_exact_h_m(self, rng):
        # empirical covariance block diagonal so the sample Krylov space has dimension 2
        Z = rng.standard_normal((60, 4))
        Z -= Z.mean(axis=0)
        Q, _ = np.linalg.qr(Z)
        X = Q * np.array([4.0, 3.0, 2.0, 1.0]) * np.sqrt(59) + 7.0
        beta = np.array([0.5, -2.0, 0.0, 0.0])
        data = Dataset(X, X @ beta)
        fit = fit_pls(data, 2)
        x_new = rng.standard_normal(4)
        assert predict(fit, x_new) == pytest.approx(x_new @ beta, abs=1e-6)

    def test_dimension_mismatch(self, rng):
        fit = fit_pls(random_data(rng, 20, 3), 1)
        with pytest.raises(DimensionMismatch):
            predict(fit, [1.0, 2.0])


class TestSkewProject:
    def test_in_span(self, rng):
        phi = random_phi(rng, 6)
        K = krylov_vectors(phi.sigma_xx, phi.sigma_xy, 3)
        coef = np.array([1.0, -0.5, 0.25])
        zeta, f = skew_project(K @ coef, K, phi.sigma_xx)
        assert_allclose(zeta, coef, rtol=1e-8)
        assert np.linalg.norm(f) <= 1e-10 * np.linalg.norm(K @ coef)

    def test_orthogonal(self, rng):
        phi = random_phi(rng, 6)
        K = krylov_vectors(phi.sigma_xx, phi.sigma_xy, 3)
        b = rng.standard_normal(6)
        # remove the S-projection explicitly
        M = K.T @ phi.sigma_xx
        b = b - np.linalg.pinv(M) @ (M @ b)
        zeta, f = skew_project(b, K, phi.sigma_xx)
        assert_allclose(zeta, 0.0, atol=1e-8)
        assert_allclose(f, b, atol=1e-10)

    def test_random(self, rng):
        for _ in range(50):
            phi = random_phi(rng, 6)
            K = krylov_vectors(phi.sigma_xx, phi.sigma_xy, 3)
            b = rng.standard_normal(6)
            zeta, f = skew_project(b, K, phi.sigma_xx)
            assert_allclose(K @ zeta + f, b, atol=1e-10)
            cross = K.T @ phi.sigma_xx @ f
            scale = np.linalg.norm(K.T @ phi.sigma_xx, axis=1) * np.linalg.norm(b)
            assert np.all(np.abs(cross) <= 1e-8 * scale)
            # oracle: explicit Gram solve
            assert_allclose(zeta, np.linalg.solve(K.T @ phi.sigma_xx @ K, K.T @ phi.sigma_xx @ b), rtol=1e-6)

    def test_singular(self):
        K = np.array([[1.0, 2.0], [0.0, 0.0]])
        with pytest.raises(SingularGram):
            skew_project([1.0, 1.0], K, np.eye(2))

    def test_cross_terms_vanish(self, rng):
        for _ in range(100):
            n, p = int(rng.integers(20, 60)), int(rng.integers(3, 9))
            X = rng.standard_normal((n, p)) * np.linspace(2.0, 0.5, p)
            data = Dataset(X, X @ rng.standard_normal(p) + rng.standard_normal(n))
            a = int(rng.integers(1, 4))
            fit = fit_pls(data, a)
            S = fit.sigma_xx_hat
            other = rng.standard_normal(p)
            zeta, f = skew_project(other, fit.e_hat, S)
            d = fit.beta_hat - other
            lhs = d @ S @ d
            diff = fit.alpha_hat - zeta
            E = fit.e_hat
            rhs = diff @ (E.T @ S @ E) @ diff + f @ S @ f
            assert lhs == pytest.approx(rhs, rel=1e-8)


class TestCrossValidate:
    def test_table(self, rng):
        data = random_data(rng, 40, 4)
        table = cross_validate(data, 4, folds=5, seed=1)
        assert [r["a"] for r in table] == [1, 2, 3, 4]
        assert all(np.isfinite(r["msep"]) and r["msep"] > 0 for r in table)
        assert table == cross_validate(data, 4, folds=5, seed=1)

    def test_bad_folds(self, rng):
        with pytest.raises(InvalidSpec):
            cross_validate(random_data(rng, 10, 2), 2, folds=1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_fit_is_deterministic(seed, a):
    data = random_data(np.random.default_rng(seed), 25, 5)
    assert fit_pls(data, a).beta_hat.tobytes() == fit_pls(data, a).beta_hat.tobytes()
