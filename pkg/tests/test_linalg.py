"""Ridge state against dense linear-algebra oracles."""

import numpy as np
import pytest
from scipy.linalg import solve_triangular

from clsbandit.linalg import (
    BlockRidgeState,
    REFACTOR_PERIOD,
    RidgeState,
    ShadowState,
)


def random_unit_ball(rng, d):
    x = rng.standard_normal(d)
    n = np.linalg.norm(x)
    if n > 1.0:
        x = x / n * rng.random()
    return x


def dense_from_updates(d, lam, updates):
    V = np.eye(d) * lam
    b = np.zeros(d)
    for x, r in updates:
        V += np.outer(x, x)
        b += r * x
    return V, b


class TestRidgeState:
    def test_init(self):
        st = RidgeState(3, 2.0)
        assert np.allclose(st.V, 2.0 * np.eye(3))
        assert np.allclose(st.theta_hat(), 0.0)
        x = np.array([0.6, 0.0, 0.8])
        assert st.width(x) == pytest.approx(1.0 / np.sqrt(2.0))

    def test_zero_vector_is_a_no_op(self):
        st = RidgeState(3, 1.0)
        st.rank_one_update(np.ones(3) / 2, 1.0)
        V, b, chol = st.V.copy(), st.b.copy(), st.chol.copy()
        st.rank_one_update(np.zeros(3), 5.0)
        assert np.array_equal(st.V, V)
        assert np.array_equal(st.b, b)
        assert np.array_equal(st.chol, chol)

    def test_dimension_mismatch(self):
        st = RidgeState(3, 1.0)
        with pytest.raises(ValueError):
            st.rank_one_update(np.ones(4), 1.0)
        with pytest.raises(ValueError):
            st.width(np.ones(2))

    def test_invalid_construction(self):
        with pytest.raises(ValueError):
            RidgeState(0, 1.0)
        with pytest.raises(ValueError):
            RidgeState(3, 0.0)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(101)
        for _ in range(60):
            d = int(rng.integers(1, 9))
            lam = float(rng.uniform(0.1, 5.0))
            st = RidgeState(d, lam)
            updates = []
            for _ in range(int(rng.integers(1, 80))):
                x = random_unit_ball(rng, d)
                r = float(rng.standard_normal())
                updates.append((x, r))
                st.rank_one_update(x, r)
            V, b = dense_from_updates(d, lam, updates)
            theta_dense = np.linalg.solve(V, b)
            np.testing.assert_allclose(st.theta_hat(), theta_dense, rtol=1e-9, atol=1e-12)
            z = random_unit_ball(rng, d)
            w_dense = np.sqrt(z @ np.linalg.solve(V, z))
            assert st.width(z) == pytest.approx(w_dense, rel=1e-9, abs=1e-12)

    def test_widths_vectorized_matches_scalar(self):
        rng = np.random.default_rng(7)
        st = RidgeState(4, 0.5)
        for _ in range(30):
            st.rank_one_update(random_unit_ball(rng, 4), rng.standard_normal())
        X = np.stack([random_unit_ball(rng, 4) for _ in range(20)])
        np.testing.assert_allclose(
            st.widths(X), [st.width(x) for x in X], rtol=1e-12
        )

    def test_width_zero_iff_zero_vector(self):
        st = RidgeState(3, 1.0)
        assert st.width(np.zeros(3)) == 0.0
        assert st.width(np.array([1e-8, 0.0, 0.0])) > 0.0

    def test_width_monotone_under_updates(self):
        rng = np.random.default_rng(3)
        st = RidgeState(5, 1.0)
        probes = np.stack([random_unit_ball(rng, 5) for _ in range(10)])
        prev = st.widths(probes)
        for _ in range(50):
            st.rank_one_update(random_unit_ball(rng, 5), 0.0)
            cur = st.widths(probes)
            assert np.all(cur <= prev + 1e-12)
            prev = cur

    def test_factor_residual_stays_tight(self):
        rng = np.random.default_rng(19)
        st = RidgeState(6, 1.0)
        for _ in range(500):
            st.rank_one_update(random_unit_ball(rng, 6), rng.standard_normal())
        resid = np.linalg.norm(st.chol @ st.chol.T - st.V)
        assert resid <= 1e-8 * np.linalg.norm(st.V)

    def test_refactor_counter(self):
        rng = np.random.default_rng(2)
        st = RidgeState(2, 1.0)
        for _ in range(REFACTOR_PERIOD):
            st.rank_one_update(random_unit_ball(rng, 2), 0.0)
        assert st.update_count == 0  # period reached, factor rebuilt

    def test_add_batch_equals_sequential(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            d = int(rng.integers(1, 7))
            lam = float(rng.uniform(0.2, 3.0))
            X = np.stack([random_unit_ball(rng, d) for _ in range(12)])
            r = rng.standard_normal(12)
            a = RidgeState(d, lam)
            a.add_batch(X, r)
            b = RidgeState(d, lam)
            for x, rr in zip(X, r):
                b.rank_one_update(x, rr)
            np.testing.assert_allclose(a.V, b.V, rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(a.b, b.b, rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(
                a.theta_hat(), b.theta_hat(), rtol=1e-9, atol=1e-12
            )

    def test_sample_posterior_v_zero_returns_mean(self):
        st = RidgeState(3, 1.0)
        mean = np.array([0.3, -0.2, 0.1])
        out = st.sample_posterior(mean, 0.0, np.random.default_rng(0))
        assert np.array_equal(out, mean)

    def test_sample_posterior_deterministic_given_seed(self):
        rng = np.random.default_rng(5)
        st = RidgeState(4, 2.0)
        for _ in range(20):
            st.rank_one_update(random_unit_ball(rng, 4), rng.standard_normal())
        mean = st.theta_hat()
        a = st.sample_posterior(mean, 1.3, np.random.default_rng(42))
        b = st.sample_posterior(mean, 1.3, np.random.default_rng(42))
        assert np.array_equal(a, b)

    def test_sample_posterior_covariance(self):
        # modest-size version of the acceptance covariance check
        rng = np.random.default_rng(77)
        st = RidgeState(3, 1.0)
        for _ in range(25):
            st.rank_one_update(random_unit_ball(rng, 3), rng.standard_normal())
        v = 0.8
        draws_rng = np.random.default_rng(123)
        mean = st.theta_hat()
        samples = np.stack(
            [st.sample_posterior(mean, v, draws_rng) for _ in range(20000)]
        )
        emp = np.cov(samples.T)
        target = v * v * np.linalg.inv(st.V)
        tol = 5e-2 * v * v * np.abs(np.linalg.inv(st.V)).max()
        assert np.abs(emp - target).max() <= tol * 2.5  # looser at 2e4 draws


class TestShadowState:
    def test_matches_dense_shadow(self):
        rng = np.random.default_rng(31)
        d, lam, k = 4, 0.5, 3
        sh = ShadowState(d, lam, k)
        V = np.eye(d) * lam
        for _ in range(40):
            x = random_unit_ball(rng, d)
            sh.rank_one_update(x)
            V += (lam / k) * np.outer(x, x)
        z = random_unit_ball(rng, d)
        w_dense = np.sqrt(z @ np.linalg.solve(V, z))
        assert sh.width(z) == pytest.approx(w_dense, rel=1e-9)

    def test_shadow_width_dominates_for_small_lam(self):
        rng = np.random.default_rng(37)
        d, k = 5, 4
        for lam in (0.5, 1.0, 4.0):  # lam <= k throughout
            st = RidgeState(d, lam)
            sh = ShadowState(d, lam, k)
            for _ in range(60):
                x = random_unit_ball(rng, d)
                st.rank_one_update(x, 0.0)
                sh.rank_one_update(x)
                z = random_unit_ball(rng, d)
                assert sh.width(z) >= st.width(z) - 1e-12


class TestBlockRidgeState:
    def test_matches_dense_block_embedding(self):
        rng = np.random.default_rng(41)
        d, M, n_base = 3, 2, 5
        block = BlockRidgeState(d, M, 0.9)
        dense = RidgeState(d * M, 0.9)
        for _ in range(60):
            arm = int(rng.integers(0, M * n_base))
            x = random_unit_ball(rng, d)
            r = float(rng.standard_normal())
            block.update_arm(arm, n_base, x, r)
            embedded = np.zeros(d * M)
            j = arm // n_base
            embedded[j * d : (j + 1) * d] = x
            dense.rank_one_update(embedded, r)
        theta_block = np.concatenate([s.theta_hat() for s in block.blocks])
        np.testing.assert_allclose(theta_block, dense.theta_hat(), rtol=1e-8, atol=1e-12)
        # off-diagonal blocks of the dense statistic stay exactly zero
        off = dense.V[:d, d:]
        assert np.abs(off).max() == 0.0
        z = random_unit_ball(rng, d)
        embedded = np.zeros(d * M)
        embedded[d:] = z
        assert block.blocks[1].width(z) == pytest.approx(
            dense.width(embedded), rel=1e-9
        )


def test_solve_lower_consistency():
    # the policy layer relies on L^{-1} x giving both widths and sample dots
    rng = np.random.default_rng(53)
    st = RidgeState(4, 1.5)
    for _ in range(30):
        st.rank_one_update(random_unit_ball(rng, 4), rng.standard_normal())
    X = np.stack([random_unit_ball(rng, 4) for _ in range(8)])
    Y = st.solve_lower(X)
    np.testing.assert_allclose(
        np.sqrt(np.einsum("ij,ij->j", Y, Y)), st.widths(X), rtol=1e-12
    )
    eta = rng.standard_normal(4)
    lhs = solve_triangular(st.chol, eta, lower=True, trans="T") @ X[0]
    rhs = eta @ Y[:, 0]
    assert lhs == pytest.approx(rhs, rel=1e-10)
