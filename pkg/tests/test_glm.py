"""Non-conjugate block approximations against quadrature truth."""

import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from scipy.special import expit

import quadrature_oracles as qo
from bayesbreak import GaussianFamily, LengthFactor, NumericalError, Sequence, precompute_blocks
from bayesbreak.glm import (
    GaussianPrior,
    IntegrandSpec,
    ep_block,
    gaussian_spec,
    jj_block,
    laplace_block,
    logistic_spec,
    logistic_table,
    newton_mode,
    pg_vb_block,
    poisson_log_spec,
    quadrature_block,
    stability_harness,
)


def _random_logistic_block(rng, max_n=8):
    n = int(rng.integers(1, max_n + 1))
    m = rng.integers(1, 6, size=n).astype(float)
    y = rng.binomial(m.astype(int), rng.uniform(0.15, 0.85)).astype(float)
    prior = GaussianPrior(float(rng.uniform(-1, 1)), float(rng.uniform(0.3, 2.0)))
    return y, m, prior


class TestNewton:
    def test_gaussian_one_step_exact(self):
        spec = gaussian_spec([1.2, 0.4], [1.0, 2.0], sigma2=0.5, prior=GaussianPrior(0.3, 1.5))
        theta = newton_mode(spec)
        # quadratic psi: the mode is the conjugate posterior mean
        fam = GaussianFamily(0.3, 1.5, 0.5)
        assert theta == pytest.approx(fam.block([1.2, 0.4], [1.0, 2.0]).post_mean, abs=1e-12)

    def test_balanced_logistic_symmetric_mode(self):
        spec = logistic_spec([1.0, 1.0], [2.0, 2.0], prior=GaussianPrior(0.0, 1.0))
        assert newton_mode(spec) == pytest.approx(0.0, abs=1e-9)

    def test_poisson_log_mode_matches_search(self, rng):
        y = rng.poisson(3.0, size=6).astype(float)
        spec = poisson_log_spec(y, np.ones(6), prior=GaussianPrior(0.0, 2.0))
        theta = newton_mode(spec)
        res = minimize_scalar(lambda t: -spec.psi(t), bounds=(-5, 5), method="bounded",
                              options={"xatol": 1e-12})
        assert theta == pytest.approx(res.x, abs=1e-8)

    def test_gradient_condition_met(self, rng):
        for _ in range(10):
            y, m, prior = _random_logistic_block(rng)
            spec = logistic_spec(y, m, prior=prior)
            theta = newton_mode(spec)
            assert abs(spec.psi_d1(theta)) / abs(spec.psi_d2(theta)) < 1e-10


class TestLaplace:
    def test_exact_on_gaussian_blocks(self, rng):
        y = rng.normal(size=5)
        w = rng.uniform(0.5, 2.0, size=5)
        prior = GaussianPrior(0.2, 1.7)
        lap = laplace_block(gaussian_spec(y, w, sigma2=0.8, prior=prior))
        exact = GaussianFamily(0.2, 1.7, 0.8).block(y, w).log_evidence
        assert lap.log_evidence == pytest.approx(exact, abs=1e-12)

    def test_moment_is_value_at_mode(self):
        spec = logistic_spec([3.0], [4.0], prior=GaussianPrior(0.0, 1.0))
        lap = laplace_block(spec)
        assert lap.moment(expit) == pytest.approx(expit(lap.theta_hat))

    def test_error_decays_with_block_weight(self):
        # fixed success rate, growing trial counts: |laplace - truth| shrinks
        errors = []
        for W in (2, 8, 32):
            y = np.array([0.7 * W])
            m = np.array([float(W)])
            prior = GaussianPrior(0.0, 2.0)
            lap = laplace_block(logistic_spec(y, m, prior=prior))
            truth = qo.logistic_evidence(y, m, None, 0.0, 2.0)
            errors.append(abs(lap.log_evidence - truth))
        assert errors[0] > errors[1] > errors[2]


class TestVariationalBounds:
    def test_jj_trace_monotone(self, rng):
        for _ in range(10):
            y, m, prior = _random_logistic_block(rng)
            res = jj_block(y, m, prior=prior)
            assert np.all(np.diff(res.elbo_trace) >= -1e-9)

    def test_pg_trace_monotone(self, rng):
        for _ in range(10):
            y, m, prior = _random_logistic_block(rng)
            res = pg_vb_block(y, m, prior=prior)
            assert np.all(np.diff(res.elbo_trace) >= -1e-9)

    def test_bounds_below_truth(self, rng):
        for _ in range(25):
            y, m, prior = _random_logistic_block(rng)
            truth = qo.logistic_evidence(y, m, None, prior.nu, prior.rho2)
            assert jj_block(y, m, prior=prior).log_bound <= truth + 1e-9
            assert pg_vb_block(y, m, prior=prior).log_bound <= truth + 1e-9

    def test_balanced_single_observation_symmetric(self):
        res = jj_block([1.0], [2.0], prior=GaussianPrior(0.0, 1.0))
        assert res.mu == pytest.approx(0.0, abs=1e-12)
        res = pg_vb_block([1.0], [2.0], prior=GaussianPrior(0.0, 1.0))
        assert res.mu == pytest.approx(0.0, abs=1e-12)

    def test_jj_and_pg_agree_at_fixed_point(self, rng):
        for _ in range(15):
            y, m, prior = _random_logistic_block(rng)
            jj = jj_block(y, m, prior=prior, tol=1e-13, max_iter=2000)
            pg = pg_vb_block(y, m, prior=prior, tol=1e-13, max_iter=2000)
            assert jj.log_bound == pytest.approx(pg.log_bound, abs=1e-6)
            assert jj.mu == pytest.approx(pg.mu, abs=1e-6)

    def test_pg_omega_mean_formula(self):
        res = pg_vb_block([1.0, 0.0], [3.0, 2.0], prior=GaussianPrior(0.5, 1.0))
        c = np.sqrt(res.mu**2 + res.sigma2)
        np.testing.assert_allclose(
            res.omega_means, np.array([3.0, 2.0]) / (2 * c) * np.tanh(c / 2), rtol=1e-6
        )


class TestEP:
    def test_exact_on_gaussian_sites(self, rng):
        y = rng.normal(size=4)
        w = rng.uniform(0.5, 2.0, size=4)
        prior = GaussianPrior(0.1, 1.3)
        state = ep_block(gaussian_spec(y, w, sigma2=0.9, prior=prior))
        exact = GaussianFamily(0.1, 1.3, 0.9).block(y, w)
        assert state.converged
        assert state.log_evidence == pytest.approx(exact.log_evidence, abs=1e-10)
        assert state.mu == pytest.approx(exact.post_mean, abs=1e-10)

    def test_accurate_on_logistic_blocks(self, rng):
        errs = []
        for _ in range(10):
            y, m, prior = _random_logistic_block(rng)
            state = ep_block(logistic_spec(y, m, prior=prior))
            truth = qo.logistic_evidence(y, m, None, prior.nu, prior.rho2)
            errs.append(abs(state.log_evidence - truth))
        assert np.median(errs) < 1e-3

    def test_convergence_rate_on_well_conditioned_blocks(self, rng):
        converged = 0
        total = 40
        for _ in range(total):
            y, m, prior = _random_logistic_block(rng)
            if ep_block(logistic_spec(y, m, prior=prior)).converged:
                converged += 1
        assert converged / total >= 0.95


class TestQuadratureBlock:
    def test_matches_conjugate_gaussian(self, rng):
        y = rng.normal(size=5)
        w = rng.uniform(0.5, 2.0, size=5)
        res = quadrature_block(gaussian_spec(y, w, sigma2=0.7, prior=GaussianPrior(0.0, 1.1)))
        exact = GaussianFamily(0.0, 1.1, 0.7).block(y, w)
        assert res.log_evidence == pytest.approx(exact.log_evidence, abs=1e-10)
        assert res.post_mean == pytest.approx(exact.post_mean, abs=1e-9)

    def test_betaobs_consistency(self, rng):
        from scipy.stats import beta as beta_dist

        from bayesbreak import BetaObsFamily

        y = rng.beta(6.0, 3.0, size=6)
        phi, a0, b0 = 15.0, 1.5, 1.2
        fam = BetaObsFamily(phi=phi, a0=a0, b0=b0, n_nodes=96)

        def log_density(mu):
            mu = np.asarray(mu, float)
            out = beta_dist.logpdf(mu, a0, b0)
            for val in y:
                out = out + beta_dist.logpdf(val, phi * mu, phi * (1 - mu))
            return out

        spec = IntegrandSpec(log_density=log_density, mean_fn=lambda mu: mu, support=(0.0, 1.0))
        res = quadrature_block(spec)
        assert res.log_evidence == pytest.approx(fam.block(y).log_evidence, abs=1e-8)

    def test_node_doubling_stability(self, rng):
        for _ in range(10):
            y, m, prior = _random_logistic_block(rng)
            a = quadrature_block(logistic_spec(y, m, prior=prior), tol=1e-10)
            b = quadrature_block(logistic_spec(y, m, prior=prior), start_nodes=128, tol=1e-10)
            assert a.log_evidence == pytest.approx(b.log_evidence, abs=1e-8)

    def test_refinement_limit_raises(self):
        spec = IntegrandSpec(
            log_density=lambda t: np.where(np.abs(t) < 1.0, 0.0, -np.inf),
            mean_fn=lambda t: t,
            support=None,
            mode_hint=0.0,
            curvature_hint=1e-8,  # absurd scale: doubling cannot stabilize
        )
        with pytest.raises(NumericalError):
            quadrature_block(spec, start_nodes=8, max_nodes=16)


class TestStability:
    def _table(self, rng, n=8):
        y = rng.normal(size=n)
        y[n // 2 :] += 2.0
        seq = Sequence(np.arange(1.0, n + 1.0), y, np.ones(n))
        return precompute_blocks(seq, GaussianFamily(0.0, 4.0, 1.0), LengthFactor("uniform"))

    def test_zero_epsilon_zero_deviation(self, rng):
        rep = stability_harness(self._table(rng), 3, 0.0, 5, rng)
        assert rep.max_k_odds_dev == 0.0
        assert rep.max_boundary_odds_dev == 0.0
        assert rep.violations == 0

    def test_paper_bounds_hold(self, rng):
        # (k + k') eps for count odds; 2 k eps for boundary odds
        table = self._table(rng)
        rep = stability_harness(table, 3, 0.01, 50, rng)
        assert rep.violations == 0
        assert rep.message_dev_ok
        assert rep.max_k_odds_dev <= rep.k_odds_bound_at_max
        rep = stability_harness(table, 3, 0.05, 100, rng)
        assert rep.violations == 0
        assert rep.max_boundary_odds_dev <= rep.boundary_odds_bound_at_max


class TestDPReuse:
    def test_approximate_table_feeds_engine_unchanged(self, rng):
        # the DP layer accepts approximate tables with no special handling
        from bayesbreak import (
            CountPrior,
            boundary_marginal,
            compute_normalizers,
            forward_backward,
            map_segmentation,
            posterior_k,
        )

        n = 12
        p_true = np.where(np.arange(n) < 6, 0.2, 0.8)
        m = np.full(n, 10.0)
        y = rng.binomial(10, p_true).astype(float)
        grid = np.arange(n + 1, dtype=float)
        lf = LengthFactor("uniform")
        for method in ("laplace", "jj", "pgvb", "quadrature"):
            table = logistic_table(y, m, None, grid, GaussianPrior(0.0, 4.0), method)
            table = table.absorb(lf)
            norm = compute_normalizers(grid, lf, 3)
            msgs = forward_backward(table, 3)
            _, post, k_hat = posterior_k(msgs, norm, CountPrior.uniform(3))
            assert post[1:].sum() == pytest.approx(1.0)
            assert k_hat == 2
            res = map_segmentation(table, 2)
            assert res.boundaries[1] == 6
            marg = boundary_marginal(msgs, 2, 1)
            assert marg.sum() == pytest.approx(1.0, abs=1e-9)
