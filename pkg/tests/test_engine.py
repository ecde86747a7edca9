"""Sum-product DP outputs against enumeration and structural identities."""

from dataclasses import replace

import numpy as np
import pytest

from bayesbreak import (
    BinomialFamily,
    ConfigError,
    CountPrior,
    GaussianFamily,
    InputError,
    LengthFactor,
    PoissonFamily,
    Sequence,
    bayes_curve,
    boundary_event_prob,
    boundary_event_probs,
    boundary_marginal,
    brute_posterior,
    compute_normalizers,
    coverage_weights,
    forward_backward,
    posterior_k,
    precompute_blocks,
    segment_moments_fixed,
)
from bayesbreak.families import BlockEvidenceTable


def _uniform_table(n):
    log_a0 = np.full((n + 1, n + 1), -np.inf)
    log_a0[np.triu_indices(n + 1, k=1)] = 0.0
    return BlockEvidenceTable(
        grid=np.arange(n + 1, dtype=float),
        log_a0=log_a0,
        post_mean=np.zeros((n + 1, n + 1)),
        post_var=np.zeros((n + 1, n + 1)),
        with_prior=True,
    )


def _gaussian_instance(rng, n, jump_at=None, jump=0.0, sigma=1.0):
    y = rng.normal(0.0, sigma, size=n)
    if jump_at is not None:
        y[jump_at:] += jump
    seq = Sequence(np.arange(1.0, n + 1.0), y, np.ones(n))
    fam = GaussianFamily(0.0, max(4.0, jump**2 + 1.0), sigma**2)
    return seq, fam


class TestForwardBackward:
    def test_counting_identity(self):
        msgs = forward_backward(_uniform_table(3), 2)
        assert msgs.logL[2, 3] == pytest.approx(np.log(2.0), abs=1e-12)

    def test_prefix_suffix_agreement(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 9))
            seq, fam = _gaussian_instance(rng, n)
            table = precompute_blocks(seq, fam, LengthFactor("uniform"))
            msgs = forward_backward(table, min(4, n))
            for k in range(1, msgs.k_max + 1):
                assert msgs.logL[k, n] == pytest.approx(msgs.logR[k, 0], abs=1e-9)

    def test_enumeration_identity(self, rng):
        n, k = 8, 3
        seq, fam = _gaussian_instance(rng, n, jump_at=4, jump=2.0)
        table = precompute_blocks(seq, fam, LengthFactor("uniform"))
        msgs = forward_backward(table, k)
        from bayesbreak import enumerate_boundaries

        total = -np.inf
        count = 0
        for t in enumerate_boundaries(n, k):
            count += 1
            total = np.logaddexp(total, sum(table.log_a0[a, b] for a, b in zip(t[:-1], t[1:])))
        assert count == 21
        assert msgs.logL[k, n] == pytest.approx(total, rel=1e-10, abs=1e-10)

    def test_k_max_bounds(self):
        with pytest.raises(ConfigError):
            forward_backward(_uniform_table(3), 4)


class TestPosteriorK:
    def test_prior_recovery_on_uniform_table(self):
        n = 5
        table = _uniform_table(n)
        norm = compute_normalizers(table.grid, LengthFactor("uniform"), n)
        cp = CountPrior.table([0.1, 0.2, 0.3, 0.25, 0.15])
        msgs = forward_backward(table, n)
        log_ev, post, k_hat = posterior_k(msgs, norm, cp)
        np.testing.assert_allclose(log_ev[1:], 0.0, atol=1e-12)  # P(y|k) = 1
        np.testing.assert_allclose(post[1:], np.exp(cp.log_p[1:]), atol=1e-12)
        assert k_hat == 3

    def test_flat_data_prefers_one_segment(self, rng):
        n = 20
        seq = Sequence(np.arange(1.0, n + 1.0), rng.normal(0, 0.2, n), np.ones(n))
        fam = GaussianFamily(0.0, 1.0, 0.04)
        table = precompute_blocks(seq, fam, LengthFactor("uniform"))
        norm = compute_normalizers(seq.grid, LengthFactor("uniform"), 3)
        _, post, k_hat = posterior_k(forward_backward(table, 3), norm, CountPrior.uniform(3))
        assert k_hat == 1
        assert post[1] > post[2]

    def test_poisson_jump_matches_oracle(self, rng):
        n = 6
        w = np.ones(n)
        y = np.array([1.0, 0.0, 1.0, 9.0, 11.0, 10.0])
        seq = Sequence(np.arange(1.0, n + 1.0), y, w, family="poisson")
        fam = PoissonFamily(1.0, 0.5)
        lf = LengthFactor("uniform")
        table = precompute_blocks(seq, fam, lf)
        cp = CountPrior.uniform(4)
        norm = compute_normalizers(seq.grid, lf, 4)
        msgs = forward_backward(table, 4)
        log_ev, post, k_hat = posterior_k(msgs, norm, cp)
        brute = brute_posterior(table, lf, cp, 4)
        np.testing.assert_allclose(post[1:], brute.post_k[1:], atol=1e-10)
        assert k_hat == brute.k_hat == 2

    def test_all_infeasible_raises(self):
        n = 4
        lf = LengthFactor("min-length", min_length=10.0)
        table = _uniform_table(n)
        log_g = lf.log_table(table.grid)
        table = replace(table, log_a0=table.log_a0 + log_g)
        norm = compute_normalizers(table.grid, lf, 3)
        msgs = forward_backward(table, 3)
        with pytest.raises(ConfigError, match="no admissible segmentation"):
            posterior_k(msgs, norm, CountPrior.uniform(3))


class TestBoundaryPosteriors:
    def test_symmetric_two_point_marginal(self):
        msgs = forward_backward(_uniform_table(3), 2)
        marg = boundary_marginal(msgs, 2, 1)
        assert marg[1] == pytest.approx(0.5)
        assert marg[2] == pytest.approx(0.5)

    def test_high_snr_jump_located(self, rng):
        seq, fam = _gaussian_instance(rng, 20, jump_at=10, jump=8.0, sigma=0.5)
        table = precompute_blocks(seq, fam, LengthFactor("uniform"))
        msgs = forward_backward(table, 2)
        marg = boundary_marginal(msgs, 2, 1)
        assert int(np.argmax(marg)) == 10
        assert marg.sum() == pytest.approx(1.0, abs=1e-9)

    def test_marginals_normalized_random(self, rng):
        for _ in range(5):
            n = int(rng.integers(4, 9))
            seq, fam = _gaussian_instance(rng, n)
            table = precompute_blocks(seq, fam, LengthFactor("geometric", rho=0.3))
            k = min(4, n)
            msgs = forward_backward(table, k)
            for p in range(1, k):
                assert boundary_marginal(msgs, k, p).sum() == pytest.approx(1.0, abs=1e-9)

    def test_p_out_of_range(self):
        msgs = forward_backward(_uniform_table(3), 2)
        with pytest.raises(InputError):
            boundary_marginal(msgs, 2, 2)

    def test_event_prob_identities(self, rng):
        n = 7
        seq, fam = _gaussian_instance(rng, n, jump_at=3, jump=2.0)
        table = precompute_blocks(seq, fam, LengthFactor("uniform"))
        msgs = forward_backward(table, 3)
        # k=2: the event probability equals the single boundary marginal
        marg = boundary_marginal(msgs, 2, 1)
        for h in range(1, n):
            assert boundary_event_prob(msgs, 2, h) == pytest.approx(marg[h], abs=1e-12)
        # k=1: no interior boundary
        assert all(boundary_event_prob(msgs, 1, h) == 0.0 for h in range(1, n))
        # total boundary count equals k - 1
        for k in (2, 3):
            assert boundary_event_probs(msgs, k).sum() == pytest.approx(k - 1, abs=1e-9)
        assert np.all(boundary_event_probs(msgs, 3) <= 1.0 + 1e-9)


class TestBayesCurve:
    def test_single_point(self):
        fam = GaussianFamily(0.3, 2.0, 1.0)
        seq = Sequence(np.array([1.0]), np.array([1.5]), np.ones(1))
        table = precompute_blocks(seq, fam, LengthFactor("uniform"))
        msgs = forward_backward(table, 1)
        mean, var = bayes_curve(msgs, table, 1)
        direct = fam.block([1.5], [1.0])
        assert mean[0] == pytest.approx(direct.post_mean, rel=1e-12)
        assert var[0] == pytest.approx(direct.post_var, rel=1e-12)

    def test_matches_oracle_weighting(self, rng):
        n, k = 6, 2
        seq, fam = _gaussian_instance(rng, n, jump_at=3, jump=1.5)
        lf = LengthFactor("uniform")
        table = precompute_blocks(seq, fam, lf)
        msgs = forward_backward(table, k)
        mean, var = bayes_curve(msgs, table, k)
        brute = brute_posterior(table, lf, CountPrior.uniform(k), k)
        bmean, bvar = brute.curves[k]
        np.testing.assert_allclose(mean, bmean, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(var, bvar, rtol=1e-9, atol=1e-9)

    def test_constant_data_curve_sane(self, rng):
        n = 12
        seq = Sequence(np.arange(1.0, n + 1.0), np.full(n, 2.0) + rng.normal(0, 0.01, n), np.ones(n))
        fam = GaussianFamily(2.0, 0.5, 0.01)
        table = precompute_blocks(seq, fam, LengthFactor("uniform"))
        msgs = forward_backward(table, 3)
        mean, var = bayes_curve(msgs, table, 2)
        assert np.all(np.abs(mean - seq.y.mean()) < 0.05)
        assert np.all(var > 0)

    def test_coverage_weights_sum_to_one(self, rng):
        for _ in range(5):
            n = int(rng.integers(3, 9))
            seq, fam = _gaussian_instance(rng, n)
            table = precompute_blocks(seq, fam, LengthFactor("geometric", rho=0.4))
            k = min(3, n)
            msgs = forward_backward(table, k)
            w = coverage_weights(msgs, table, k)
            per_index = np.zeros(n)
            for i in range(n + 1):
                for j in range(i + 1, n + 1):
                    per_index[i:j] += w[i, j]
            np.testing.assert_allclose(per_index, 1.0, atol=1e-9)


class TestSegmentMoments:
    def test_whole_sequence_block(self, rng):
        seq, fam = _gaussian_instance(rng, 5)
        table = precompute_blocks(seq, fam, LengthFactor("uniform"))
        means, variances = segment_moments_fixed(table, [0, 5])
        direct = fam.block(seq.y, seq.w)
        assert means[0] == pytest.approx(direct.post_mean)
        assert variances[0] == pytest.approx(direct.post_var)

    def test_matches_fresh_conjugate_updates(self, rng):
        n = 8
        seq, fam = _gaussian_instance(rng, n, jump_at=4, jump=3.0)
        table = precompute_blocks(seq, fam, LengthFactor("uniform"))
        t = [0, 4, 8]
        means, variances = segment_moments_fixed(table, t)
        for q, (a, b) in enumerate(zip(t[:-1], t[1:])):
            direct = fam.block(seq.y[a:b], seq.w[a:b])
            assert means[q] == pytest.approx(direct.post_mean, rel=1e-12)
            assert variances[q] == pytest.approx(direct.post_var, rel=1e-12)

    def test_prior_factor_cancels(self, rng):
        seq, fam = _gaussian_instance(rng, 6)
        t = [0, 2, 6]
        uniform = precompute_blocks(seq, fam, LengthFactor("uniform"))
        geometric = precompute_blocks(seq, fam, LengthFactor("geometric", rho=0.5))
        m1, v1 = segment_moments_fixed(uniform, t)
        m2, v2 = segment_moments_fixed(geometric, t)
        np.testing.assert_array_equal(m1, m2)
        np.testing.assert_array_equal(v1, v2)

    def test_malformed_boundaries(self, rng):
        seq, fam = _gaussian_instance(rng, 4)
        table = precompute_blocks(seq, fam, LengthFactor("uniform"))
        with pytest.raises(InputError):
            segment_moments_fixed(table, [0, 3])
        with pytest.raises(InputError):
            segment_moments_fixed(table, [0, 2, 2, 4])


@pytest.mark.parametrize("family_name", ["gaussian", "poisson", "binomial", "betaobs"])
def test_master_oracle_equivalence(rng, family_name):
    """Randomized all-outputs equivalence with enumeration (small instances)."""
    from bayesbreak.verify import check_instance, _random_instance

    for idx in range(12):
        seq, fam = _random_instance(rng, family_name)
        lf = [
            LengthFactor("uniform"),
            LengthFactor("geometric", rho=0.3),
            LengthFactor("min-length", min_length=2.0),
        ][idx % 3]
        issues = check_instance(seq, fam, lf, min(4, seq.n))
        assert issues == []
