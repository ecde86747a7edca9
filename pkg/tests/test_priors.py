"""Length factors, prior normalizers, count priors, and renewal sampling."""

from itertools import combinations
from math import comb

import numpy as np
import pytest

from bayesbreak import (
    ConfigError,
    CountPrior,
    GaussianFamily,
    LengthFactor,
    Sequence,
    compute_normalizers,
    precompute_blocks,
    sample_renewal,
)


def _enumerated_log_ck(grid, lf, k):
    n = len(grid) - 1
    total = -np.inf
    for interior in combinations(range(1, n), k - 1):
        t = (0, *interior, n)
        spans = np.diff(grid[list(t)])
        steps = np.diff(np.asarray(t))
        total = np.logaddexp(total, np.sum(lf.log_eval(spans, steps=steps)))
    return total


class TestNormalizers:
    def test_uniform_g_gives_binomials(self):
        grid = np.arange(6.0)  # n = 5
        norm = compute_normalizers(grid, LengthFactor("uniform"), 5)
        assert np.exp(norm.log_ck(3)) == pytest.approx(comb(4, 2), abs=1e-12)
        for k in range(1, 6):
            assert np.exp(norm.log_ck(k)) == pytest.approx(comb(4, k - 1), rel=1e-12)

    def test_infeasible_min_length(self):
        grid = np.arange(5.0)  # n = 4, total span 4
        norm = compute_normalizers(grid, LengthFactor("min-length", min_length=3.0), 2)
        assert norm.log_ck(2) == -np.inf
        assert np.exp(norm.log_ck(1)) == pytest.approx(1.0)

    def test_geometric_matches_enumeration(self):
        grid = np.arange(7.0)  # n = 6
        lf = LengthFactor("geometric", rho=0.3)
        norm = compute_normalizers(grid, lf, 4)
        for k in (2, 3, 4):
            assert norm.log_ck(k) == pytest.approx(
                _enumerated_log_ck(grid, lf, k), rel=1e-12, abs=1e-12
            )

    def test_irregular_grid_matches_enumeration(self, rng):
        x = np.concatenate(([0.0], np.cumsum(rng.uniform(0.5, 2.0, size=6))))
        for lf in (
            LengthFactor("geometric", rho=0.4),
            LengthFactor("length-proportional"),
            LengthFactor("min-length", min_length=1.5),
        ):
            norm = compute_normalizers(x, lf, 3)
            for k in (1, 2, 3):
                assert norm.log_ck(k) == pytest.approx(
                    _enumerated_log_ck(x, lf, k), rel=1e-10, abs=1e-10
                )

    def test_c1_is_whole_span_cohesion(self):
        grid = np.array([0.0, 1.0, 3.0, 4.5])
        lf = LengthFactor("length-proportional")
        norm = compute_normalizers(grid, lf, 2)
        assert norm.log_ck(1) == pytest.approx(np.log(4.5))


class TestLengthFactor:
    def test_geometric_unit_grid_decay(self):
        lf = LengthFactor("geometric", rho=0.25)
        lengths = np.array([1.0, 2.0, 5.0])
        np.testing.assert_allclose(
            lf.log_eval(lengths), (lengths - 1.0) * np.log(0.75), atol=1e-15
        )

    def test_min_length_hard_constraint(self):
        lf = LengthFactor("min-length", min_length=2.0)
        assert lf.log_eval(1.9) == -np.inf
        assert lf.log_eval(2.0) == 0.0

    def test_geometric_index_uses_steps(self):
        lf = LengthFactor("geometric-index", rho=0.5)
        assert lf.log_eval(7.3, steps=3) == pytest.approx(2 * np.log(0.5))

    def test_custom_callable(self):
        lf = LengthFactor("custom", fn=lambda dx: -dx)
        assert lf.log_eval(np.array([1.0, 2.0])).tolist() == [-1.0, -2.0]

    def test_validation(self):
        with pytest.raises(ConfigError):
            LengthFactor("geometric", rho=1.5)
        with pytest.raises(ConfigError):
            LengthFactor("min-length")
        with pytest.raises(ConfigError):
            LengthFactor("banana")

    def test_config_round_trip(self):
        lf = LengthFactor.from_config({"kind": "geometric", "rho": 0.3})
        assert LengthFactor.from_config(lf.to_config()) == lf


class TestCountPrior:
    def test_uniform_normalized(self):
        cp = CountPrior.uniform(4)
        assert np.exp(cp.log_p[1:]).sum() == pytest.approx(1.0)

    def test_geometric_shape(self):
        cp = CountPrior.geometric(5, q=0.5)
        p = np.exp(cp.log_p[1:])
        assert p.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(p[:-1] / p[1:], 2.0, rtol=1e-12)

    def test_table(self):
        cp = CountPrior.table([1.0, 3.0])
        assert np.exp(cp.log_pk(2)) == pytest.approx(0.75)
        with pytest.raises(ConfigError):
            CountPrior.table([0.0, 0.0])


class TestRenewalSampler:
    def test_uniform_boundaries(self):
        counts = np.zeros(3)
        rng = np.random.default_rng(0)
        for _ in range(30000):
            t = sample_renewal(LengthFactor("uniform"), 4, 2, rng)
            counts[t[1] - 1] += 1
        freq = counts / counts.sum()
        np.testing.assert_allclose(freq, 1.0 / 3.0, atol=0.02)

    def test_hazard_to_one_forces_unit_segments(self):
        t = sample_renewal(LengthFactor("geometric", rho=1 - 1e-9), 5, 5, np.random.default_rng(1))
        np.testing.assert_array_equal(t, [0, 1, 2, 3, 4, 5])

    def test_empirical_law_matches_enumeration(self):
        n, k = 6, 3
        lf = LengthFactor("geometric", rho=0.4)
        grid = np.arange(n + 1, dtype=float)
        support = list(combinations(range(1, n), k - 1))
        target = np.array(
            [np.exp(np.sum(lf.log_eval(np.diff(grid[[0, *t, n]])))) for t in support]
        )
        target /= target.sum()
        counts = dict.fromkeys(support, 0)
        rng = np.random.default_rng(7)
        draws = 100000
        for _ in range(draws):
            t = tuple(sample_renewal(lf, n, k, rng)[1:-1])
            counts[t] += 1
        empirical = np.array([counts[t] for t in support]) / draws
        assert 0.5 * np.abs(empirical - target).sum() < 0.01  # total variation

    def test_infeasible_raises(self):
        with pytest.raises(ConfigError):
            sample_renewal(LengthFactor("min-length", min_length=10.0), 4, 2, 0)


class TestDegenerateHazardLimits:
    def test_high_hazard_posterior_concentrates_on_unit_segments(self):
        # likelihood-free: all block evidences one, geometric prior near rho=1
        n = 5
        lf = LengthFactor("geometric", rho=1 - 1e-9)
        grid = np.arange(n + 1, dtype=float)
        norm = compute_normalizers(grid, lf, n)
        # mass of the unit-length segmentation at k=n dominates within k=n...
        assert np.exp(norm.log_ck(n)) == pytest.approx(1.0, rel=1e-6)

    @pytest.mark.parametrize("rho,expect_k", [(1e-9, 1), (1 - 1e-9, 6)])
    def test_free_k_hazard_limits(self, rho, expect_k):
        # constant-hazard prior over (k, t): the per-segment hazard constant
        # lives in the count prior (the length factor drops it), so the
        # likelihood-free posterior over k is the hazard-implied count law
        from math import comb

        from bayesbreak import CountPrior, forward_backward, posterior_k
        from bayesbreak.families import BlockEvidenceTable

        n = 6
        grid = np.arange(n + 1, dtype=float)
        lf = LengthFactor("geometric", rho=rho)
        norm = compute_normalizers(grid, lf, n)
        ks = np.arange(1, n + 1)
        log_w = (
            ks * np.log(rho)
            + (n - ks) * np.log1p(-rho)
            + np.array([norm.log_ck(int(k)) for k in ks])
        )
        cp = CountPrior.table(np.exp(log_w - log_w.max()))
        log_a0 = lf.log_table(grid)
        log_a0[np.tril_indices(n + 1)] = -np.inf  # likelihood-free: evidence = prior factor
        table = BlockEvidenceTable(
            grid=grid,
            log_a0=log_a0,
            post_mean=np.zeros((n + 1, n + 1)),
            post_var=np.zeros((n + 1, n + 1)),
            with_prior=True,
        )
        msgs = forward_backward(table, n)
        _, post, k_hat = posterior_k(msgs, norm, cp)
        assert k_hat == expect_k
        assert post[expect_k] > 1.0 - 1e-6


class TestCoarseToFine:
    def test_inserting_pseudo_index_preserves_inherited_scores(self, rng):
        # a refinement with no new observation keeps every inherited
        # partition's likelihood x prior score when g uses physical lengths
        n = 5
        x = np.arange(1.0, n + 1.0)
        y = rng.normal(size=n)
        w = np.ones(n)
        fam = GaussianFamily(0.0, 1.5, 0.8)
        lf = LengthFactor("geometric", rho=0.3)
        coarse = Sequence(x, y, w, x0=0.0)
        fine = Sequence(
            np.insert(x, 2, 2.5), np.insert(y, 2, 0.0), np.insert(w, 2, 0.0), x0=0.0
        )
        tab_c = precompute_blocks(coarse, fam, lf)
        tab_f = precompute_blocks(fine, fam, lf)
        lift = lambda t: t if t < 3 else t + 1  # grid index map after insertion at pos 2
        for t in [(0, 2, 5), (0, 3, 5), (0, 1, 3, 5), (0, 5)]:
            score_c = sum(tab_c.log_a0[a, b] for a, b in zip(t[:-1], t[1:]))
            tf = tuple(lift(v) for v in t)
            score_f = sum(tab_f.log_a0[a, b] for a, b in zip(tf[:-1], tf[1:]))
            assert score_c == pytest.approx(score_f, rel=1e-12, abs=1e-12)
