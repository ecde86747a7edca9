"""The brute-force reference itself: enumeration counts and self-consistency."""

import numpy as np
import pytest

from bayesbreak import (
    CountPrior,
    GaussianFamily,
    InputError,
    LengthFactor,
    Sequence,
    brute_posterior,
    count_boundaries,
    enumerate_boundaries,
    precompute_blocks,
)


def test_enumeration_examples():
    assert list(enumerate_boundaries(3, 2)) == [(0, 1, 3), (0, 2, 3)]
    assert len(list(enumerate_boundaries(5, 3))) == 6
    assert len(list(enumerate_boundaries(8, 4))) == 35
    assert count_boundaries(8, 4) == 35


def test_enumeration_is_lexicographic_and_counted():
    vecs = list(enumerate_boundaries(6, 3))
    assert vecs == sorted(vecs)
    assert len(vecs) == count_boundaries(6, 3)
    for t in vecs:
        assert t[0] == 0 and t[-1] == 6 and all(a < b for a, b in zip(t, t[1:]))


def test_bad_k_rejected():
    with pytest.raises(InputError):
        list(enumerate_boundaries(3, 4))


def test_guard_on_large_n(rng):
    n = 13
    seq = Sequence(np.arange(1.0, n + 1.0), rng.normal(size=n), np.ones(n))
    table = precompute_blocks(seq, GaussianFamily(), LengthFactor("uniform"))
    with pytest.raises(InputError, match="guard"):
        brute_posterior(table, LengthFactor("uniform"), CountPrior.uniform(3), 3)


def test_prior_mass_self_consistency(rng):
    # sum of p(t|k) over the enumeration is one after dividing by C_k
    n = 7
    seq = Sequence(np.arange(1.0, n + 1.0), rng.normal(size=n), np.ones(n))
    lf = LengthFactor("geometric", rho=0.35)
    table = precompute_blocks(seq, GaussianFamily(), lf)
    res = brute_posterior(table, lf, CountPrior.uniform(4), 4)
    grid = table.grid
    for k in range(1, 5):
        total = -np.inf
        for t in enumerate_boundaries(n, k):
            spans = np.diff(grid[list(t)])
            total = np.logaddexp(total, np.sum(lf.log_eval(spans, steps=np.diff(t))))
        assert total == pytest.approx(res.log_C[k], abs=1e-12)


def test_uniform_blocks_give_uniform_marginals():
    n = 5
    from bayesbreak.families import BlockEvidenceTable

    log_a0 = np.full((n + 1, n + 1), -np.inf)
    log_a0[np.triu_indices(n + 1, k=1)] = 0.0
    table = BlockEvidenceTable(
        grid=np.arange(n + 1, dtype=float),
        log_a0=log_a0,
        post_mean=np.zeros((n + 1, n + 1)),
        post_var=np.zeros((n + 1, n + 1)),
        with_prior=True,
    )
    res = brute_posterior(table, LengthFactor("uniform"), CountPrior.uniform(2), 2)
    marg = res.boundary_marginals[(2, 1)]
    np.testing.assert_allclose(marg[1:n], 1.0 / (n - 1), atol=1e-12)
