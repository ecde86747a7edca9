"""Backend agreement and edge behavior of the DP kernels."""

import numpy as np
import pytest

from bayesbreak import _kernels

pytestmark = pytest.mark.skipif(
    len(_kernels.available_backends()) < 2, reason="numba backend unavailable"
)


def _random_table(rng, n, p_forbidden=0.0):
    log_a = np.full((n + 1, n + 1), -np.inf)
    iu = np.triu_indices(n + 1, k=1)
    log_a[iu] = rng.normal(0.0, 3.0, size=len(iu[0]))
    if p_forbidden:
        mask = rng.random(len(iu[0])) < p_forbidden
        vals = log_a[iu]
        vals[mask] = -np.inf
        log_a[iu] = vals
    return log_a


@pytest.mark.parametrize("n,k_max,p_forbidden", [(6, 3, 0.0), (12, 5, 0.0), (9, 4, 0.4)])
def test_backends_agree(rng, n, k_max, p_forbidden):
    log_a = _random_table(rng, n, p_forbidden)
    L_nb = _kernels.forward_pass(log_a, k_max, "numba")
    L_np = _kernels.forward_pass(log_a, k_max, "numpy")
    np.testing.assert_allclose(L_nb, L_np, rtol=1e-12, atol=1e-12)
    R_nb = _kernels.backward_pass(log_a, k_max, "numba")
    R_np = _kernels.backward_pass(log_a, k_max, "numpy")
    np.testing.assert_allclose(R_nb, R_np, rtol=1e-12, atol=1e-12)
    M_nb, ptr_nb = _kernels.maxsum_pass(log_a, k_max, "numba")
    M_np, ptr_np = _kernels.maxsum_pass(log_a, k_max, "numpy")
    np.testing.assert_allclose(M_nb, M_np, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(ptr_nb, ptr_np)
    W_nb = _kernels.curve_logweights(L_nb, R_nb, log_a, k_max, "numba")
    W_np = _kernels.curve_logweights(L_np, R_np, log_a, k_max, "numpy")
    np.testing.assert_allclose(W_nb, W_np, rtol=1e-12, atol=1e-12)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError, match="unknown kernel backend"):
        _kernels.forward_pass(np.zeros((2, 2)), 1, "cuda")


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_all_forbidden_blocks_give_neginf(backend):
    n = 4
    log_a = np.full((n + 1, n + 1), -np.inf)
    L = _kernels.forward_pass(log_a, 2, backend)
    assert np.all(L[1:] == -np.inf)
    M, ptr = _kernels.maxsum_pass(log_a, 2, backend)
    assert np.all(M[1:] == -np.inf)
    assert np.all(ptr[1:] == -1)


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_uniform_table_counts_segmentations(backend):
    # log evidence 0 per block makes L[k, n] count the boundary placements
    n, k_max = 7, 4
    log_a = np.full((n + 1, n + 1), -np.inf)
    log_a[np.triu_indices(n + 1, k=1)] = 0.0
    L = _kernels.forward_pass(log_a, k_max, backend)
    from math import comb

    for k in range(1, k_max + 1):
        assert L[k, n] == pytest.approx(np.log(comb(n - 1, k - 1)), abs=1e-12)


def test_maxsum_tie_breaks_to_smallest_h():
    n = 5
    log_a = np.full((n + 1, n + 1), -np.inf)
    log_a[np.triu_indices(n + 1, k=1)] = 0.0
    for backend in _kernels.available_backends():
        _M, ptr = _kernels.maxsum_pass(log_a, 3, backend)
        # every state's backpointer is the smallest admissible split
        assert ptr[1, n] == 0
        assert ptr[2, n] == 1
        assert ptr[3, n] == 2
