"""Brute-force reference posteriors by exhaustive enumeration.

Used by the test suite and the ``verify`` subcommand to cross-check the DP
engine on small instances. Shares only the block-evidence table with the
engine; every posterior quantity here is recomputed by direct summation or
maximization over all boundary vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .errors import InputError
from .families import BlockEvidenceTable
from .priors import CountPrior, LengthFactor

NEG_INF = -np.inf

MAX_ORACLE_N = 12


def enumerate_boundaries(n: int, k: int):
    """All boundary vectors 0 = t_0 < ... < t_k = n, lexicographic order."""
    if not 1 <= k <= n:
        raise InputError(f"need 1 <= k <= n (got k={k}, n={n})")
    for interior in combinations(range(1, n), k - 1):
        yield (0, *interior, n)


def count_boundaries(n: int, k: int) -> int:
    return comb(n - 1, k - 1)


def _logsumexp(values: list[float]) -> float:
    if not values:
        return NEG_INF
    arr = np.asarray(values)
    m = arr.max()
    if m == NEG_INF:
        return NEG_INF
    return float(m + np.log(np.exp(arr - m).sum()))


@dataclass(frozen=True)
class BruteResult:
    """Exhaustively computed posterior summaries for every k in 1..k_max."""

    n: int
    k_max: int
    log_Z: np.ndarray  # unnormalized evidence sums, index k
    log_C: np.ndarray  # prior normalizers, index k
    log_evidence_per_k: np.ndarray
    post_k: np.ndarray
    k_hat: int
    boundary_marginals: dict  # (k, p) -> length n+1 probability vector
    boundary_event: dict  # k -> length n-1 vector over interior indices
    curves: dict  # k -> (mean, var), arrays of length n
    map_per_k: dict  # k -> (boundaries tuple, score)


def brute_posterior(
    table: BlockEvidenceTable,
    length_factor: LengthFactor,
    count_prior: CountPrior,
    k_max: int,
) -> BruteResult:
    """Direct-summation posterior for a prior-absorbed block table."""
    n = table.n
    if n > MAX_ORACLE_N:
        raise InputError(f"oracle guard: n={n} exceeds {MAX_ORACLE_N}")
    if not table.with_prior:
        raise InputError("oracle expects a table with the length prior absorbed")
    log_a0 = table.log_a0
    log_g = length_factor.log_table(table.grid)

    log_Z = np.full(k_max + 1, NEG_INF)
    log_C = np.full(k_max + 1, NEG_INF)
    marginals: dict = {}
    events: dict = {}
    curves: dict = {}
    map_per_k: dict = {}

    for k in range(1, k_max + 1):
        scores = []
        prior_scores = []
        vectors = []
        for t in enumerate_boundaries(n, k):
            i = np.array(t[:-1])
            j = np.array(t[1:])
            scores.append(float(np.sum(log_a0[i, j])))
            prior_scores.append(float(np.sum(log_g[i, j])))
            vectors.append(t)
        log_Z[k] = _logsumexp(scores)
        log_C[k] = _logsumexp(prior_scores)

        best, best_t = NEG_INF, None
        if log_Z[k] > NEG_INF:
            weights = np.exp(np.asarray(scores) - log_Z[k])
            marg = {p: np.zeros(n + 1) for p in range(1, k)}
            event = np.zeros(n + 1)
            mean = np.zeros(n)
            m2 = np.zeros(n)
            for t, wt, sc in zip(vectors, weights, scores):
                for p in range(1, k):
                    marg[p][t[p]] += wt
                for h in t[1:-1]:
                    event[h] += wt
                for a, b in zip(t[:-1], t[1:]):
                    mean[a:b] += wt * table.post_mean[a, b]
                    m2[a:b] += wt * (table.post_var[a, b] + table.post_mean[a, b] ** 2)
                if (
                    best_t is None
                    or sc > best
                    or (sc == best and tuple(reversed(t[1:-1])) < tuple(reversed(best_t[1:-1])))
                ):
                    best, best_t = sc, t
            for p in range(1, k):
                marginals[(k, p)] = marg[p]
            events[k] = event[1:n]
            curves[k] = (mean, np.maximum(m2 - mean**2, 0.0))
            map_per_k[k] = (best_t, best)

    log_ev = np.full(k_max + 1, NEG_INF)
    feasible = (log_Z[1:] > NEG_INF) & (log_C[1:] > NEG_INF)
    log_ev[1:][feasible] = log_Z[1:][feasible] - log_C[1:][feasible]
    crit = log_ev + count_prior.log_p[: k_max + 1]
    if np.all(crit[1:] == NEG_INF):
        raise InputError("no admissible segmentation for any k")
    shift = np.max(crit[1:])
    post = np.zeros(k_max + 1)
    post[1:] = np.exp(crit[1:] - shift)
    post /= post.sum()
    k_hat = 1 + int(np.argmax(crit[1:]))

    return BruteResult(
        n=n,
        k_max=k_max,
        log_Z=log_Z,
        log_C=log_C,
        log_evidence_per_k=log_ev,
        post_k=post,
        k_hat=k_hat,
        boundary_marginals=marginals,
        boundary_event=events,
        curves=curves,
        map_per_k=map_per_k,
    )
