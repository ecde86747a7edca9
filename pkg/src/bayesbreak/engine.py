"""Exact sum-product DP over contiguous segmentations.

Computes prefix/suffix log evidences, the posterior over segment counts,
boundary marginals and boundary-event probabilities, per-index Bayes
regression curves, and segment moments for a fixed segmentation. All inputs
arrive as a :class:`~bayesbreak.families.BlockEvidenceTable`; the engine
never looks at raw data, so conjugate, pooled, and approximate tables all
run through unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, InputError
from .families import BlockEvidenceTable
from .priors import CountPrior, PriorNormalizers

NEG_INF = -np.inf


@dataclass(frozen=True)
class DPMessages:
    """Forward (prefix) and backward (suffix) log evidence arrays.

    ``logL[k, j]`` sums over all k-segmentations of the prefix ``1..j``;
    ``logR[k, i]`` over all k-segmentations of the suffix ``i+1..n``.
    """

    logL: np.ndarray
    logR: np.ndarray

    @property
    def n(self) -> int:
        return self.logL.shape[1] - 1

    @property
    def k_max(self) -> int:
        return self.logL.shape[0] - 1

    def log_evidence(self, k: int) -> float:
        """Unnormalized log evidence of the full sequence under k segments."""
        return float(self.logL[k, self.n])


def forward_backward(table: BlockEvidenceTable, k_max: int, backend: str | None = None) -> DPMessages:
    """Run both recursions over the block table."""
    n = table.n
    if not 1 <= k_max <= n:
        raise ConfigError(f"k_max must lie in 1..n (got k_max={k_max}, n={n})")
    logL = _kernels.forward_pass(table.log_a0, k_max, backend)
    logR = _kernels.backward_pass(table.log_a0, k_max, backend)
    return DPMessages(logL=logL, logR=logR)


def posterior_k(
    msgs: DPMessages, normalizers: PriorNormalizers, count_prior: CountPrior
) -> tuple[np.ndarray, np.ndarray, int]:
    """Per-count log evidences, normalized posterior P(k | y), and MAP count.

    Returns arrays indexed 0..k_max with slot 0 unused (-inf / 0); ties in
    the posterior break toward the smallest k.
    """
    k_max = msgs.k_max
    n = msgs.n
    log_ev = np.full(k_max + 1, NEG_INF)
    for k in range(1, k_max + 1):
        if msgs.logL[k, n] > NEG_INF and normalizers.log_C[k] > NEG_INF:
            log_ev[k] = msgs.logL[k, n] - normalizers.log_C[k]
    scores = log_ev + count_prior.log_p[: k_max + 1]
    if np.all(scores[1:] == NEG_INF):
        raise ConfigError("no admissible segmentation for any k in 1..k_max")
    shift = np.max(scores[1:])
    post = np.zeros(k_max + 1)
    post[1:] = np.exp(scores[1:] - shift)
    post /= post.sum()
    k_hat = 1 + int(np.argmax(scores[1:]))  # first maximum = smallest k
    return log_ev, post, k_hat


def boundary_marginal(msgs: DPMessages, k: int, p: int) -> np.ndarray:
    """Posterior law of the p-th ordered boundary given k segments.

    Returns a length ``n + 1`` vector over candidate positions ``h`` (zero
    outside the admissible range ``p..n-(k-p)``), normalized to sum to one.
    """
    n = msgs.n
    if not 1 <= p <= k - 1:
        raise InputError(f"boundary index p must lie in 1..k-1 (got p={p}, k={k})")
    total = msgs.logL[k, n]
    if total == NEG_INF:
        raise ConfigError(f"no admissible segmentation with k={k}")
    out = np.zeros(n + 1)
    h = np.arange(p, n - (k - p) + 1)
    log_w = msgs.logL[p, h] + msgs.logR[k - p, h] - total
    out[h] = np.exp(log_w)
    s = out.sum()
    if s > 0:
        out /= s
    return out


def boundary_event_prob(msgs: DPMessages, k: int, h: int) -> float:
    """P(index h is a boundary | y, k), summing over boundary positions."""
    n = msgs.n
    if not 1 <= h <= n - 1:
        raise InputError(f"interior index h must lie in 1..n-1 (got {h})")
    if k == 1:
        return 0.0
    total = msgs.logL[k, n]
    if total == NEG_INF:
        raise ConfigError(f"no admissible segmentation with k={k}")
    terms = msgs.logL[1:k, h] + msgs.logR[k - 1 : 0 : -1, h] - total
    return float(np.sum(np.exp(terms)))


def boundary_event_probs(msgs: DPMessages, k: int) -> np.ndarray:
    """Vector of boundary-event probabilities for every interior index."""
    n = msgs.n
    out = np.zeros(n + 1)
    if k == 1:
        return out[1:n]
    total = msgs.logL[k, n]
    if total == NEG_INF:
        raise ConfigError(f"no admissible segmentation with k={k}")
    for r in range(1, k):
        out += np.exp(msgs.logL[r] + msgs.logR[k - r] - total)
    return out[1:n]


def _accumulate_per_index(values: np.ndarray) -> np.ndarray:
    """Sum block values over the indices each block covers.

    ``values[i, j]`` contributes to every t in ``i+1..j``; realized with a
    difference array so the total work stays quadratic.
    """
    n = values.shape[0] - 1
    diff = np.zeros(n + 2)
    diff[1:] += values.sum(axis=1)
    diff[1:] -= values.sum(axis=0)
    return np.cumsum(diff)[1 : n + 1]


def coverage_weights(
    msgs: DPMessages, table: BlockEvidenceTable, k: int, backend: str | None = None
) -> np.ndarray:
    """Posterior probability that block (i, j] is a segment, given k.

    For every index t, the weights of blocks covering t sum to one.
    """
    total = msgs.logL[k, msgs.n]
    if total == NEG_INF:
        raise ConfigError(f"no admissible segmentation with k={k}")
    log_w = _kernels.curve_logweights(msgs.logL, msgs.logR, table.log_a0, k, backend)
    with np.errstate(over="ignore"):
        w = np.exp(log_w - total)
    return np.where(np.isfinite(w), w, 0.0)


def curve_from_weights(
    weights: np.ndarray, post_mean: np.ndarray, post_var: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Combine coverage weights with block moment tables into a curve.

    The variance is clamped at zero against roundoff.
    """
    mean = _accumulate_per_index(weights * post_mean)
    m2 = _accumulate_per_index(weights * (post_var + post_mean**2))
    return mean, np.maximum(m2 - mean**2, 0.0)


def bayes_curve(
    msgs: DPMessages, table: BlockEvidenceTable, k: int, backend: str | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-index posterior mean and variance of the latent signal given k."""
    w = coverage_weights(msgs, table, k, backend)
    return curve_from_weights(w, table.post_mean, table.post_var)


def validate_boundaries(t, n: int) -> np.ndarray:
    t = np.asarray(t, dtype=np.int64)
    if t.ndim != 1 or len(t) < 2 or t[0] != 0 or t[-1] != n or np.any(np.diff(t) <= 0):
        raise InputError(f"malformed boundary vector {t.tolist()} for n={n}")
    return t


def segment_moments_fixed(
    table: BlockEvidenceTable, t
) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment posterior mean/variance along a fixed boundary vector."""
    t = validate_boundaries(t, table.n)
    i, j = t[:-1], t[1:]
    return table.post_mean[i, j].copy(), table.post_var[i, j].copy()


@dataclass(frozen=True)
class SegmentationPosterior:
    """Bundle of the posterior summaries produced by a full fit."""

    log_evidence_per_k: np.ndarray
    post_k: np.ndarray
    k_hat: int
    boundary_marginals: dict[int, np.ndarray]
    boundary_event: np.ndarray
    bayes_mean: np.ndarray
    bayes_var: np.ndarray
    map_segmentation: np.ndarray
    map_score: float
    segment_means: np.ndarray = field(default=None)  # type: ignore[assignment]
    segment_vars: np.ndarray = field(default=None)  # type: ignore[assignment]

    def to_dict(self, marginal_floor: float = 1e-12) -> dict:
        marg = {}
        for p, probs in self.boundary_marginals.items():
            keep = np.nonzero(probs >= marginal_floor)[0]
            marg[str(p)] = {str(int(h)): float(probs[h]) for h in keep}
        return {
            "log_evidence_per_k": [
                None if v == NEG_INF else float(v) for v in self.log_evidence_per_k[1:]
            ],
            "post_k": [float(v) for v in self.post_k[1:]],
            "k_hat": int(self.k_hat),
            "boundary_marginals": marg,
            "boundary_event": np.asarray(self.boundary_event).tolist(),
            "bayes_mean": np.asarray(self.bayes_mean).tolist(),
            "bayes_var": np.asarray(self.bayes_var).tolist(),
            "map_segmentation": [int(v) for v in self.map_segmentation],
            "map_score": float(self.map_score),
            "segment_means": np.asarray(self.segment_means).tolist(),
            "segment_vars": np.asarray(self.segment_vars).tolist(),
        }
