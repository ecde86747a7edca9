"""Joint MAP segmentation by max-sum DP with backpointers.

Deliberately separate from the sum-product engine: maximizing boundary
marginals one at a time does not recover the joint optimum, so exported
segmentations always come from this module. Ties break toward the smallest
split index, then the smallest segment count, making exports deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError
from .families import BlockEvidenceTable
from .priors import CountPrior, PriorNormalizers

NEG_INF = -np.inf


@dataclass(frozen=True)
class MapResult:
    k_used: int
    boundaries: np.ndarray
    score: float
    backpointers: np.ndarray


def maxsum_forward(
    table: BlockEvidenceTable, k_max: int, backend: str | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Best-score table M[k, j] and smallest-h argmax backpointers."""
    n = table.n
    if not 1 <= k_max <= n:
        raise ConfigError(f"k_max must lie in 1..n (got k_max={k_max}, n={n})")
    return _kernels.maxsum_pass(table.log_a0, k_max, backend)


def backtrack(backpointers: np.ndarray, k_hat: int) -> np.ndarray:
    """Recover the boundary vector for ``k_hat`` segments from backpointers."""
    n = backpointers.shape[1] - 1
    if not 1 <= k_hat < backpointers.shape[0]:
        raise ConfigError(f"k_hat={k_hat} outside the computed range")
    bounds = np.empty(k_hat + 1, dtype=np.int64)
    bounds[k_hat] = n
    for q in range(k_hat, 0, -1):
        h = backpointers[q, bounds[q]]
        if h < 0:
            raise ConfigError(f"no admissible segmentation with k={k_hat}")
        bounds[q - 1] = h
    return bounds


def select_k_map(
    scores: np.ndarray, normalizers: PriorNormalizers, count_prior: CountPrior
) -> int:
    """argmax_k of the MAP criterion M[k, n] + log p(k) - log C_k."""
    k_max = scores.shape[0] - 1
    n = scores.shape[1] - 1
    crit = np.full(k_max + 1, NEG_INF)
    for k in range(1, k_max + 1):
        if scores[k, n] > NEG_INF and normalizers.log_C[k] > NEG_INF:
            crit[k] = scores[k, n] + count_prior.log_p[k] - normalizers.log_C[k]
    if np.all(crit[1:] == NEG_INF):
        raise ConfigError("no admissible segmentation for any k in 1..k_max")
    return 1 + int(np.argmax(crit[1:]))  # first maximum = smallest k


def map_segmentation(
    table: BlockEvidenceTable,
    k: int,
    scores: np.ndarray | None = None,
    backpointers: np.ndarray | None = None,
    backend: str | None = None,
) -> MapResult:
    """Joint MAP boundary vector for a fixed segment count."""
    if scores is None or backpointers is None:
        scores, backpointers = maxsum_forward(table, k, backend)
    bounds = backtrack(backpointers, k)
    return MapResult(
        k_used=k,
        boundaries=bounds,
        score=float(scores[k, table.n]),
        backpointers=backpointers,
    )
