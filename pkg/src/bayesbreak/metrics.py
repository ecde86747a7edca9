"""Evaluation metrics for boundary recovery and probability calibration.

Boundary F1 uses greedy nearest-first one-to-one matching inside a
tolerance window of ``tol`` indices; location MAE averages the absolute
offsets of the matched pairs. The calibration error (ECE) is the
count-weighted mean gap between predicted-probability bins and their
empirical frequencies over equal-width bins.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import spearmanr


def match_boundaries(pred, true, tol: int = 2) -> list[tuple[int, int]]:
    """Greedy one-to-one matching, closest pairs first, within ``tol``."""
    pred = list(int(v) for v in pred)
    true = list(int(v) for v in true)
    pairs = sorted(
        ((abs(p - t), pi, ti) for pi, p in enumerate(pred) for ti, t in enumerate(true)),
        key=lambda r: (r[0], r[1], r[2]),
    )
    used_p: set[int] = set()
    used_t: set[int] = set()
    matches = []
    for d, pi, ti in pairs:
        if d > tol:
            break
        if pi in used_p or ti in used_t:
            continue
        used_p.add(pi)
        used_t.add(ti)
        matches.append((pred[pi], true[ti]))
    return matches


def boundary_f1(pred, true, tol: int = 2) -> float:
    pred = list(pred)
    true = list(true)
    if not pred and not true:
        return 1.0
    if not pred or not true:
        return 0.0
    m = len(match_boundaries(pred, true, tol))
    precision = m / len(pred)
    recall = m / len(true)
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def boundary_mae(pred, true, tol: int = 2) -> float:
    """Mean absolute offset over matched pairs (NaN when nothing matches)."""
    matches = match_boundaries(pred, true, tol)
    if not matches:
        return float("nan")
    return float(np.mean([abs(p - t) for p, t in matches]))


def signal_mse(estimate, truth) -> float:
    estimate = np.asarray(estimate, float)
    truth = np.asarray(truth, float)
    return float(np.mean((estimate - truth) ** 2))


def calibration_bins(probs, outcomes, n_bins: int = 10):
    """Per-bin (count, mean predicted, empirical frequency) over [0, 1]."""
    probs = np.asarray(probs, float)
    outcomes = np.asarray(outcomes, float)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.clip(np.digitize(probs, edges[1:-1]), 0, n_bins - 1)
    rows = []
    for b in range(n_bins):
        mask = idx == b
        count = int(np.count_nonzero(mask))
        if count == 0:
            rows.append((b, 0, float("nan"), float("nan")))
        else:
            rows.append((b, count, float(probs[mask].mean()), float(outcomes[mask].mean())))
    return rows


def ece(probs, outcomes, n_bins: int = 10) -> float:
    """Expected calibration error: count-weighted |confidence - accuracy|."""
    rows = calibration_bins(probs, outcomes, n_bins)
    total = sum(r[1] for r in rows)
    if total == 0:
        return float("nan")
    return float(
        sum(r[1] * abs(r[2] - r[3]) for r in rows if r[1] > 0) / total
    )


def bin_rank_correlation(probs, outcomes, n_bins: int = 10) -> float:
    """Spearman correlation between bin confidence and empirical frequency."""
    rows = [r for r in calibration_bins(probs, outcomes, n_bins) if r[1] > 0]
    if len(rows) < 3:
        return float("nan")
    conf = [r[2] for r in rows]
    acc = [r[3] for r in rows]
    rho = spearmanr(conf, acc).statistic
    return float(rho)
