"""Synthetic piecewise-constant data generators with ground-truth records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Sequence
from .errors import ConfigError


@dataclass(frozen=True)
class SimTruth:
    family: str
    n: int
    boundaries: tuple[int, ...]  # interior indices
    levels: tuple[float, ...]
    extra: dict

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "n": self.n,
            "boundaries": list(self.boundaries),
            "levels": list(self.levels),
            **self.extra,
        }


def random_boundaries(rng: np.random.Generator, n: int, n_segments: int, min_sep: int = 2):
    """Interior boundaries uniform over placements with a minimum gap."""
    k = n_segments
    if k < 1 or (k - 1) * min_sep >= n:
        raise ConfigError(f"cannot place {k - 1} boundaries with gap {min_sep} in n={n}")
    while True:
        cand = np.sort(rng.choice(np.arange(1, n), size=k - 1, replace=False))
        full = np.concatenate(([0], cand, [n]))
        if np.all(np.diff(full) >= min_sep):
            return cand.astype(int)


def _segment_index(n: int, boundaries) -> np.ndarray:
    full = np.concatenate(([0], np.asarray(boundaries, int), [n]))
    idx = np.zeros(n, dtype=int)
    for q, (a, b) in enumerate(zip(full[:-1], full[1:])):
        idx[a:b] = q
    return idx


def simulate_sequence(
    family: str,
    n: int,
    boundaries,
    levels,
    rng: np.random.Generator,
    sigma: float = 1.0,
    trials: int = 1,
    phi: float = 20.0,
    w=None,
    x=None,
) -> tuple[Sequence, SimTruth]:
    """Draw one sequence with segmentwise-constant parameters.

    ``levels`` holds the per-segment parameter on the observation scale
    (Gaussian mean, Poisson rate, Binomial probability, Beta mean).
    """
    boundaries = tuple(int(b) for b in boundaries)
    levels = tuple(float(v) for v in levels)
    if len(levels) != len(boundaries) + 1:
        raise ConfigError("need exactly one level per segment")
    seg = _segment_index(n, boundaries)
    theta = np.asarray(levels)[seg]
    x = np.arange(1, n + 1, dtype=float) if x is None else np.asarray(x, float)
    extra: dict = {}
    if family == "gaussian":
        w_arr = np.ones(n) if w is None else np.asarray(w, float)
        y = rng.normal(theta, sigma / np.sqrt(w_arr))
        extra["sigma"] = sigma
    elif family == "poisson":
        w_arr = np.ones(n) if w is None else np.asarray(w, float)
        y = rng.poisson(theta * w_arr).astype(float)
    elif family == "binomial":
        w_arr = np.full(n, float(trials)) if w is None else np.asarray(w, float)
        y = rng.binomial(w_arr.astype(int), theta).astype(float)
        extra["trials"] = trials
    elif family == "betaobs":
        w_arr = np.ones(n) if w is None else np.asarray(w, float)
        y = rng.beta(phi * theta, phi * (1.0 - theta))
        y = np.clip(y, 1e-9, 1.0 - 1e-9)
        extra["phi"] = phi
    else:
        raise ConfigError(f"unknown family {family!r}")
    seq = Sequence(x, y, w_arr, family=family)
    truth = SimTruth(family=family, n=n, boundaries=boundaries, levels=levels, extra=extra)
    return seq, truth


def two_jump_levels(family: str, strength: float = 1.0) -> tuple[float, float, float]:
    """Well-separated low/high/low levels per family for recovery fixtures."""
    if family == "gaussian":
        return (0.0, strength, 0.0)
    if family == "poisson":
        return (2.0, 2.0 * max(strength, 1.5), 2.0)
    if family == "binomial":
        return (0.2, 0.8, 0.2)
    if family == "betaobs":
        return (0.25, 0.75, 0.25)
    raise ConfigError(f"unknown family {family!r}")
